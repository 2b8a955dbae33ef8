#pragma once

/**
 * @file ssdkit/geometry.hpp
 * @brief Box representations, conversions, Jaccard overlap and offset coding.
 *
 * Two box types share the algorithms in this header:
 *   - BoundingBox: normalized corner box, always clamped to [0,1].
 *   - PixelBox:    absolute pixel corner box as carried by annotation and
 *                  detection files. Not clamped; only ordered.
 * Anything exposing xmin()/ymin()/xmax()/ymax() satisfies CornerBox and can be
 * passed to area() and jaccard().
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>

#include "ssdkit/errors.hpp"

namespace ssdkit {

template <class B>
concept CornerBox = requires(const B& b) {
    { b.xmin() } -> std::convertible_to<double>;
    { b.ymin() } -> std::convertible_to<double>;
    { b.xmax() } -> std::convertible_to<double>;
    { b.ymax() } -> std::convertible_to<double>;
};

struct CenterBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct BoxOffsets {
    double dcx = 0.0;
    double dcy = 0.0;
    double dw = 0.0;
    double dh = 0.0;

    bool is_finite() const noexcept
    {
        return std::isfinite(dcx) && std::isfinite(dcy) && std::isfinite(dw) && std::isfinite(dh);
    }
};

namespace detail {

inline double clamp01(double v) noexcept { return std::clamp(v, 0.0, 1.0); }

inline void require_ordered(double xmin, double ymin, double xmax, double ymax, const char* who)
{
    if (!(std::isfinite(xmin) && std::isfinite(ymin) && std::isfinite(xmax) && std::isfinite(ymax)))
        throw InvalidArgument(std::string(who) + ": non-finite coordinate");
    if (xmin > xmax || ymin > ymax)
        throw InvalidArgument(std::string(who) + ": xmin > xmax or ymin > ymax");
}

} // namespace detail

// Normalized corner-form box. Construction validates ordering and clamps every
// coordinate to [0,1].
class BoundingBox {
public:
    BoundingBox() = default;

    BoundingBox(double xmin, double ymin, double xmax, double ymax)
    {
        detail::require_ordered(xmin, ymin, xmax, ymax, "BoundingBox");
        xmin_ = detail::clamp01(xmin);
        ymin_ = detail::clamp01(ymin);
        xmax_ = detail::clamp01(xmax);
        ymax_ = detail::clamp01(ymax);
    }

    double xmin() const noexcept { return xmin_; }
    double ymin() const noexcept { return ymin_; }
    double xmax() const noexcept { return xmax_; }
    double ymax() const noexcept { return ymax_; }
    double width() const noexcept { return xmax_ - xmin_; }
    double height() const noexcept { return ymax_ - ymin_; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

private:
    double xmin_ = 0.0;
    double ymin_ = 0.0;
    double xmax_ = 0.0;
    double ymax_ = 0.0;
};

// Absolute pixel corner box.
class PixelBox {
public:
    PixelBox() = default;

    PixelBox(double xmin, double ymin, double xmax, double ymax)
        : xmin_(xmin), ymin_(ymin), xmax_(xmax), ymax_(ymax)
    {
        detail::require_ordered(xmin, ymin, xmax, ymax, "PixelBox");
    }

    double xmin() const noexcept { return xmin_; }
    double ymin() const noexcept { return ymin_; }
    double xmax() const noexcept { return xmax_; }
    double ymax() const noexcept { return ymax_; }
    double width() const noexcept { return xmax_ - xmin_; }
    double height() const noexcept { return ymax_ - ymin_; }

    bool inside(double image_width, double image_height) const noexcept
    {
        return xmin_ >= 0.0 && ymin_ >= 0.0 && xmax_ <= image_width && ymax_ <= image_height;
    }

    BoundingBox normalized(double image_width, double image_height) const
    {
        if (!(image_width > 0.0 && image_height > 0.0))
            throw InvalidArgument("PixelBox::normalized: image dimensions must be positive");
        return {xmin_ / image_width, ymin_ / image_height, xmax_ / image_width, ymax_ / image_height};
    }

    friend bool operator==(const PixelBox&, const PixelBox&) = default;

private:
    double xmin_ = 0.0;
    double ymin_ = 0.0;
    double xmax_ = 0.0;
    double ymax_ = 0.0;
};

inline PixelBox to_pixels(const BoundingBox& b, double image_width, double image_height)
{
    return {b.xmin() * image_width, b.ymin() * image_height, b.xmax() * image_width, b.ymax() * image_height};
}

template <CornerBox B>
double area(const B& b) noexcept
{
    return (static_cast<double>(b.xmax()) - b.xmin()) * (static_cast<double>(b.ymax()) - b.ymin());
}

inline CenterBox corner_to_center(const BoundingBox& b) noexcept
{
    return {(b.xmin() + b.xmax()) / 2.0, (b.ymin() + b.ymax()) / 2.0, b.width(), b.height()};
}

inline BoundingBox center_to_corner(double cx, double cy, double w, double h)
{
    if (!(w >= 0.0 && h >= 0.0))
        throw InvalidArgument("center_to_corner: negative width or height");
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
}

inline BoundingBox center_to_corner(const CenterBox& c) { return center_to_corner(c.cx, c.cy, c.w, c.h); }

// Intersection over union. Zero when either box has zero area.
template <CornerBox A, CornerBox B>
double jaccard(const A& a, const B& b) noexcept
{
    const double area_a = area(a);
    const double area_b = area(b);
    if (area_a <= 0.0 || area_b <= 0.0)
        return 0.0;
    const double iw = std::min<double>(a.xmax(), b.xmax()) - std::max<double>(a.xmin(), b.xmin());
    const double ih = std::min<double>(a.ymax(), b.ymax()) - std::max<double>(a.ymin(), b.ymin());
    if (iw <= 0.0 || ih <= 0.0)
        return 0.0;
    const double inter = iw * ih;
    return std::clamp(inter / (area_a + area_b - inter), 0.0, 1.0);
}

// Plain SSD parameterization, no variance scaling:
//   dcx = (g_cx - d_cx) / d_w    dw = ln(g_w / d_w)
inline BoxOffsets encode_offsets(const BoundingBox& gt, const BoundingBox& anchor)
{
    const CenterBox g = corner_to_center(gt);
    const CenterBox d = corner_to_center(anchor);
    if (!(d.w > 0.0 && d.h > 0.0))
        throw InvalidArgument("encode_offsets: anchor has zero width or height");
    if (!(g.w > 0.0 && g.h > 0.0))
        throw InvalidArgument("encode_offsets: ground truth has zero width or height");
    return {(g.cx - d.cx) / d.w, (g.cy - d.cy) / d.h, std::log(g.w / d.w), std::log(g.h / d.h)};
}

inline BoundingBox decode_offsets(const BoxOffsets& off, const BoundingBox& anchor)
{
    if (!off.is_finite())
        throw InvalidArgument("decode_offsets: non-finite offsets");
    const CenterBox d = corner_to_center(anchor);
    if (!(d.w > 0.0 && d.h > 0.0))
        throw InvalidArgument("decode_offsets: anchor has zero width or height");
    const double w = d.w * std::exp(off.dw);
    const double h = d.h * std::exp(off.dh);
    if (!std::isfinite(w) || !std::isfinite(h))
        throw InvalidArgument("decode_offsets: decoded size overflows");
    return center_to_corner(d.cx + off.dcx * d.w, d.cy + off.dcy * d.h, w, h);
}

} // namespace ssdkit
