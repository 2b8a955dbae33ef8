#pragma once

/**
 * @file ssdkit/anchors.hpp
 * @brief Default-box (anchor) generation over square feature maps.
 *
 * For feature map k of size f_k, every cell (i, j) gets one box per aspect
 * ratio a centred at ((i+0.5)/f_k, (j+0.5)/f_k) with w = s_k*sqrt(a) and
 * h = s_k/sqrt(a), followed by one extra box at scale sqrt(s_k * s_{k+1})
 * (s_{m+1} = 1). Scales interpolate linearly from s_min to s_max.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ssdkit/distribution.hpp"
#include "ssdkit/errors.hpp"
#include "ssdkit/geometry.hpp"

namespace ssdkit {

inline const std::vector<double>& static_ratio_set()
{
    static const std::vector<double> ratios{1.0, 2.0, 3.0, 1.0 / 2.0, 1.0 / 3.0};
    return ratios;
}

enum class RatioMode {
    fixed,    // extra box only when the set contains 1 (tolerance 1e-9)
    adaptive, // extra box always; uses the ratio nearest 1 if within 0.05, else 1
};

inline constexpr double kFixedUnitRatioTolerance = 1e-9;
inline constexpr double kAdaptiveUnitRatioTolerance = 0.05;

struct AnchorConfig {
    double s_min = 0.2;
    double s_max = 0.9;
    std::vector<int> feature_map_sizes; // one entry per feature map; m = size()
    std::vector<double> ratios = static_ratio_set();
    RatioMode mode = RatioMode::fixed;

    std::size_t num_maps() const noexcept { return feature_map_sizes.size(); }

    void validate() const
    {
        if (feature_map_sizes.empty())
            throw InvalidArgument("AnchorConfig: need at least one feature map");
        if (!(s_min > 0.0 && s_min <= s_max && s_max <= 1.0))
            throw InvalidArgument("AnchorConfig: require 0 < s_min <= s_max <= 1");
        for (int f : feature_map_sizes)
            if (f < 1)
                throw InvalidArgument("AnchorConfig: feature map sizes must be >= 1");
        if (ratios.empty())
            throw InvalidArgument("AnchorConfig: empty ratio set");
        for (double r : ratios)
            if (!(r > 0.0) || !std::isfinite(r))
                throw InvalidArgument("AnchorConfig: ratios must be positive and finite");
    }
};

struct DefaultBox {
    CenterBox center;     // unclamped generator output
    std::size_t map = 0;  // feature map index k (0-based)
    int i = 0;            // column: cx = (i + 0.5) / f_k
    int j = 0;            // row:    cy = (j + 0.5) / f_k
    double ratio = 1.0;
    double scale = 0.0;
    bool extra = false;

    // Corner form clamped to the image; what matching and export use.
    BoundingBox corner() const { return center_to_corner(center); }
};

using DefaultBoxSet = std::vector<DefaultBox>;

inline std::vector<double> compute_scales(int m, double s_min, double s_max)
{
    if (m <= 0)
        throw InvalidArgument("compute_scales: number of feature maps must be positive");
    if (m == 1)
        return {s_min};
    std::vector<double> scales(static_cast<std::size_t>(m));
    const double step = (s_max - s_min) / static_cast<double>(m - 1);
    for (int k = 0; k < m; ++k)
        scales[static_cast<std::size_t>(k)] = s_min + step * static_cast<double>(k);
    scales.back() = s_max;
    return scales;
}

// Ratio used for the extra-scale box, or nothing when the set gets none.
inline std::optional<double> extra_box_ratio(std::span<const double> ratios, RatioMode mode)
{
    const double tol = mode == RatioMode::fixed ? kFixedUnitRatioTolerance : kAdaptiveUnitRatioTolerance;
    std::optional<double> nearest;
    for (double r : ratios)
        if (std::abs(r - 1.0) <= tol && (!nearest || std::abs(r - 1.0) < std::abs(*nearest - 1.0)))
            nearest = r;
    if (mode == RatioMode::adaptive && !nearest)
        return 1.0;
    return nearest;
}

inline std::size_t expected_box_count(const AnchorConfig& config)
{
    const std::size_t per_cell = config.ratios.size() + (extra_box_ratio(config.ratios, config.mode) ? 1 : 0);
    std::size_t cells = 0;
    for (int f : config.feature_map_sizes)
        cells += static_cast<std::size_t>(f) * static_cast<std::size_t>(f);
    return cells * per_cell;
}

// Ordered by map k, then i, then j, then ratio order with the extra box last.
inline DefaultBoxSet generate_default_boxes(const AnchorConfig& config)
{
    config.validate();
    const auto scales = compute_scales(static_cast<int>(config.num_maps()), config.s_min, config.s_max);
    const auto extra_ratio = extra_box_ratio(config.ratios, config.mode);

    DefaultBoxSet boxes;
    boxes.reserve(expected_box_count(config));
    for (std::size_t k = 0; k < config.num_maps(); ++k) {
        const int f = config.feature_map_sizes[k];
        const double s = scales[k];
        const double s_next = k + 1 < scales.size() ? scales[k + 1] : 1.0;
        const double s_extra = std::sqrt(s * s_next);
        for (int i = 0; i < f; ++i) {
            for (int j = 0; j < f; ++j) {
                const double cx = (i + 0.5) / f;
                const double cy = (j + 0.5) / f;
                for (double a : config.ratios) {
                    const double root = std::sqrt(a);
                    boxes.push_back({{cx, cy, s * root, s / root}, k, i, j, a, s, false});
                }
                if (extra_ratio) {
                    const double root = std::sqrt(*extra_ratio);
                    boxes.push_back({{cx, cy, s_extra * root, s_extra / root}, k, i, j, *extra_ratio, s_extra, true});
                }
            }
        }
    }
    return boxes;
}

inline constexpr double kRatioDedupTolerance = 1e-6;

// Representative ratios of the dataset's aspect-ratio distribution, sorted
// ascending with near-duplicates (within 1e-6) collapsed. 1 to 5 values.
inline std::vector<double> adaptive_ratio_set(std::span<const double> aspect_ratio_samples, const BinSettings& settings = {})
{
    if (aspect_ratio_samples.empty())
        throw EmptyInput("adaptive_ratio_set: dataset has no ground-truth objects");
    auto values = representative_ratios(aspect_ratio_samples, settings).as_vector();
    std::sort(values.begin(), values.end());
    std::vector<double> out;
    for (double v : values)
        if (out.empty() || v - out.back() > kRatioDedupTolerance)
            out.push_back(v);
    return out;
}

inline std::vector<double> adaptive_ratio_set(const Dataset& dataset, const BinSettings& settings = {})
{
    const auto samples = aspect_ratios(dataset);
    return adaptive_ratio_set(std::span<const double>(samples), settings);
}

} // namespace ssdkit
