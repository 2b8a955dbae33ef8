#pragma once

/**
 * @file ssdkit/distribution.hpp
 * @brief Aspect-ratio density estimation and dataset class statistics.
 *
 * The density of box aspect ratios (width / height) is estimated with a fixed
 * width histogram. Five representative values summarize it: the mode (centre
 * of the fullest bin), the arithmetic mean, and the nearest-rank median and
 * quartiles. These feed the adaptive default-box ratio set in anchors.hpp.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ssdkit/errors.hpp"
#include "ssdkit/records.hpp"

namespace ssdkit {

struct Histogram {
    double origin = 0.0;
    double bin_width = 1.0;
    std::vector<std::size_t> counts; // counts[b] covers [origin + b*h, origin + (b+1)*h)
    std::size_t total = 0;

    double bin_center(std::size_t bin) const noexcept
    {
        return origin + (static_cast<double>(bin) + 0.5) * bin_width;
    }
};

// Unset fields fall back to the automatic choice (see resolve_bin_settings).
struct BinSettings {
    std::optional<double> origin;
    std::optional<double> bin_width;
};

inline constexpr std::size_t kMaxHistogramBins = 10'000'000;
inline constexpr std::size_t kMaxAutoBins = 10'000;

inline Histogram build_histogram(std::span<const double> samples, double origin, double bin_width)
{
    if (samples.empty())
        throw EmptyInput("build_histogram: no samples");
    if (!(bin_width > 0.0) || !std::isfinite(bin_width))
        throw InvalidArgument("build_histogram: bin width must be positive and finite");
    if (!std::isfinite(origin))
        throw InvalidArgument("build_histogram: origin must be finite");

    std::vector<std::size_t> bins;
    bins.reserve(samples.size());
    std::size_t top = 0;
    for (double x : samples) {
        if (!std::isfinite(x) || x < origin)
            throw InvalidArgument("build_histogram: sample below origin or non-finite");
        const double idx = std::floor((x - origin) / bin_width);
        if (idx >= static_cast<double>(kMaxHistogramBins))
            throw InvalidArgument("build_histogram: bin width too small for the sample range");
        const auto b = static_cast<std::size_t>(idx);
        bins.push_back(b);
        top = std::max(top, b);
    }

    Histogram hist;
    hist.origin = origin;
    hist.bin_width = bin_width;
    hist.counts.assign(top + 1, 0);
    for (std::size_t b : bins)
        ++hist.counts[b];
    hist.total = samples.size();
    return hist;
}

// Histogram density estimate: count of x's bin / (n * h). Zero outside the
// covered range.
inline double density_at(const Histogram& hist, double x) noexcept
{
    if (hist.total == 0 || !(x >= hist.origin))
        return 0.0;
    const double idx = std::floor((x - hist.origin) / hist.bin_width);
    if (idx >= static_cast<double>(hist.counts.size()))
        return 0.0;
    const auto count = hist.counts[static_cast<std::size_t>(idx)];
    return static_cast<double>(count) / (static_cast<double>(hist.total) * hist.bin_width);
}

// Smallest sample v with empirical CDF(v) >= q. `sorted` must be ascending.
inline double nearest_rank_quantile(std::span<const double> sorted, double q)
{
    if (sorted.empty())
        throw EmptyInput("nearest_rank_quantile: no samples");
    if (!(q >= 0.0 && q <= 1.0))
        throw InvalidArgument("nearest_rank_quantile: q outside [0,1]");
    const double n = static_cast<double>(sorted.size());
    // The epsilon keeps q*n that is integral in exact arithmetic from rounding up.
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

struct ResolvedBins {
    double origin;
    double bin_width;
};

// Defaults: origin = min sample, width by Freedman-Diaconis on nearest-rank
// quartiles. Zero IQR falls back to Sturges' bin count over the range; a
// zero range gets a unit-width bin centred on the single value.
inline ResolvedBins resolve_bin_settings(std::span<const double> samples, const BinSettings& settings)
{
    if (samples.empty())
        throw EmptyInput("resolve_bin_settings: no samples");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = sorted.front();
    const double range = sorted.back() - lo;
    const double n = static_cast<double>(sorted.size());

    double width = 0.0;
    if (settings.bin_width) {
        width = *settings.bin_width;
    } else if (range > 0.0) {
        const double iqr = nearest_rank_quantile(sorted, 0.75) - nearest_rank_quantile(sorted, 0.25);
        width = 2.0 * iqr / std::cbrt(n);
        if (!(width > 0.0))
            width = range / (std::ceil(std::log2(n)) + 1.0);
        width = std::max(width, range / static_cast<double>(kMaxAutoBins));
    } else {
        width = 1.0;
    }

    double origin = lo;
    if (settings.origin)
        origin = *settings.origin;
    else if (range == 0.0)
        origin = lo - width / 2.0;
    return {origin, width};
}

struct RepresentativeRatios {
    double mode = 0.0;           // x1
    double mean = 0.0;           // x2
    double median = 0.0;         // x3
    double first_quartile = 0.0; // x4
    double third_quartile = 0.0; // x5

    std::vector<double> as_vector() const { return {mode, mean, median, first_quartile, third_quartile}; }
};

inline RepresentativeRatios representative_ratios(std::span<const double> samples, const BinSettings& settings = {})
{
    if (samples.empty())
        throw EmptyInput("representative_ratios: no samples");
    for (double x : samples)
        if (!(x > 0.0) || !std::isfinite(x))
            throw InvalidArgument("representative_ratios: samples must be positive and finite");

    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());

    const auto bins = resolve_bin_settings(sorted, settings);
    const Histogram hist = build_histogram(sorted, bins.origin, bins.bin_width);
    // max_element returns the first maximum: ties go to the lowest bin.
    const auto fullest = static_cast<std::size_t>(
        std::distance(hist.counts.begin(), std::max_element(hist.counts.begin(), hist.counts.end())));

    RepresentativeRatios r;
    r.mode = hist.bin_center(fullest);
    // Summing the sorted copy keeps the mean independent of input order.
    r.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    r.median = nearest_rank_quantile(sorted, 0.5);
    r.first_quartile = nearest_rank_quantile(sorted, 0.25);
    r.third_quartile = nearest_rank_quantile(sorted, 0.75);
    return r;
}

// Width / height of every ground-truth object, optionally for a single label.
// Objects with zero width or height have no defined ratio and are skipped.
inline std::vector<double> aspect_ratios(const Dataset& dataset, const std::optional<std::string>& label = {})
{
    std::vector<double> out;
    for (const auto& rec : dataset)
        for (const auto& obj : rec.objects) {
            if (label && obj.label != *label)
                continue;
            if (obj.box.width() > 0.0 && obj.box.height() > 0.0)
                out.push_back(obj.box.width() / obj.box.height());
        }
    return out;
}

struct ClassCount {
    std::string label;
    std::size_t count = 0;
    double percent = 0.0;
};

struct ClassStats {
    std::vector<ClassCount> classes; // sorted by label
    std::size_t total = 0;
};

inline ClassStats class_stats(const Dataset& dataset)
{
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& rec : dataset)
        for (const auto& obj : rec.objects) {
            ++counts[obj.label];
            ++total;
        }

    ClassStats stats;
    stats.total = total;
    for (const auto& [label, count] : counts)
        stats.classes.push_back({label, count, 100.0 * static_cast<double>(count) / static_cast<double>(total)});
    return stats;
}

} // namespace ssdkit
