#pragma once

/**
 * @file ssdkit/evaluation.hpp
 * @brief VOC-style precision/recall, average precision and mAP.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ssdkit/errors.hpp"
#include "ssdkit/geometry.hpp"
#include "ssdkit/records.hpp"

namespace ssdkit {

enum class Interpolation { all_point, eleven_point };

struct EvalConfig {
    double iou_threshold = 0.5;
    Interpolation interpolation = Interpolation::all_point;

    void validate() const
    {
        if (!(iou_threshold > 0.0 && iou_threshold < 1.0))
            throw InvalidArgument("EvalConfig: IoU threshold must lie in (0,1)");
    }
};

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct PrCurve {
    std::vector<PrPoint> points; // one per ranked detection
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t num_gt = 0;
};

struct ScoredBox {
    std::string image_id;
    double score = 0.0;
    PixelBox box;
};

using GtBoxesByImage = std::map<std::string, std::vector<PixelBox>>;

// Ranks detections by score (stable), then marks each a true positive when it
// overlaps some not-yet-matched GT of its image by at least the threshold;
// the best-overlapping such GT is consumed.
inline PrCurve pr_curve(std::span<const ScoredBox> detections, const GtBoxesByImage& gts, const EvalConfig& config = {})
{
    config.validate();
    PrCurve curve;
    for (const auto& [image, boxes] : gts)
        curve.num_gt += boxes.size();

    std::vector<std::size_t> order(detections.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });

    std::map<std::string, std::vector<bool>> used;
    for (const auto& [image, boxes] : gts)
        used[image].assign(boxes.size(), false);

    for (std::size_t idx : order) {
        const auto& det = detections[idx];
        bool hit = false;
        if (auto it = gts.find(det.image_id); it != gts.end()) {
            auto& taken = used[det.image_id];
            double best = -1.0;
            std::size_t best_gt = 0;
            for (std::size_t g = 0; g < it->second.size(); ++g) {
                if (taken[g])
                    continue;
                const double iou = jaccard(det.box, it->second[g]);
                if (iou > best) {
                    best = iou;
                    best_gt = g;
                }
            }
            if (best >= config.iou_threshold) {
                taken[best_gt] = true;
                hit = true;
            }
        }
        hit ? ++curve.true_positives : ++curve.false_positives;
        const double ranked = static_cast<double>(curve.true_positives + curve.false_positives);
        const double recall =
            curve.num_gt ? static_cast<double>(curve.true_positives) / static_cast<double>(curve.num_gt) : 0.0;
        curve.points.push_back({recall, static_cast<double>(curve.true_positives) / ranked});
    }
    return curve;
}

inline double average_precision(std::span<const PrPoint> curve, Interpolation mode = Interpolation::all_point)
{
    if (curve.empty())
        return 0.0;

    // Envelope: precision at point i becomes the max precision at i or later.
    std::vector<double> envelope(curve.size());
    double running = 0.0;
    for (std::size_t i = curve.size(); i-- > 0;) {
        running = std::max(running, curve[i].precision);
        envelope[i] = running;
    }

    double ap = 0.0;
    if (mode == Interpolation::all_point) {
        double prev_recall = 0.0;
        for (std::size_t i = 0; i < curve.size(); ++i) {
            if (curve[i].recall > prev_recall) {
                ap += (curve[i].recall - prev_recall) * envelope[i];
                prev_recall = curve[i].recall;
            }
        }
    } else {
        for (int t = 0; t <= 10; ++t) {
            const double r = t / 10.0;
            double best = 0.0;
            for (std::size_t i = 0; i < curve.size(); ++i)
                if (curve[i].recall >= r)
                    best = std::max(best, envelope[i]);
            ap += best;
        }
        ap /= 11.0;
    }
    return std::clamp(ap, 0.0, 1.0);
}

inline double average_precision(const PrCurve& curve, Interpolation mode = Interpolation::all_point)
{
    return average_precision(std::span<const PrPoint>(curve.points), mode);
}

inline double mean_average_precision(std::span<const double> aps)
{
    if (aps.empty())
        throw EmptyInput("mean_average_precision: no evaluable classes");
    double sum = 0.0;
    for (double ap : aps)
        sum += ap;
    return sum / static_cast<double>(aps.size());
}

struct ClassResult {
    std::string label;
    double ap = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t num_gt = 0;
    bool evaluable = true; // false: no GT, excluded from mAP
};

struct EvalReport {
    std::vector<ClassResult> classes; // sorted by label
    double map = 0.0;
    std::size_t evaluable_classes = 0;
};

// Per-class AP over the union of annotated and detected labels. Every
// detection must reference an annotated image.
inline EvalReport evaluate(const Dataset& dataset, std::span<const Detection> detections, const EvalConfig& config = {})
{
    config.validate();
    std::set<std::string> images;
    std::map<std::string, GtBoxesByImage> gts;
    for (const auto& rec : dataset) {
        images.insert(rec.image_id);
        for (const auto& obj : rec.objects)
            gts[obj.label][rec.image_id].push_back(obj.box);
    }

    std::map<std::string, std::vector<ScoredBox>> dets;
    for (const auto& det : detections) {
        if (!images.count(det.image_id))
            throw ValidationError("detection references unknown image '" + det.image_id + "'");
        dets[det.label].push_back({det.image_id, det.score, det.box});
    }

    std::set<std::string> labels;
    for (const auto& entry : gts)
        labels.insert(entry.first);
    for (const auto& entry : dets)
        labels.insert(entry.first);

    EvalReport report;
    std::vector<double> aps;
    static const GtBoxesByImage no_gts;
    static const std::vector<ScoredBox> no_dets;
    for (const auto& label : labels) {
        const auto git = gts.find(label);
        const auto dit = dets.find(label);
        const auto& class_gts = git != gts.end() ? git->second : no_gts;
        const auto& class_dets = dit != dets.end() ? dit->second : no_dets;
        const PrCurve curve = pr_curve(class_dets, class_gts, config);

        ClassResult r;
        r.label = label;
        r.true_positives = curve.true_positives;
        r.false_positives = curve.false_positives;
        r.num_gt = curve.num_gt;
        r.evaluable = curve.num_gt > 0;
        r.ap = r.evaluable ? average_precision(curve, config.interpolation) : 0.0;
        if (r.evaluable)
            aps.push_back(r.ap);
        report.classes.push_back(r);
    }
    report.evaluable_classes = aps.size();
    report.map = mean_average_precision(aps);
    return report;
}

struct RunResult {
    std::string name;
    double map = 0.0;
};

struct ComparisonRow {
    std::string name;
    double map = 0.0;
    double improvement = 0.0; // mAP percentage points over the baseline, 1 decimal
};

inline double round_to_tenth(double v) noexcept
{
    const double r = std::round(v * 10.0) / 10.0;
    return r == 0.0 ? 0.0 : r; // no negative zero
}

inline std::vector<ComparisonRow> compare_runs(std::span<const RunResult> runs, const std::string& baseline)
{
    const auto base = std::find_if(runs.begin(), runs.end(), [&](const RunResult& r) { return r.name == baseline; });
    if (base == runs.end())
        throw InvalidArgument("compare_runs: baseline '" + baseline + "' not among the runs");
    std::vector<ComparisonRow> rows;
    for (const auto& run : runs)
        rows.push_back({run.name, run.map, round_to_tenth((run.map - base->map) * 100.0)});
    return rows;
}

} // namespace ssdkit
