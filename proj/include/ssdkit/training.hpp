#pragma once

/**
 * @file ssdkit/training.hpp
 * @brief Default-box matching, hard negative mining and the multibox loss.
 *
 * Everything here works on externally supplied predictions; nothing trains a
 * network. The loss is
 *
 *   L = (L_conf + alpha * L_loc) / N
 *   L_conf = -sum_{l in Pos} log p[l, c_l] - sum_{h in mined} log p[h, 0]
 *   L_loc  =  sum_{l in Pos} sum_{q in cx,cy,w,h} smoothL1(pred[l,q] - target[l,q])
 *
 * with N = |Pos|, targets from encode_offsets(), and the 1/N applied once.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "ssdkit/anchors.hpp"
#include "ssdkit/errors.hpp"
#include "ssdkit/geometry.hpp"

namespace ssdkit {

struct MatchConfig {
    double threshold = 0.5;
    bool force_best_match = false;
    double neg_pos_ratio = 3.0;

    void validate() const
    {
        if (!(threshold > 0.0 && threshold < 1.0))
            throw InvalidArgument("MatchConfig: threshold must lie in (0,1)");
        if (!(neg_pos_ratio >= 1.0) || !std::isfinite(neg_pos_ratio))
            throw InvalidArgument("MatchConfig: negative:positive ratio must be >= 1");
    }
};

struct LossConfig {
    double alpha = 1.0;

    void validate() const
    {
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw InvalidArgument("LossConfig: alpha must be >= 0");
    }
};

struct GroundTruthBox {
    BoundingBox box;
    int class_index = 1; // 0 is background
};

struct PositiveMatch {
    std::size_t anchor = 0;
    int class_index = 0;
    BoundingBox target;
    std::size_t gt = 0;
};

struct MatchResult {
    std::vector<PositiveMatch> positives; // ascending anchor index
    std::vector<std::size_t> negatives;   // ascending
    std::vector<double> gt_best_iou;      // best overlap any anchor reaches, per GT
    std::size_t num_anchors = 0;
    int num_classes = 0;

    std::size_t num_positive() const noexcept { return positives.size(); }
};

// d rows of n class confidences followed by 4 localization offsets.
class PredictionMatrix {
public:
    PredictionMatrix() = default;

    PredictionMatrix(std::size_t rows, int num_classes)
        : rows_(rows), classes_(num_classes)
    {
        if (num_classes < 1)
            throw InvalidArgument("PredictionMatrix: need at least the background class");
        data_.assign(rows * stride(), 0.0);
    }

    std::size_t rows() const noexcept { return rows_; }
    int num_classes() const noexcept { return classes_; }
    std::size_t stride() const noexcept { return static_cast<std::size_t>(classes_) + 4; }

    double& conf(std::size_t row, int c) { return data_[row * stride() + static_cast<std::size_t>(c)]; }
    double conf(std::size_t row, int c) const { return data_[row * stride() + static_cast<std::size_t>(c)]; }
    double& loc(std::size_t row, int q) { return data_[row * stride() + static_cast<std::size_t>(classes_ + q)]; }
    double loc(std::size_t row, int q) const { return data_[row * stride() + static_cast<std::size_t>(classes_ + q)]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    // Every confidence row must be a probability vector (sum 1 within tol).
    void validate_probabilities(double tol = 1e-6) const
    {
        for (std::size_t r = 0; r < rows_; ++r) {
            double sum = 0.0;
            for (int c = 0; c < classes_; ++c) {
                const double p = conf(r, c);
                if (!(p >= 0.0 && p <= 1.0))
                    throw ValidationError("prediction row " + std::to_string(r) + ": confidence outside [0,1]");
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol)
                throw ValidationError("prediction row " + std::to_string(r) + ": confidences do not sum to 1");
            for (int q = 0; q < 4; ++q)
                if (!std::isfinite(loc(r, q)))
                    throw ValidationError("prediction row " + std::to_string(r) + ": non-finite offset");
        }
    }

private:
    std::size_t rows_ = 0;
    int classes_ = 0;
    std::vector<double> data_;
};

inline std::vector<BoundingBox> anchor_corners(const DefaultBoxSet& boxes)
{
    std::vector<BoundingBox> out;
    out.reserve(boxes.size());
    for (const auto& b : boxes)
        out.push_back(b.corner());
    return out;
}

// Each anchor goes to its best-overlap GT (lowest GT index on ties) and is
// positive when that overlap reaches the threshold. With force_best_match,
// each GT of positive area also claims its single best anchor (lowest anchor
// index on ties; an anchor already claimed by a lower GT stays with it).
inline MatchResult match_boxes(std::span<const BoundingBox> anchors, std::span<const GroundTruthBox> gts,
                               int num_classes, const MatchConfig& config = {})
{
    config.validate();
    if (anchors.empty())
        throw InvalidArgument("match_boxes: empty anchor set");
    for (const auto& gt : gts)
        if (gt.class_index < 1 || gt.class_index >= num_classes)
            throw InvalidArgument("match_boxes: class index outside [1, n-1]");

    const std::size_t d = anchors.size();
    const std::size_t g = gts.size();
    std::vector<long> owner(d, -1);
    std::vector<double> best_gt_iou(d, 0.0);
    std::vector<std::size_t> best_anchor(g, 0);

    MatchResult result;
    result.num_anchors = d;
    result.num_classes = num_classes;
    result.gt_best_iou.assign(g, 0.0);

    for (std::size_t a = 0; a < d; ++a) {
        long best = -1;
        double best_iou = -1.0;
        for (std::size_t j = 0; j < g; ++j) {
            const double iou = jaccard(anchors[a], gts[j].box);
            if (iou > best_iou) {
                best_iou = iou;
                best = static_cast<long>(j);
            }
            if (iou > result.gt_best_iou[j]) {
                result.gt_best_iou[j] = iou;
                best_anchor[j] = a;
            }
        }
        if (best >= 0 && best_iou >= config.threshold) {
            owner[a] = best;
            best_gt_iou[a] = best_iou;
        }
    }

    if (config.force_best_match) {
        std::vector<bool> forced(d, false);
        for (std::size_t j = 0; j < g; ++j) {
            if (area(gts[j].box) <= 0.0 || result.gt_best_iou[j] <= 0.0)
                continue;
            const std::size_t a = best_anchor[j];
            if (forced[a])
                continue;
            forced[a] = true;
            owner[a] = static_cast<long>(j);
        }
    }

    for (std::size_t a = 0; a < d; ++a) {
        if (owner[a] >= 0) {
            const auto& gt = gts[static_cast<std::size_t>(owner[a])];
            result.positives.push_back({a, gt.class_index, gt.box, static_cast<std::size_t>(owner[a])});
        } else {
            result.negatives.push_back(a);
        }
    }
    return result;
}

inline MatchResult match_boxes(const DefaultBoxSet& anchors, std::span<const GroundTruthBox> gts, int num_classes,
                               const MatchConfig& config = {})
{
    const auto corners = anchor_corners(anchors);
    return match_boxes(std::span<const BoundingBox>(corners), gts, num_classes, config);
}

namespace detail {

inline void require_same_shape(const PredictionMatrix& pred, const MatchResult& match, const char* who)
{
    if (pred.rows() != match.num_anchors)
        throw InvalidArgument(std::string(who) + ": prediction rows do not match the anchor count");
    if (pred.num_classes() != match.num_classes)
        throw InvalidArgument(std::string(who) + ": prediction class count does not match");
}

} // namespace detail

// Negatives ordered hardest first (lowest background confidence, then lowest
// index), truncated to floor(ratio * N). Empty when N == 0.
inline std::vector<std::size_t> hard_negative_mine(const MatchResult& match, const PredictionMatrix& pred,
                                                   double neg_pos_ratio = 3.0)
{
    detail::require_same_shape(pred, match, "hard_negative_mine");
    if (!(neg_pos_ratio >= 1.0))
        throw InvalidArgument("hard_negative_mine: ratio must be >= 1");
    if (match.num_positive() == 0)
        return {};

    std::vector<std::size_t> order = match.negatives;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pred.conf(a, 0) < pred.conf(b, 0); });
    const auto quota = static_cast<std::size_t>(std::floor(neg_pos_ratio * static_cast<double>(match.num_positive())));
    order.resize(std::min(order.size(), quota));
    return order;
}

inline constexpr double kProbabilityFloor = 1e-12;

inline double smooth_l1(double x) noexcept
{
    const double ax = std::abs(x);
    return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

inline double smooth_l1_derivative(double x) noexcept
{
    if (std::abs(x) < 1.0)
        return x;
    return x > 0.0 ? 1.0 : -1.0;
}

inline double classification_loss(const PredictionMatrix& pred, const MatchResult& match,
                                  std::span<const std::size_t> mined)
{
    detail::require_same_shape(pred, match, "classification_loss");
    for (std::size_t h : mined)
        if (!std::binary_search(match.negatives.begin(), match.negatives.end(), h))
            throw InvalidArgument("classification_loss: mined index is not a negative");

    double loss = 0.0;
    for (const auto& p : match.positives)
        loss -= std::log(std::max(pred.conf(p.anchor, p.class_index), kProbabilityFloor));
    for (std::size_t h : mined)
        loss -= std::log(std::max(pred.conf(h, 0), kProbabilityFloor));
    return loss;
}

inline double localization_loss(const PredictionMatrix& pred, const MatchResult& match,
                                std::span<const BoundingBox> anchors)
{
    detail::require_same_shape(pred, match, "localization_loss");
    if (anchors.size() != match.num_anchors)
        throw InvalidArgument("localization_loss: anchor count mismatch");

    double loss = 0.0;
    for (const auto& p : match.positives) {
        const BoxOffsets t = encode_offsets(p.target, anchors[p.anchor]);
        const double target[4] = {t.dcx, t.dcy, t.dw, t.dh};
        for (int q = 0; q < 4; ++q)
            loss += smooth_l1(pred.loc(p.anchor, q) - target[q]);
    }
    return loss;
}

inline double total_loss(const PredictionMatrix& pred, const MatchResult& match, std::span<const std::size_t> mined,
                         std::span<const BoundingBox> anchors, const LossConfig& config = {})
{
    config.validate();
    const double conf = classification_loss(pred, match, mined);
    const double loc = localization_loss(pred, match, anchors);
    if (match.num_positive() == 0)
        return 0.0;
    return (conf + config.alpha * loc) / static_cast<double>(match.num_positive());
}

// d total_loss / d prediction entry, same layout as the predictions. Entries
// clamped by the probability floor have zero gradient.
inline PredictionMatrix total_loss_gradient(const PredictionMatrix& pred, const MatchResult& match,
                                            std::span<const std::size_t> mined, std::span<const BoundingBox> anchors,
                                            const LossConfig& config = {})
{
    config.validate();
    detail::require_same_shape(pred, match, "total_loss_gradient");
    PredictionMatrix grad(pred.rows(), pred.num_classes());
    if (match.num_positive() == 0)
        return grad;

    const double inv_n = 1.0 / static_cast<double>(match.num_positive());
    const auto add_log_term = [&](std::size_t row, int c) {
        const double p = pred.conf(row, c);
        if (p > kProbabilityFloor)
            grad.conf(row, c) -= inv_n / p;
    };
    for (const auto& p : match.positives) {
        add_log_term(p.anchor, p.class_index);
        const BoxOffsets t = encode_offsets(p.target, anchors[p.anchor]);
        const double target[4] = {t.dcx, t.dcy, t.dw, t.dh};
        for (int q = 0; q < 4; ++q)
            grad.loc(p.anchor, q) += config.alpha * inv_n * smooth_l1_derivative(pred.loc(p.anchor, q) - target[q]);
    }
    for (std::size_t h : mined)
        add_log_term(h, 0);
    return grad;
}

struct LossBreakdown {
    double classification = 0.0; // unnormalized
    double localization = 0.0;    // unnormalized
    double total = 0.0;           // (classification + alpha * localization) / N
    std::size_t num_positive = 0;
    std::size_t num_mined = 0;
};

// Mines negatives at the configured ratio, then evaluates all three figures.
inline LossBreakdown evaluate_loss(const PredictionMatrix& pred, const MatchResult& match,
                                   std::span<const BoundingBox> anchors, const LossConfig& loss_config = {},
                                   double neg_pos_ratio = 3.0)
{
    const auto mined = hard_negative_mine(match, pred, neg_pos_ratio);
    LossBreakdown out;
    out.classification = classification_loss(pred, match, mined);
    out.localization = localization_loss(pred, match, anchors);
    out.total = total_loss(pred, match, mined, anchors, loss_config);
    out.num_positive = match.num_positive();
    out.num_mined = mined.size();
    return out;
}

} // namespace ssdkit
