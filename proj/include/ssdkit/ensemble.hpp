#pragma once

/**
 * @file ssdkit/ensemble.hpp
 * @brief Bootstrap bags for bagged detectors and plurality-vote fusion of
 *        their detections.
 *
 * Randomness: std::mt19937_64 (its output sequence is fixed by the standard)
 * with our own unbiased bounded draw, so manifests are identical across
 * standard libraries. Bag i is drawn from a generator seeded with
 *
 *   seed_i = splitmix64(base_seed + (i + 1) * 0x9E3779B97F4A7C15)
 *
 * Fusion pools every member's detections for an image, visits them by score
 * (descending, stable), and attaches each to the first existing cluster whose
 * representative (its first, highest-scoring box) overlaps it by at least the
 * IoU threshold and that has no detection from the same member yet. A
 * cluster's label is the plurality vote of its members, its box the
 * score-weighted mean corner box, its score sum(scores) / K.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssdkit/errors.hpp"
#include "ssdkit/geometry.hpp"
#include "ssdkit/records.hpp"

namespace ssdkit {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += kGoldenGamma;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_bag_seed(std::uint64_t base_seed, std::uint64_t bag_index) noexcept
{
    return splitmix64(base_seed + (bag_index + 1) * kGoldenGamma);
}

// Uniform integer in [0, n), rejection sampled.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n)
{
    if (n == 0)
        throw InvalidArgument("uniform_index: empty range");
    const std::uint64_t reject_below = (0 - n) % n; // 2^64 mod n
    std::uint64_t x = rng();
    while (x < reject_below)
        x = rng();
    return x % n;
}

struct TrainTestSplit {
    std::vector<std::string> train; // original order
    std::vector<std::string> test;  // original order
};

// Seeded shuffle; the first round(fraction * N) shuffled ids form the test
// set, clamped so both sides are non-empty.
inline TrainTestSplit split_train_test(std::span<const std::string> ids, double test_fraction, std::uint64_t seed)
{
    if (ids.size() < 2)
        throw InvalidArgument("split_train_test: need at least 2 items");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw InvalidArgument("split_train_test: fraction must lie in (0,1)");

    const std::size_t n = ids.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(order[i], order[uniform_index(rng, i + 1)]);

    auto test_size = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    test_size = std::clamp<std::size_t>(test_size, 1, n - 1);

    std::vector<bool> is_test(n, false);
    for (std::size_t i = 0; i < test_size; ++i)
        is_test[order[i]] = true;

    TrainTestSplit split;
    for (std::size_t i = 0; i < n; ++i)
        (is_test[i] ? split.test : split.train).push_back(ids[i]);
    return split;
}

struct BagManifest {
    std::size_t index = 0;
    std::uint64_t base_seed = 0;
    std::vector<std::string> ids; // N draws with replacement

    friend bool operator==(const BagManifest&, const BagManifest&) = default;
};

inline BagManifest make_bag(std::span<const std::string> train_ids, std::size_t index, std::uint64_t base_seed)
{
    if (train_ids.empty())
        throw InvalidArgument("make_bag: empty training set");
    std::mt19937_64 rng(derive_bag_seed(base_seed, index));
    BagManifest bag{index, base_seed, {}};
    bag.ids.reserve(train_ids.size());
    for (std::size_t draw = 0; draw < train_ids.size(); ++draw)
        bag.ids.push_back(train_ids[uniform_index(rng, train_ids.size())]);
    return bag;
}

inline std::vector<BagManifest> make_bags(std::span<const std::string> train_ids, int k, std::uint64_t base_seed)
{
    if (k <= 0)
        throw InvalidArgument("make_bags: bag count must be positive");
    if (train_ids.empty())
        throw InvalidArgument("make_bags: empty training set");
    std::vector<BagManifest> bags;
    bags.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        bags.push_back(make_bag(train_ids, static_cast<std::size_t>(i), base_seed));
    return bags;
}

// Most frequent label. Ties: higher mean score, then smaller label.
template <class Label>
Label plurality_vote(std::span<const Label> labels, std::span<const double> scores)
{
    if (labels.empty())
        throw InvalidArgument("plurality_vote: no votes");
    if (labels.size() != scores.size())
        throw InvalidArgument("plurality_vote: labels and scores differ in length");

    struct Tally {
        std::size_t votes = 0;
        double score_sum = 0.0;
    };
    std::map<Label, Tally> tally;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto& t = tally[labels[i]];
        ++t.votes;
        t.score_sum += scores[i];
    }

    auto best = tally.begin();
    for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
        const auto& [votes, sum] = it->second;
        const auto& [best_votes, best_sum] = best->second;
        if (votes > best_votes) {
            best = it;
        } else if (votes == best_votes) {
            // Equal vote counts, so the larger sum has the larger mean.
            if (sum > best_sum)
                best = it;
        }
    }
    return best->first;
}

template <class Label>
Label plurality_vote(const std::vector<Label>& labels, const std::vector<double>& scores)
{
    return plurality_vote(std::span<const Label>(labels), std::span<const double>(scores));
}

using DetectionsByImage = std::map<std::string, std::vector<Detection>>;

// Groups detections by image. Images listed in `covered` appear even when
// they have no detections.
inline DetectionsByImage group_by_image(std::span<const Detection> detections,
                                        std::span<const std::string> covered = {})
{
    DetectionsByImage out;
    for (const auto& id : covered)
        out[id];
    for (const auto& det : detections)
        out[det.image_id].push_back(det);
    return out;
}

struct FusionConfig {
    double iou_threshold = 0.5;
    std::size_t min_votes = 1;
};

struct FusedDetection {
    Detection detection; // score = sum of member scores / K
    std::size_t votes = 0;
};

using FusedDetectionSet = std::map<std::string, std::vector<FusedDetection>>;

namespace detail {

struct PooledDetection {
    const Detection* det;
    std::size_t member;
};

inline FusedDetection summarize_cluster(const std::vector<PooledDetection>& cluster, std::size_t k)
{
    std::vector<std::string> labels;
    std::vector<double> scores;
    double weight = 0.0;
    for (const auto& p : cluster) {
        labels.push_back(p.det->label);
        scores.push_back(p.det->score);
        weight += p.det->score;
    }

    // Weighted mean written as an offset from the representative so that
    // identical member boxes reproduce it exactly.
    const PixelBox& rep = cluster.front().det->box;
    double c[4] = {rep.xmin(), rep.ymin(), rep.xmax(), rep.ymax()};
    if (cluster.size() > 1) {
        double delta[4] = {0.0, 0.0, 0.0, 0.0};
        for (const auto& p : cluster) {
            const double w = weight > 0.0 ? p.det->score / weight : 1.0 / static_cast<double>(cluster.size());
            delta[0] += w * (p.det->box.xmin() - rep.xmin());
            delta[1] += w * (p.det->box.ymin() - rep.ymin());
            delta[2] += w * (p.det->box.xmax() - rep.xmax());
            delta[3] += w * (p.det->box.ymax() - rep.ymax());
        }
        for (int q = 0; q < 4; ++q)
            c[q] += delta[q];
        c[2] = std::max(c[2], c[0]);
        c[3] = std::max(c[3], c[1]);
    }

    FusedDetection out;
    out.detection.image_id = cluster.front().det->image_id;
    out.detection.label = plurality_vote(labels, scores);
    out.detection.score = std::clamp(weight / static_cast<double>(k), 0.0, 1.0);
    out.detection.box = PixelBox(c[0], c[1], c[2], c[3]);
    out.votes = cluster.size();
    return out;
}

} // namespace detail

inline std::vector<FusedDetection> fuse_image(std::span<const std::vector<Detection>* const> members,
                                              const FusionConfig& config)
{
    const std::size_t k = members.size();
    std::vector<detail::PooledDetection> pool;
    for (std::size_t m = 0; m < k; ++m)
        for (const auto& det : *members[m])
            pool.push_back({&det, m});
    std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.det->score > b.det->score; });

    std::vector<std::vector<detail::PooledDetection>> clusters;
    for (const auto& p : pool) {
        bool placed = false;
        for (auto& cluster : clusters) {
            const bool member_present = std::any_of(cluster.begin(), cluster.end(),
                                                    [&](const auto& q) { return q.member == p.member; });
            if (member_present || jaccard(cluster.front().det->box, p.det->box) < config.iou_threshold)
                continue;
            cluster.push_back(p);
            placed = true;
            break;
        }
        if (!placed)
            clusters.push_back({p});
    }

    std::vector<FusedDetection> out;
    for (const auto& cluster : clusters)
        if (cluster.size() >= config.min_votes)
            out.push_back(detail::summarize_cluster(cluster, k));
    return out;
}

// All members must cover the same set of image ids.
inline FusedDetectionSet fuse_detections(std::span<const DetectionsByImage> members, const FusionConfig& config = {})
{
    if (members.empty())
        throw InvalidArgument("fuse_detections: need at least one member");
    if (!(config.iou_threshold > 0.0 && config.iou_threshold < 1.0))
        throw InvalidArgument("fuse_detections: IoU threshold must lie in (0,1)");
    if (config.min_votes < 1 || config.min_votes > members.size())
        throw InvalidArgument("fuse_detections: min votes must lie in [1, K]");

    for (std::size_t m = 1; m < members.size(); ++m) {
        const bool same = members[m].size() == members[0].size() &&
                          std::equal(members[m].begin(), members[m].end(), members[0].begin(),
                                     [](const auto& a, const auto& b) { return a.first == b.first; });
        if (!same)
            throw InvalidArgument("fuse_detections: member " + std::to_string(m) +
                                  " covers a different set of images than member 0");
    }

    FusedDetectionSet fused;
    std::vector<const std::vector<Detection>*> per_member(members.size());
    for (const auto& entry : members[0]) {
        for (std::size_t m = 0; m < members.size(); ++m)
            per_member[m] = &members[m].at(entry.first);
        fused[entry.first] = fuse_image(per_member, config);
    }
    return fused;
}

inline FusedDetectionSet fuse_detections(const std::vector<DetectionsByImage>& members, const FusionConfig& config = {})
{
    return fuse_detections(std::span<const DetectionsByImage>(members), config);
}

} // namespace ssdkit
