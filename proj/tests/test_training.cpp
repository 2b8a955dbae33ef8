#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "ssdkit/training.hpp"

using namespace ssdkit;

namespace {

MatchResult with_positives(std::size_t d, std::size_t positives, int classes = 2)
{
    MatchResult m;
    m.num_anchors = d;
    m.num_classes = classes;
    for (std::size_t a = 0; a < d; ++a) {
        if (a < positives)
            m.positives.push_back({a, 1, BoundingBox(0.1, 0.1, 0.3, 0.3), 0});
        else
            m.negatives.push_back(a);
    }
    return m;
}

PredictionMatrix uniform_predictions(std::size_t rows, int classes)
{
    PredictionMatrix p(rows, classes);
    for (std::size_t r = 0; r < rows; ++r)
        for (int c = 0; c < classes; ++c)
            p.conf(r, c) = 1.0 / classes;
    return p;
}

} // namespace

TEST(Match, IdenticalAnchorAndGt)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0.1, 0.1, 0.4, 0.4)};
    const std::vector<GroundTruthBox> gts{{BoundingBox(0.1, 0.1, 0.4, 0.4), 2}};
    const auto m = match_boxes(anchors, gts, 3);
    ASSERT_EQ(m.num_positive(), 1u);
    EXPECT_EQ(m.positives[0].anchor, 0u);
    EXPECT_EQ(m.positives[0].class_index, 2);
    EXPECT_EQ(m.positives[0].target, gts[0].box);
    EXPECT_TRUE(m.negatives.empty());
}

TEST(Match, DisjointAnchorIsNegative)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0.6, 0.6, 0.9, 0.9)};
    const std::vector<GroundTruthBox> gts{{BoundingBox(0.1, 0.1, 0.4, 0.4), 1}};
    const auto m = match_boxes(anchors, gts, 2);
    EXPECT_EQ(m.num_positive(), 0u);
    EXPECT_EQ(m.negatives, std::vector<std::size_t>{0});
}

TEST(Match, OneSeventhBelowThreshold)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0, 0, 0.2, 0.2)};
    const std::vector<GroundTruthBox> gts{{BoundingBox(0.1, 0.1, 0.3, 0.3), 1}};
    const auto m = match_boxes(anchors, gts, 2);
    EXPECT_EQ(m.negatives, std::vector<std::size_t>{0});
    EXPECT_NEAR(m.gt_best_iou[0], 1.0 / 7.0, 1e-12);
}

TEST(Match, ForceBestClaimsBestAnchor)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0, 0, 0.2, 0.2), BoundingBox(0.5, 0.5, 0.9, 0.9)};
    const std::vector<GroundTruthBox> gts{{BoundingBox(0.1, 0.1, 0.3, 0.3), 1}};
    MatchConfig cfg;
    cfg.force_best_match = true;
    const auto m = match_boxes(anchors, gts, 2, cfg);
    ASSERT_EQ(m.num_positive(), 1u);
    EXPECT_EQ(m.positives[0].anchor, 0u);
    EXPECT_EQ(m.negatives, std::vector<std::size_t>{1});
}

TEST(Match, TieGoesToLowestGt)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0.2, 0.2, 0.6, 0.6)};
    const std::vector<GroundTruthBox> gts{{BoundingBox(0.2, 0.2, 0.6, 0.6), 1}, {BoundingBox(0.2, 0.2, 0.6, 0.6), 2}};
    const auto m = match_boxes(anchors, gts, 3);
    ASSERT_EQ(m.num_positive(), 1u);
    EXPECT_EQ(m.positives[0].gt, 0u);
    EXPECT_EQ(m.positives[0].class_index, 1);
}

TEST(Match, ZeroGtsAllNegative)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0, 0, .5, .5), BoundingBox(.5, .5, 1, 1)};
    const auto m = match_boxes(anchors, {}, 2);
    EXPECT_EQ(m.num_positive(), 0u);
    EXPECT_EQ(m.negatives.size(), 2u);
}

TEST(Match, Errors)
{
    const std::vector<BoundingBox> none, one{BoundingBox(0, 0, .5, .5)};
    EXPECT_THROW(match_boxes(none, {}, 2), InvalidArgument);
    const std::vector<GroundTruthBox> bad_class{{BoundingBox(0, 0, .5, .5), 0}};
    EXPECT_THROW(match_boxes(one, bad_class, 2), InvalidArgument);
    MatchConfig cfg;
    cfg.threshold = 1.5;
    EXPECT_THROW(match_boxes(one, {}, 2, cfg), InvalidArgument);
}

TEST(Match, PartitionAndMonotoneThreshold)
{
    std::mt19937_64 rng(21);
    for (int t = 0; t < 200; ++t) {
        const auto inst = testkit::random_match_instance(rng);
        std::size_t prev = inst.anchors.size() + 1;
        for (double tau : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            MatchConfig cfg;
            cfg.threshold = tau;
            const auto m = match_boxes(inst.anchors, inst.gts, inst.num_classes, cfg);
            std::vector<std::size_t> all = m.negatives;
            for (const auto& p : m.positives)
                all.push_back(p.anchor);
            std::sort(all.begin(), all.end());
            ASSERT_EQ(all.size(), inst.anchors.size());
            for (std::size_t a = 0; a < all.size(); ++a)
                ASSERT_EQ(all[a], a);
            EXPECT_LE(m.num_positive(), prev);
            prev = m.num_positive();
        }
    }
}

TEST(Mine, ThreeToOne)
{
    const auto m = with_positives(12, 2);
    const auto p = uniform_predictions(12, 2);
    EXPECT_EQ(hard_negative_mine(m, p).size(), 6u);
}

TEST(Mine, FewerNegativesThanQuota)
{
    const auto m = with_positives(6, 2);
    EXPECT_EQ(hard_negative_mine(m, uniform_predictions(6, 2)).size(), 4u);
}

TEST(Mine, OrderedByBackgroundConfidence)
{
    const auto m = with_positives(4, 1);
    PredictionMatrix p(4, 2);
    const double bg[] = {0.5, 0.9, 0.1, 0.5};
    for (std::size_t r = 0; r < 4; ++r) {
        p.conf(r, 0) = bg[r];
        p.conf(r, 1) = 1.0 - bg[r];
    }
    EXPECT_EQ(hard_negative_mine(m, p), (std::vector<std::size_t>{2, 3, 1}));
}

TEST(Mine, NoPositivesMeansNothingMined)
{
    const auto m = with_positives(5, 0);
    EXPECT_TRUE(hard_negative_mine(m, uniform_predictions(5, 2)).empty());
}

TEST(Mine, ShapeMismatch)
{
    const auto m = with_positives(5, 1);
    EXPECT_THROW(hard_negative_mine(m, uniform_predictions(4, 2)), InvalidArgument);
    EXPECT_THROW(hard_negative_mine(m, uniform_predictions(5, 3)), InvalidArgument);
}

TEST(SmoothL1, Values)
{
    EXPECT_EQ(smooth_l1(0.0), 0.0);
    EXPECT_EQ(smooth_l1(1.0), 0.5);
    EXPECT_EQ(smooth_l1(2.0), 1.5);
    EXPECT_EQ(smooth_l1(-0.5), 0.125);
    EXPECT_NEAR(smooth_l1(1.0 - 1e-9), smooth_l1(1.0), 2e-9);
    EXPECT_NEAR(smooth_l1(1.0 + 1e-9), smooth_l1(1.0), 2e-9);
    EXPECT_EQ(smooth_l1_derivative(0.5), 0.5);
    EXPECT_EQ(smooth_l1_derivative(-3.0), -1.0);
}

TEST(ClassificationLoss, SinglePositive)
{
    const auto m = with_positives(1, 1);
    PredictionMatrix p(1, 2);
    p.conf(0, 0) = 0.3;
    p.conf(0, 1) = 0.7;
    EXPECT_NEAR(classification_loss(p, m, {}), -std::log(0.7), 1e-12);
}

TEST(ClassificationLoss, TwoUniformPositives)
{
    const auto m = with_positives(2, 2, 4);
    EXPECT_NEAR(classification_loss(uniform_predictions(2, 4), m, {}), 2.0 * std::log(4.0), 1e-12);
}

TEST(ClassificationLoss, RejectsMinedPositive)
{
    const auto m = with_positives(3, 1);
    const std::vector<std::size_t> mined{0};
    EXPECT_THROW(classification_loss(uniform_predictions(3, 2), m, mined), InvalidArgument);
}

TEST(LocalizationLoss, OffByOneAndTwo)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0.1, 0.1, 0.3, 0.3)};
    const auto m = with_positives(1, 1);
    PredictionMatrix p(1, 2);
    EXPECT_EQ(localization_loss(p, m, anchors), 0.0);
    p.loc(0, 2) = 1.0;
    EXPECT_DOUBLE_EQ(localization_loss(p, m, anchors), 0.5);
    for (int q = 0; q < 4; ++q)
        p.loc(0, q) = 2.0;
    EXPECT_DOUBLE_EQ(localization_loss(p, m, anchors), 6.0);
}

TEST(TotalLoss, PerfectIsZero)
{
    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
        auto inst = testkit::random_loss_instance(rng);
        for (std::size_t r = 0; r < inst.pred.rows(); ++r)
            for (int c = 0; c < inst.pred.num_classes(); ++c)
                inst.pred.conf(r, c) = 0.0;
        for (const auto& pos : inst.match.positives) {
            inst.pred.conf(pos.anchor, pos.class_index) = 1.0;
            const auto o = encode_offsets(pos.target, inst.anchors[pos.anchor]);
            inst.pred.loc(pos.anchor, 0) = o.dcx;
            inst.pred.loc(pos.anchor, 1) = o.dcy;
            inst.pred.loc(pos.anchor, 2) = o.dw;
            inst.pred.loc(pos.anchor, 3) = o.dh;
        }
        for (std::size_t h : inst.match.negatives)
            inst.pred.conf(h, 0) = 1.0;
        EXPECT_EQ(total_loss(inst.pred, inst.match, inst.mined, inst.anchors, inst.config), 0.0);
    }
}

TEST(TotalLoss, Composition)
{
    const std::vector<BoundingBox> anchors{BoundingBox(0.1, 0.1, 0.3, 0.3), BoundingBox(0.1, 0.1, 0.3, 0.3)};
    const auto m = with_positives(2, 2, 4);
    auto p = uniform_predictions(2, 4);
    p.loc(0, 0) = 1.0;
    p.loc(1, 1) = -1.0;
    LossConfig cfg;
    cfg.alpha = 0.5;
    EXPECT_NEAR(total_loss(p, m, {}, anchors, cfg), (2.0 * std::log(4.0) + 0.5) / 2.0, 1e-12);
}

TEST(TotalLoss, NoPositivesIsZero)
{
    const std::vector<BoundingBox> anchors(3, BoundingBox(0, 0, .5, .5));
    EXPECT_EQ(total_loss(uniform_predictions(3, 2), with_positives(3, 0), {}, anchors), 0.0);
}

TEST(TotalLoss, NonNegative)
{
    std::mt19937_64 rng(32);
    for (int t = 0; t < 50; ++t) {
        const auto inst = testkit::random_loss_instance(rng);
        EXPECT_GE(total_loss(inst.pred, inst.match, inst.mined, inst.anchors, inst.config), 0.0);
    }
}

TEST(TotalLoss, GradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(33);
    for (int t = 0; t < 10; ++t) {
        const auto inst = testkit::random_loss_instance(rng);
        const auto f = [&](const PredictionMatrix& p) {
            return total_loss(p, inst.match, inst.mined, inst.anchors, inst.config);
        };
        const auto numeric = testkit::central_differences(f, inst.pred, 1e-6);
        const auto analytic = total_loss_gradient(inst.pred, inst.match, inst.mined, inst.anchors, inst.config);
        for (std::size_t i = 0; i < numeric.size(); ++i)
            EXPECT_TRUE(testkit::relatively_close(analytic.values()[i], numeric[i], 1e-5, 1e-7))
                << "entry " << i << ": " << analytic.values()[i] << " vs " << numeric[i];
    }
}

TEST(EvaluateLoss, MinesInternally)
{
    std::mt19937_64 rng(34);
    const auto inst = testkit::random_loss_instance(rng);
    const auto out = evaluate_loss(inst.pred, inst.match, inst.anchors, inst.config, 3.0);
    EXPECT_EQ(out.num_mined, inst.mined.size());
    EXPECT_DOUBLE_EQ(out.total, total_loss(inst.pred, inst.match, inst.mined, inst.anchors, inst.config));
}

TEST(Predictions, ValidateProbabilities)
{
    auto p = uniform_predictions(2, 3);
    EXPECT_NO_THROW(p.validate_probabilities());
    p.conf(1, 2) = 0.9;
    EXPECT_THROW(p.validate_probabilities(), ValidationError);
}
