#include <random>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "gridnav/detector.hpp"

using namespace gridnav;

namespace {

NavLabel corridor(double x, double y) { return {Category::Corridor, {x, y}, std::nullopt}; }

DetectionTensor random_activated(std::mt19937_64& rng) {
    nn::Tensor4<double> logits = checks::random_tensor({1, 6, 5, 5}, rng, -3, 3);
    return activate(logits, 0);
}

}  // namespace

TEST(Encode, CellCenterLabel) {
    const Vec2 center = grid_to_robot(1, 3, 0.5, 0.5);
    const auto t = encode_targets({corridor(center.x, center.y)});
    EXPECT_EQ(t.at(1, 3).confidence, 1.0);
    EXPECT_NEAR(t.at(1, 3).x, 0.5, 1e-12);
    EXPECT_NEAR(t.at(1, 3).y, 0.5, 1e-12);
    EXPECT_EQ(t.at(1, 3).category[2], 1.0);
    EXPECT_EQ(t.object_count(), 1);
}

TEST(Encode, EmptyAndCenterCell) {
    const auto t = encode_targets({});
    for (const auto& c : t.cells) EXPECT_EQ(c.confidence, 0.0);
    // Normalized image coordinates (0.5, 0.5) = robot (0, 4).
    const auto g = grid_point({0.0, 4.0});
    EXPECT_EQ(g.row, 2);
    EXPECT_EQ(g.col, 2);
}

TEST(Encode, GridPointRoundtrip) {
    // The window's top-left corner is cell (0, 0); its right edge is outside.
    EXPECT_EQ(grid_point({-4.0, 8.0}).col, 0);
    EXPECT_EQ(grid_point({-4.0, 8.0}).row, 0);
    EXPECT_EQ(grid_point({4.0, 4.0}).col, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) {
            const auto g = grid_point(grid_to_robot(r, c, 0.25, 0.75));
            EXPECT_EQ(g.row, r);
            EXPECT_EQ(g.col, c);
            EXPECT_NEAR(g.x, 0.25, 1e-12);
            EXPECT_NEAR(g.y, 0.75, 1e-12);
        }
}

TEST(Encode, SharedCellKeepsNearerCenter) {
    const Vec2 c = grid_to_robot(2, 2, 0.5, 0.5);
    const auto t = encode_targets({corridor(c.x + 0.6, c.y), {Category::ClosedRoom, {c.x + 0.1, c.y}, std::nullopt}});
    EXPECT_EQ(t.object_count(), 1);
    EXPECT_EQ(t.at(2, 2).category[0], 1.0);
    EXPECT_THROW(encode_targets({corridor(0, 8.5)}), Error);
    EXPECT_THROW(encode_targets({corridor(4.0, 2.0)}), Error);
}

TEST(Loss, PerfectPredictionIsZero) {
    const auto t = encode_targets({corridor(1, 2), {Category::ClosedRoom, {-3, 7}, std::nullopt}});
    const auto L = detection_loss(t, t, LossWeights{});
    EXPECT_EQ(L.total, 0.0);
}

TEST(Loss, EmptyTargetMasksEverythingButConfidence) {
    std::mt19937_64 rng(1);
    DetectionTensor pred = random_activated(rng);
    for (auto& c : pred.cells) c.confidence = 0.0;
    EXPECT_EQ(detection_loss(pred, encode_targets({}), LossWeights{}).total, 0.0);
}

TEST(Loss, ScalarOracle) {
    // One object in cell (3, 1); a hand-written copy of the three terms.
    const Vec2 p = grid_to_robot(3, 1, 0.3, 0.8);
    const auto target = encode_targets({{Category::OpenRoom, p, DoorGeometry{}}});
    std::mt19937_64 rng(4);
    const DetectionTensor pred = random_activated(rng);
    double conf = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            const double tc = (i == 3 && j == 1) ? 1.0 : 0.0;
            conf += std::pow(pred.at(i, j).confidence - tc, 2);
        }
    conf /= 25.0;
    const auto& c = pred.at(3, 1);
    const double coord = (std::pow(c.x - 0.3, 2) + std::pow(c.y - 0.8, 2)) / 2.0;
    const double xent = -std::log(c.category[1]);
    const double expect = 0.61 * xent + 0.14 * coord + 0.25 * conf;
    const auto L = detection_loss(pred, target, LossWeights{});
    EXPECT_NEAR(L.total, expect, 1e-12);
    EXPECT_NEAR(L.xent, xent, 1e-12);
    EXPECT_NEAR(L.coord, coord, 1e-12);
    EXPECT_NEAR(L.conf, conf, 1e-12);
}

TEST(Loss, NonNegativeAndGradientChecked) {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 20; ++k) {
        const auto pred = random_activated(rng);
        const auto target = encode_targets(checks::random_cell_labels(rng));
        EXPECT_GE(detection_loss(pred, target, LossWeights{}).total, 0.0);
    }
    EXPECT_LE(checks::check_loss(rng, 2).max_rel_error, 1e-4);
}

TEST(Loss, WeightsValidated) {
    EXPECT_THROW((LossWeights{0.5, 0.5, 0.5}.validate()), Error);
    EXPECT_THROW((LossWeights{-0.1, 0.6, 0.5}.validate()), Error);
    EXPECT_NO_THROW(LossWeights{}.validate());
}

TEST(Decode, UnitConditional) {
    DetectionTensor t;
    t.at(0, 0).confidence = 0.8;
    t.at(0, 0).category = {0, 1, 0};
    const auto d = decode(t, Pose(), 0.5);
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].category, Category::OpenRoom);
    EXPECT_DOUBLE_EQ(d[0].probability, 0.8);
}

TEST(Decode, ZeroConfidenceEmpty) {
    DetectionTensor t;
    for (double tau : {1e-9, 0.1, 0.5, 1.0}) EXPECT_TRUE(decode(t, Pose(), tau).empty());
    EXPECT_THROW(decode(t, Pose(), 1.5), Error);
}

TEST(Decode, FinalProbabilityIsProduct) {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 50; ++k) {
        const auto pred = random_activated(rng);
        const auto dets = decode(pred, Pose(), 0.0);
        ASSERT_EQ(dets.size(), 25u);
        for (const auto& d : dets) {
            const auto& c = pred.at(d.row, d.col);
            for (int q = 0; q < 3; ++q)
                EXPECT_NEAR(d.class_probability[static_cast<std::size_t>(q)], c.confidence * c.category[static_cast<std::size_t>(q)], 1e-12);
            EXPECT_NEAR(d.probability, c.confidence * c.category[static_cast<std::size_t>(index_of(d.category))], 1e-12);
        }
    }
}

TEST(Decode, MonotoneInConfidence) {
    DetectionTensor t;
    t.at(2, 2).category = {0.2, 0.5, 0.3};
    double last = -1;
    for (double c = 0; c <= 1.0; c += 0.05) {
        t.at(2, 2).confidence = c;
        const double p = decode(t, Pose(), 0.0)[12].probability;
        EXPECT_GE(p, last);
        last = p;
    }
}

TEST(Decode, RoundtripWithinHalfPixel) {
    const auto r = checks::encode_decode_roundtrip(100, 9);
    EXPECT_EQ(r.category_errors, 0);
    EXPECT_EQ(r.count_errors, 0);
    EXPECT_LE(r.max_position_error_px, 0.5);
}

TEST(Decode, EmptyCellContentIsInert) {
    std::mt19937_64 rng(8);
    const auto labels = checks::random_cell_labels(rng);
    DetectionTensor t = encode_targets(labels);
    const auto a = decode(t, Pose(1, 2, 0.3), 0.5);
    for (auto& c : t.cells)
        if (c.confidence == 0.0) c.category = {0.9, 0.05, 0.05}, c.x = 0.1, c.y = 0.9;
    const auto b = decode(t, Pose(1, 2, 0.3), 0.5);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].position, b[i].position);
}

TEST(Decode, WorldPositionUsesAnchor) {
    const Pose anchor(10, -3, kPi);
    const auto d = decode(encode_targets({corridor(1.0, 2.0)}), anchor, 0.5);
    ASSERT_EQ(d.size(), 1u);
    const Vec2 w = robot_to_world(anchor, {1.0, 2.0});
    EXPECT_NEAR(d[0].position.x, w.x, 1e-9);
    EXPECT_NEAR(d[0].position.y, w.y, 1e-9);
    const auto j = detection_to_json(d[0], 1.5);
    EXPECT_EQ(j.at("category"), "corridor");
    EXPECT_EQ(j.at("t"), 1.5);
}

TEST(Activate, HeadActivations) {
    nn::Tensor4<double> logits(1, 6, 5, 5);
    logits(0, 0, 1, 1) = 100.0;
    logits(0, 3, 1, 1) = 2.0;
    const auto d = activate(logits);
    EXPECT_NEAR(d.at(1, 1).confidence, 1.0, 1e-12);
    EXPECT_NEAR(d.at(0, 0).confidence, 0.5, 1e-12);
    EXPECT_NEAR(d.at(1, 1).category[0] + d.at(1, 1).category[1] + d.at(1, 1).category[2], 1.0, 1e-12);
    EXPECT_GT(d.at(1, 1).category[0], d.at(1, 1).category[1]);
    EXPECT_THROW(activate(nn::Tensor4<double>(1, 5, 5, 5)), Error);
}
