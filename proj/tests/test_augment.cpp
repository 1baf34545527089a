#include <random>
#include <set>

#include <gtest/gtest.h>

#include "checks.hpp"
#include "gridnav/augment.hpp"
#include "gridnav/scansim.hpp"

using namespace gridnav;

namespace {

Sample random_sample(std::mt19937_64& rng, int px = 244) {
    Sample s;
    s.laser16 = make_local_map(2 * px, kStoredExtent, Pose(1, 2, 0.3), kUnknownPixel);
    s.gmap16 = s.laser16;
    std::uniform_int_distribution<int> v(0, 2);
    const std::uint8_t vals[3] = {kFreePixel, kOccupiedPixel, kUnknownPixel};
    for (auto& p : s.laser16.image.pixels) p = vals[v(rng)];
    for (auto& p : s.gmap16.image.pixels) p = vals[v(rng)];
    s.labels = {{Category::Corridor, {0.5, 3.0}, std::nullopt},
                {Category::OpenRoom, {-2.0, 6.0}, DoorGeometry{{-2.45, 6.0}, 0.9, 0.0}},
                {Category::ClosedRoom, {3.0, 9.0}, std::nullopt}};  // context label outside the window
    return s;
}

}  // namespace

TEST(Transform, IdentityIsNetworkView) {
    std::mt19937_64 rng(1);
    const Sample s = random_sample(rng);
    const ViewSample v = transform_sample(s, AugmentParams{}, 244);
    EXPECT_EQ(v.laser.image, network_view(s.laser16).image);
    EXPECT_EQ(v.gmap.image, network_view(s.gmap16).image);
    ASSERT_EQ(v.labels.size(), 2u);
    EXPECT_EQ(v.labels[0], s.labels[0]);
    EXPECT_EQ(v.labels[1], s.labels[1]);
}

TEST(Transform, CompositionOrder) {
    // Translate, then rotate, then resize, about the window center.
    const AugmentParams t{deg2rad(-30), {1.6, 1.6}, 1.2};
    const Vec2 c{0, 4};
    for (Vec2 p : {Vec2{0.5, 3.0}, Vec2{-2, 6}, Vec2{1, 1}}) {
        const Vec2 a = p + t.translation;
        const double cs = std::cos(t.rotation), sn = std::sin(t.rotation);
        const Vec2 b = c + Vec2{cs * (a.x - c.x) - sn * (a.y - c.y), sn * (a.x - c.x) + cs * (a.y - c.y)};
        const Vec2 expect = c + 1.2 * (b - c);
        const Vec2 got = apply_transform(t, p);
        EXPECT_NEAR(got.x, expect.x, 1e-12);
        EXPECT_NEAR(got.y, expect.y, 1e-12);
        const Vec2 back = invert_transform(t, got);
        EXPECT_NEAR(back.x, p.x, 1e-12);
        EXPECT_NEAR(back.y, p.y, 1e-12);
    }
}

TEST(Transform, MarkerPixelOracle) {
    const auto r = checks::augmentation_consistency(60, 3, 124);
    EXPECT_GT(r.markers, 40);
    EXPECT_LE(r.max_marker_error_px, 1.0);
    EXPECT_EQ(r.encode_mismatches, 0);
    EXPECT_LE(r.max_encode_error_cells, 0.5);
}

TEST(Transform, SameTransformOnBothImages) {
    std::mt19937_64 rng(2);
    Sample s = random_sample(rng, 124);
    s.gmap16 = s.laser16;
    const ViewSample v = random_augment(s, AugmentPolicy{}, rng, 124);
    EXPECT_EQ(v.laser.image, v.gmap.image);
}

TEST(Transform, DoorGeometryFollows) {
    const AugmentParams t{0.4, {0.3, -0.2}, 1.1};
    std::mt19937_64 rng(5);
    Sample s = random_sample(rng, 124);
    const ViewSample v = transform_sample(s, t, 124);
    const auto it = std::find_if(v.labels.begin(), v.labels.end(), [](const NavLabel& l) { return l.door.has_value(); });
    ASSERT_NE(it, v.labels.end());
    EXPECT_NEAR(it->door->width, 0.9 * 1.1, 1e-12);
    EXPECT_NEAR(it->door->frame_angle, 0.4, 1e-12);
    const Vec2 h = apply_transform(t, s.labels[1].door->hinge);
    EXPECT_NEAR(it->door->hinge.x, h.x, 1e-12);
}

TEST(Transform, LabelsLeavingWindowDropped) {
    std::mt19937_64 rng(5);
    Sample s = random_sample(rng, 124);
    const ViewSample v = transform_sample(s, AugmentParams{0, {3.8, 0}, 1.0}, 124);
    for (const auto& l : v.labels) EXPECT_TRUE(in_network_window(l.position));
    EXPECT_EQ(std::count_if(v.labels.begin(), v.labels.end(), [](const NavLabel& l) { return l.category == Category::Corridor; }), 0);
}

TEST(Transform, OutOfRangeRejected) {
    std::mt19937_64 rng(5);
    const Sample s = random_sample(rng, 124);
    EXPECT_THROW(transform_sample(s, AugmentParams{0, {0, 0}, 0.4}, 124), Error);
    EXPECT_THROW(transform_sample(s, AugmentParams{0, {0, 0}, -1.0}, 124), Error);
}

TEST(Policy, DefaultRangesAlwaysFit) {
    const AugmentPolicy p;
    const LocalMap stored = make_local_map(32, kStoredExtent, Pose());
    for (double r : {p.rotation_range.first, p.rotation_range.second})
        for (double tx : {p.translation_range.first, p.translation_range.second})
            for (double ty : {p.translation_range.first, p.translation_range.second})
                for (double sc : {p.scale_range.first, p.scale_range.second})
                    EXPECT_TRUE(transform_fits(AugmentParams{r, {tx, ty}, sc}, stored));
}

TEST(Policy, ZeroWidthIsIdentity) {
    std::mt19937_64 rng(0);
    const AugmentPolicy none = AugmentPolicy::none();
    for (int i = 0; i < 50; ++i) EXPECT_EQ(draw_augment_params(none, rng), AugmentParams{});
}

TEST(Policy, SeededDeterminism) {
    std::mt19937_64 ra(11), rb(11), rs(1);
    const Sample s = random_sample(rs, 124);
    const ViewSample a = random_augment(s, AugmentPolicy{}, ra, 124);
    const ViewSample b = random_augment(s, AugmentPolicy{}, rb, 124);
    EXPECT_EQ(a.laser.image, b.laser.image);
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Policy, RotationDrawsAreUniform) {
    AugmentPolicy p;
    p.p_rotate = 1.0;
    std::mt19937_64 rng(7);
    const int n = 10000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += draw_augment_params(p, rng).rotation;
    const double width = p.rotation_range.second - p.rotation_range.first;
    const double sigma = width / std::sqrt(12.0) / std::sqrt(static_cast<double>(n));
    EXPECT_LE(std::abs(sum / n - 0.5 * (p.rotation_range.first + p.rotation_range.second)), 3 * sigma);
}

TEST(Policy, JsonRoundtripAndValidation) {
    AugmentPolicy p;
    p.rotation_range = {-0.1, 0.2};
    p.p_scale = 0.25;
    const AugmentPolicy q = policy_from_json(policy_to_json(p));
    EXPECT_EQ(q.rotation_range, p.rotation_range);
    EXPECT_EQ(q.p_scale, 0.25);
    EXPECT_THROW(policy_from_json(nlohmann::json::parse(R"({"scale_range": [0.0, 1.0]})")), Error);
    EXPECT_THROW(policy_from_json(nlohmann::json::parse(R"({"p_rotate": 1.5})")), Error);
    EXPECT_THROW(policy_from_json(nlohmann::json::parse(R"({"rotation_range_rad": "wide"})")), Error);
}

namespace {

WorldMap door_world() {
    WorldMap w{OccupancyGrid(80, 80, 0.05, {0, 0}, CellState::Free), {}, "d"};
    // Horizontal wall with a doorway from x = 1.0 to 1.9 at y = 2.0.
    for (int c = 0; c < 80; ++c) {
        const double x = w.grid.cell_to_world(c, 0).x;
        if (x < 1.0 || x > 1.9) w.grid.set_state(c, w.grid.world_to_cell({x, 2.0}).row, CellState::Occupied);
    }
    w.labels.push_back({Category::OpenRoom, {1.45, 2.0}, DoorGeometry{{1.0, 2.0}, 0.9, 0.0}});
    return w;
}

}  // namespace

TEST(Door, PerpendicularPanelLeavesGap) {
    const WorldMap w = door_world();
    const WorldMap d = synthesize_door(w, w.labels[0], deg2rad(90));
    // A ray along the doorway's normal, offset from the hinge, passes.
    const double r = trace_ray(d.grid, {1.6, 1.0}, {0, 1}, 3.0);
    EXPECT_TRUE(std::isinf(r) || r > 2.0);
    // The panel itself stands along the hinge normal.
    const auto c = d.grid.world_to_cell({1.0, 2.5});
    EXPECT_EQ(d.grid.state(c.col, c.row), CellState::Occupied);
}

TEST(Door, DifferentAnglesDiffer) {
    const WorldMap w = door_world();
    const auto a = door_panel_cells(w.grid, *w.labels[0].door, deg2rad(30));
    const auto b = door_panel_cells(w.grid, *w.labels[0].door, deg2rad(100));
    EXPECT_NE(std::set(a.begin(), a.end()), std::set(b.begin(), b.end()));
}

TEST(Door, PanelCellCount) {
    const WorldMap w = door_world();
    const auto& door = *w.labels[0].door;
    EXPECT_NEAR(static_cast<double>(door_panel_cells(w.grid, door, deg2rad(90)).size()), door.width / 0.05, 2.0);
    for (double deg : {30.0, 45.0, 60.0, 100.0}) {
        const double a = deg2rad(deg);
        const double chebyshev = std::max(std::abs(std::cos(a)), std::abs(std::sin(a))) * door.width / 0.05;
        EXPECT_NEAR(static_cast<double>(door_panel_cells(w.grid, door, a).size()), chebyshev, 2.0) << deg;
    }
}

TEST(Door, OnlyPanelCellsChange) {
    const WorldMap w = door_world();
    const double a = deg2rad(60);
    const WorldMap d = synthesize_door(w, w.labels[0], a);
    const auto cells = door_panel_cells(w.grid, *w.labels[0].door, a);
    const std::set<std::pair<int, int>> panel(cells.begin(), cells.end());
    for (int r = 0; r < 80; ++r)
        for (int c = 0; c < 80; ++c)
            if (!panel.contains({c, r})) {
                ASSERT_EQ(d.grid.state(c, r), w.grid.state(c, r));
            }
    // Redrawing at a new angle clears the old panel.
    const WorldMap e = synthesize_door(d, w.labels[0], deg2rad(95), a);
    const auto old_tip = d.grid.world_to_cell(Vec2{1.0, 2.0} + 0.85 * Vec2{std::cos(a), std::sin(a)});
    EXPECT_EQ(e.grid.state(old_tip.col, old_tip.row), CellState::Free);
    NavLabel closed{Category::ClosedRoom, {1, 1}, std::nullopt};
    EXPECT_THROW(synthesize_door(w, closed, 1.0), Error);
}

TEST(LabelFrames, RobotFrameDoor) {
    const Pose p(2, 3, kPi / 2);
    const NavLabel l{Category::OpenRoom, {2, 5}, DoorGeometry{{2.45, 5}, 0.9, kPi}};
    const NavLabel r = label_to_robot(p, l);
    EXPECT_NEAR(r.position.x, 0, 1e-12);
    EXPECT_NEAR(r.position.y, 2, 1e-12);
    // World -x is robot -x when facing +y.
    EXPECT_NEAR(std::cos(r.door->frame_angle), -1, 1e-12);
}
