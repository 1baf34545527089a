#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"
#include "gridnav/gridworld.hpp"
#include "gridnav/mapper.hpp"

namespace gridnav {

/// Robot-frame membership in the network window: x in [-4, 4), y in (0, 8].
inline bool in_network_window(Vec2 p) {
    return p.x >= -kWindowExtent / 2.0 && p.x < kWindowExtent / 2.0 && p.y > 0.0 && p.y <= kWindowExtent;
}

/// World-frame label -> robot frame of `pose`, door geometry included.
inline NavLabel label_to_robot(const Pose& pose, const NavLabel& l) {
    NavLabel r = l;
    r.position = world_to_robot(pose, l.position);
    if (l.door) {
        r.door->hinge = world_to_robot(pose, l.door->hinge);
        r.door->frame_angle = normalize_angle(l.door->frame_angle - pose.theta + kPi / 2.0);
    }
    return r;
}

/// A stored training frame. Labels are in the robot frame (x right, y forward).
struct Sample {
    LocalMap laser16;
    LocalMap gmap16;
    std::vector<NavLabel> labels;
    Pose pose;
};

/// Network-sized views of a sample with the labels that remain in the window.
struct ViewSample {
    LocalMap laser;
    LocalMap gmap;
    std::vector<NavLabel> labels;
};

struct AugmentParams {
    double rotation = 0.0;  // radians, CCW in the robot frame
    Vec2 translation{};     // meters
    double scale = 1.0;     // > 1 magnifies content

    friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

struct AugmentPolicy {
    std::pair<double, double> rotation_range{deg2rad(-30.0), deg2rad(30.0)};
    std::pair<double, double> translation_range{-1.6, 1.6};
    std::pair<double, double> scale_range{0.9, 1.2};
    std::pair<double, double> door_angle_range{deg2rad(30.0), deg2rad(100.0)};
    double p_rotate = 0.5;
    double p_translate = 0.5;
    double p_scale = 0.5;

    void validate() const {
        if (rotation_range.first > rotation_range.second) throw Error("augment: empty rotation range");
        if (translation_range.first > translation_range.second) throw Error("augment: empty translation range");
        if (!(scale_range.first > 0.0) || scale_range.first > scale_range.second)
            throw Error("augment: scale range must lie in (0, inf)");
        if (!(door_angle_range.first > 0.0) || !(door_angle_range.second < kPi) ||
            door_angle_range.first > door_angle_range.second)
            throw Error("augment: door angle range must lie in (0, pi)");
        for (double p : {p_rotate, p_translate, p_scale})
            if (p < 0.0 || p > 1.0) throw Error("augment: probabilities must be in [0, 1]");
    }

    static AugmentPolicy none() {
        AugmentPolicy p;
        p.rotation_range = {0.0, 0.0};
        p.translation_range = {0.0, 0.0};
        p.scale_range = {1.0, 1.0};
        return p;
    }
};

inline nlohmann::json policy_to_json(const AugmentPolicy& p) {
    const auto pr = [](std::pair<double, double> r) { return nlohmann::json::array({r.first, r.second}); };
    return {{"rotation_range_rad", pr(p.rotation_range)},     {"translation_range_m", pr(p.translation_range)},
            {"scale_range", pr(p.scale_range)},               {"door_angle_range_rad", pr(p.door_angle_range)},
            {"p_rotate", p.p_rotate},                         {"p_translate", p.p_translate},
            {"p_scale", p.p_scale}};
}

inline AugmentPolicy policy_from_json(const nlohmann::json& j) {
    AugmentPolicy p;
    const auto rd = [&](const char* key, std::pair<double, double>& out) {
        if (j.contains(key)) out = {j.at(key).at(0).get<double>(), j.at(key).at(1).get<double>()};
    };
    try {
        rd("rotation_range_rad", p.rotation_range);
        rd("translation_range_m", p.translation_range);
        rd("scale_range", p.scale_range);
        rd("door_angle_range_rad", p.door_angle_range);
        p.p_rotate = j.value("p_rotate", p.p_rotate);
        p.p_translate = j.value("p_translate", p.p_translate);
        p.p_scale = j.value("p_scale", p.p_scale);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("augment policy: ") + e.what());
    }
    p.validate();
    return p;
}

inline AugmentPolicy load_policy(const std::filesystem::path& path) {
    try {
        return policy_from_json(nlohmann::json::parse(read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("augment policy '" + path.string() + "': " + e.what());
    }
}

/// Content transform about the network window center, applied as translate,
/// then rotate, then resize. Maps a robot-frame point of the original view to
/// its position in the augmented view.
inline Vec2 apply_transform(const AugmentParams& t, Vec2 p) {
    const Vec2 c{0.0, kViewCenterForward};
    const double cs = std::cos(t.rotation);
    const double sn = std::sin(t.rotation);
    const Vec2 d = p + t.translation - c;
    return c + t.scale * Vec2{cs * d.x - sn * d.y, sn * d.x + cs * d.y};
}

inline Vec2 invert_transform(const AugmentParams& t, Vec2 q) {
    const Vec2 c{0.0, kViewCenterForward};
    const double cs = std::cos(t.rotation);
    const double sn = std::sin(t.rotation);
    const Vec2 d = (1.0 / t.scale) * (q - c);
    return c + Vec2{cs * d.x + sn * d.y, -sn * d.x + cs * d.y} - t.translation;
}

/// True when every sample of the transformed 8 m window lies in the 16 m raster.
inline bool transform_fits(const AugmentParams& t, const LocalMap& stored) {
    const double h = kWindowExtent / 2.0;
    const double lim = stored.extent / 2.0;
    for (double sx : {-h, h}) {
        for (double sy : {-h, h}) {
            const Vec2 p = invert_transform(t, {sx, kViewCenterForward + sy});
            if (std::abs(p.x) > lim || std::abs(p.y - stored.center_forward) > lim) return false;
        }
    }
    return true;
}

inline ViewSample transform_sample(const Sample& s, const AugmentParams& t, int px = kNetworkPixels) {
    if (std::abs(s.laser16.extent - s.gmap16.extent) > 1e-12 || s.laser16.center_forward != s.gmap16.center_forward)
        throw Error("sample local maps disagree on extent");
    if (!(t.scale > 0.0)) throw Error("augment scale must be positive");
    if (!transform_fits(t, s.laser16) || !transform_fits(t, s.gmap16))
        throw Error("augment transform samples outside the stored local map");
    const auto src = [&](Vec2 q) { return invert_transform(t, q); };
    ViewSample out;
    out.laser = resample_view(s.laser16, kWindowExtent, px, src);
    out.gmap = resample_view(s.gmap16, kWindowExtent, px, src);
    for (const auto& l : s.labels) {
        NavLabel moved = l;
        moved.position = apply_transform(t, l.position);
        if (l.door) {
            moved.door->hinge = apply_transform(t, l.door->hinge);
            moved.door->width = l.door->width * t.scale;
            moved.door->frame_angle = normalize_angle(l.door->frame_angle + t.rotation);
        }
        if (in_network_window(moved.position)) out.labels.push_back(moved);
    }
    return out;
}

template <class Rng>
AugmentParams draw_augment_params(const AugmentPolicy& policy, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto draw = [&](std::pair<double, double> r) { return r.first + (r.second - r.first) * unit(rng); };
    AugmentParams p;
    // Every draw is consumed regardless of the coin flips so the stream
    // position does not depend on which operations fire.
    const double rot = draw(policy.rotation_range);
    const double tx = draw(policy.translation_range);
    const double ty = draw(policy.translation_range);
    const double sc = draw(policy.scale_range);
    const double u_rot = unit(rng);
    const double u_tr = unit(rng);
    const double u_sc = unit(rng);
    if (u_rot < policy.p_rotate) p.rotation = rot;
    if (u_tr < policy.p_translate) p.translation = {tx, ty};
    if (u_sc < policy.p_scale) p.scale = sc;
    return p;
}

template <class Rng>
ViewSample random_augment(const Sample& s, const AugmentPolicy& policy, Rng& rng, int px = kNetworkPixels) {
    return transform_sample(s, draw_augment_params(policy, rng), px);
}

// ---------------------------------------------------------------------------
// Door panel synthesis on world maps
// ---------------------------------------------------------------------------

/// Cells of a one-cell-thick Bresenham segment from a to b (world meters).
inline std::vector<std::pair<int, int>> segment_cells(const OccupancyGrid& g, Vec2 a, Vec2 b) {
    const auto ca = g.world_to_cell(a);
    const auto cb = g.world_to_cell(b);
    std::vector<std::pair<int, int>> cells;
    int c = ca.col;
    int r = ca.row;
    const int dc = std::abs(cb.col - ca.col);
    const int dr = -std::abs(cb.row - ca.row);
    const int sc = ca.col < cb.col ? 1 : -1;
    const int sr = ca.row < cb.row ? 1 : -1;
    int err = dc + dr;
    while (true) {
        if (g.contains(c, r)) cells.emplace_back(c, r);
        if (c == cb.col && r == cb.row) break;
        const int e2 = 2 * err;
        if (e2 >= dr) {
            err += dr;
            c += sc;
        }
        if (e2 <= dc) {
            err += dc;
            r += sr;
        }
    }
    return cells;
}

inline std::vector<std::pair<int, int>> door_panel_cells(const OccupancyGrid& g, const DoorGeometry& d, double angle) {
    const double a = d.frame_angle + angle;
    return segment_cells(g, d.hinge, d.hinge + d.width * Vec2{std::cos(a), std::sin(a)});
}

/// Draws an open door panel at `angle` from the frame. When the map already
/// carries a panel at `previous_angle`, those cells are cleared first.
inline WorldMap synthesize_door(const WorldMap& world, const NavLabel& open_room, double angle,
                                std::optional<double> previous_angle = std::nullopt) {
    if (!open_room.door) throw Error("synthesize_door: label has no door geometry");
    WorldMap out = world;
    const auto fresh = door_panel_cells(out.grid, *open_room.door, angle);
    if (previous_angle) {
        const auto hinge = out.grid.world_to_cell(open_room.door->hinge);
        for (auto [c, r] : door_panel_cells(out.grid, *open_room.door, *previous_angle))
            if (!(c == hinge.col && r == hinge.row)) out.grid.set_state(c, r, CellState::Free);
    }
    for (auto [c, r] : fresh) out.grid.set_state(c, r, CellState::Occupied);
    return out;
}

}  // namespace gridnav
