#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"
#include "gridnav/gridworld.hpp"
#include "gridnav/scansim.hpp"

namespace gridnav {

/// Forward extent of the network window; also the robot-frame forward
/// coordinate shared by the centers of the stored and network views.
inline constexpr double kWindowExtent = 8.0;
inline constexpr double kStoredExtent = 16.0;
inline constexpr double kViewCenterForward = kWindowExtent / 2.0;
inline constexpr int kNetworkPixels = 244;

/// Robot-centric, heading-up square raster (FREE=255, OCCUPIED=0, UNKNOWN=128).
/// The image center sits at robot-frame (0, center_forward): the 8 m network
/// view has the robot at its bottom-center, the 16 m stored view keeps it a
/// quarter of the way up so augmentation has headroom on every side.
struct LocalMap {
    GrayImage image;
    double extent = kStoredExtent;
    double center_forward = kViewCenterForward;
    Pose anchor_pose;

    int px() const { return image.width; }
    double pixel_size() const { return extent / image.width; }

    /// Robot-frame position of a pixel center.
    Vec2 pixel_center(int col, int row) const {
        const double s = pixel_size();
        return {-extent / 2.0 + (col + 0.5) * s, center_forward + extent / 2.0 - (row + 0.5) * s};
    }

    /// Pixel containing a robot-frame point (may lie outside the image).
    /// Scaling by px / extent rather than dividing by the pixel size keeps
    /// points on pixel corners (the robot itself) exact.
    std::pair<int, int> pixel_of(Vec2 robot) const {
        const Vec2 q = pixel_coords(robot);
        return {static_cast<int>(std::floor(q.x)), static_cast<int>(std::floor(q.y))};
    }

    /// Continuous pixel coordinates (pixel centers at .5).
    Vec2 pixel_coords(Vec2 robot) const {
        const double k = px() / extent;
        return {(robot.x + extent / 2.0) * k, (center_forward + extent / 2.0 - robot.y) * k};
    }
};

inline LocalMap make_local_map(int px, double extent, const Pose& anchor, std::uint8_t fill = kUnknownPixel) {
    if (px < 2) throw Error("local map needs at least 2 pixels per side");
    if (!(extent > 0.0)) throw Error("local map extent must be positive");
    LocalMap m;
    m.image = GrayImage(px, px, fill);
    m.extent = extent;
    m.anchor_pose = anchor;
    return m;
}

namespace detail {

/// Bresenham walk from (c0,r0) toward (c1,r1), calling visit(c, r) for every
/// pixel of [0,w)x[0,h) before the endpoint. The start may lie outside the
/// image; the walk stops once the line has entered and left again.
template <class Visit>
void walk_line(int c0, int r0, int c1, int r1, int w, int h, Visit&& visit) {
    const int dc = std::abs(c1 - c0);
    const int dr = -std::abs(r1 - r0);
    const int sc = c0 < c1 ? 1 : -1;
    const int sr = r0 < r1 ? 1 : -1;
    int err = dc + dr;
    int c = c0;
    int r = r0;
    bool entered = false;
    while (!(c == c1 && r == r1)) {
        if (c < 0 || r < 0 || c >= w || r >= h) {
            if (entered) return;
        } else {
            entered = true;
            visit(c, r);
        }
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
}

}  // namespace detail

/// Renders one scan into a local map: cells before each endpoint FREE, hit
/// endpoints OCCUPIED, the rest UNKNOWN.
inline LocalMap rasterize_scan(const Scan& scan, const Pose& pose, double extent = kStoredExtent, int px = 488,
                               double center_forward = kViewCenterForward) {
    LocalMap m = make_local_map(px, extent, pose);
    m.center_forward = center_forward;
    const auto [rc, rr] = m.pixel_of({0.0, 0.0});
    std::vector<std::pair<int, int>> hits;
    hits.reserve(scan.ranges.size());
    for (int i = 0; i < scan.n_beams(); ++i) {
        const double a = scan.angle(i);
        const double r = scan.ranges[static_cast<std::size_t>(i)];
        const auto [ec, er] = m.pixel_of({-r * std::sin(a), r * std::cos(a)});
        detail::walk_line(rc, rr, ec, er, px, px, [&](int c, int row) { m.image.at(c, row) = kFreePixel; });
        if (scan.is_hit(i) && m.image.contains(ec, er)) hits.emplace_back(ec, er);
    }
    for (auto [c, r] : hits) m.image.at(c, r) = kOccupiedPixel;
    return m;
}

// ---------------------------------------------------------------------------
// Global log-odds map
// ---------------------------------------------------------------------------

struct LogOddsModel {
    float hit = 0.85f;
    float miss = -0.4f;
    float min = -5.0f;
    float max = 5.0f;
};

struct GlobalMapState {
    OccupancyGrid grid;
    LogOddsModel model;
    std::vector<std::uint32_t> stamp;  // per-cell scan counter for once-per-scan updates
    std::uint32_t scan_counter = 0;

    GlobalMapState() = default;
    explicit GlobalMapState(const OccupancyGrid& like, LogOddsModel m = {})
        : grid(like.width(), like.height(), like.resolution(), like.origin(), CellState::Unknown), model(m),
          stamp(static_cast<std::size_t>(like.width()) * static_cast<std::size_t>(like.height()), 0) {
        grid.enable_log_odds(0.0f);
        grid.refresh_from_log_odds();
    }
};

namespace detail {

/// Visits grid cells (col,row) along a ray up to `length`, in traversal
/// order. visit returns false to stop.
template <class Visit>
void traverse_cells(const OccupancyGrid& grid, Vec2 origin, Vec2 dir, double length, Visit&& visit) {
    const double res = grid.resolution();
    const double gx = (origin.x - grid.origin().x) / res;
    const double gy = (origin.y - grid.origin().y) / res;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    constexpr double inf = std::numeric_limits<double>::infinity();
    const int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
    const int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
    double t_max_x = step_x > 0 ? (ix + 1 - gx) * res / dir.x : (step_x < 0 ? (gx - ix) * res / -dir.x : inf);
    double t_max_y = step_y > 0 ? (iy + 1 - gy) * res / dir.y : (step_y < 0 ? (gy - iy) * res / -dir.y : inf);
    const double t_delta_x = step_x != 0 ? res / std::abs(dir.x) : inf;
    const double t_delta_y = step_y != 0 ? res / std::abs(dir.y) : inf;
    double t = 0.0;
    const int H = grid.height();
    while (t < length) {
        if (ix < 0 || iy < 0 || ix >= grid.width() || iy >= H) return;
        if (!visit(ix, H - 1 - iy)) return;
        if (t_max_x < t_max_y) {
            t = t_max_x;
            t_max_x += t_delta_x;
            ix += step_x;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            iy += step_y;
        }
    }
}

}  // namespace detail

/// Known-pose log-odds integration of one scan. Each cell is updated at most
/// once per scan; a hit endpoint wins over a traversal in the same scan.
inline void update_global(GlobalMapState& state, const Scan& scan, const Pose& pose) {
    auto& g = state.grid;
    check_pose_in_map(g, pose);
    if (++state.scan_counter == 0) {
        std::fill(state.stamp.begin(), state.stamp.end(), 0u);
        state.scan_counter = 1;
    }
    const std::uint32_t hit_mark = state.scan_counter;
    const std::size_t W = static_cast<std::size_t>(g.width());
    std::vector<std::pair<int, int>> hits;
    std::vector<std::pair<int, int>> misses;

    for (int i = 0; i < scan.n_beams(); ++i) {
        const double a = pose.theta + scan.angle(i);
        const double r = scan.ranges[static_cast<std::size_t>(i)];
        if (!scan.is_hit(i)) continue;
        const Vec2 end = pose.position() + r * Vec2{std::cos(a), std::sin(a)};
        const auto c = g.world_to_cell(end);
        if (c.in_bounds) {
            auto& s = state.stamp[static_cast<std::size_t>(c.row) * W + static_cast<std::size_t>(c.col)];
            if (s != hit_mark) {
                s = hit_mark;
                hits.emplace_back(c.col, c.row);
            }
        }
    }
    // Misses carry the same counter; hit cells are already stamped and skipped.
    for (int i = 0; i < scan.n_beams(); ++i) {
        const double a = pose.theta + scan.angle(i);
        const double r = scan.ranges[static_cast<std::size_t>(i)];
        const Vec2 dir{std::cos(a), std::sin(a)};
        const bool hit = scan.is_hit(i);
        const auto end_cell = hit ? g.world_to_cell(pose.position() + r * dir) : CellIndex{-1, -1, false};
        detail::traverse_cells(g, pose.position(), dir, r, [&](int col, int row) {
            if (hit && col == end_cell.col && row == end_cell.row) return false;
            auto& s = state.stamp[static_cast<std::size_t>(row) * W + static_cast<std::size_t>(col)];
            if (s != hit_mark) {
                s = hit_mark;
                misses.emplace_back(col, row);
            }
            return true;
        });
    }
    const auto apply = [&](int col, int row, float inc) {
        float& l = g.log_odds_ref(col, row);
        l = std::clamp(l + inc, state.model.min, state.model.max);
        g.refresh_cell(col, row);
    };
    for (auto [c, r] : hits) apply(c, r, state.model.hit);
    for (auto [c, r] : misses) apply(c, r, state.model.miss);
}

/// Heading-up crop of a tri-state grid (nearest-neighbor); outside the map is UNKNOWN.
inline LocalMap crop_grid(const OccupancyGrid& grid, const Pose& pose, double extent = kStoredExtent, int px = 488,
                          double center_forward = kViewCenterForward) {
    LocalMap m = make_local_map(px, extent, pose);
    m.center_forward = center_forward;
    for (int r = 0; r < px; ++r) {
        for (int c = 0; c < px; ++c) {
            const Vec2 w = robot_to_world(pose, m.pixel_center(c, r));
            const auto cell = grid.world_to_cell(w);
            m.image.at(c, r) = cell.in_bounds ? to_pixel(grid.state(cell.col, cell.row)) : kUnknownPixel;
        }
    }
    return m;
}

inline LocalMap crop_local(const GlobalMapState& state, const Pose& pose, double extent = kStoredExtent, int px = 488,
                           double center_forward = kViewCenterForward) {
    return crop_grid(state.grid, pose, extent, px, center_forward);
}

/// Nearest-neighbor resample of `src` into a new view. `to_source` maps a
/// robot-frame point of the output view to a robot-frame point of `src`.
/// Samples that fall outside `src` are UNKNOWN.
template <class ToSource>
LocalMap resample_view(const LocalMap& src, double extent, int px, ToSource&& to_source) {
    LocalMap out = make_local_map(px, extent, src.anchor_pose);
    out.center_forward = src.center_forward;
    for (int r = 0; r < px; ++r) {
        for (int c = 0; c < px; ++c) {
            const auto [sc, sr] = src.pixel_of(to_source(out.pixel_center(c, r)));
            out.image.at(c, r) = src.image.contains(sc, sr) ? src.image.at(sc, sr) : kUnknownPixel;
        }
    }
    return out;
}

/// Central 8x8 m window of a 16 m local map, robot at its bottom-center.
inline LocalMap network_view(const LocalMap& local16, int px = kNetworkPixels) {
    if (std::abs(local16.extent - kStoredExtent) > 1e-9)
        throw Error("network_view expects a 16 m local map, got extent " + std::to_string(local16.extent));
    if (std::abs(local16.center_forward - kViewCenterForward) > 1e-9)
        throw Error("network_view expects the stored view centered 4 m ahead of the robot");
    return resample_view(local16, kWindowExtent, px, [](Vec2 p) { return p; });
}

// ---------------------------------------------------------------------------
// Serialization: PGM + JSON sidecar
// ---------------------------------------------------------------------------

inline void save_local_map(const std::filesystem::path& pgm_path, const LocalMap& m) {
    write_pgm(pgm_path, m.image);
    nlohmann::json side = {{"extent_m", m.extent},
                           {"anchor_pose", {m.anchor_pose.x, m.anchor_pose.y, m.anchor_pose.theta}},
                           {"center_forward_m", m.center_forward}};
    auto sidecar = pgm_path;
    sidecar.replace_extension(".json");
    write_text_atomic(sidecar, side.dump() + "\n");
}

inline LocalMap load_local_map(const std::filesystem::path& pgm_path) {
    LocalMap m;
    m.image = read_pgm(pgm_path);
    if (m.image.width != m.image.height) throw Error("local map '" + pgm_path.string() + "' is not square");
    auto sidecar = pgm_path;
    sidecar.replace_extension(".json");
    try {
        const auto j = nlohmann::json::parse(read_text(sidecar));
        m.extent = j.at("extent_m").get<double>();
        const auto& a = j.at("anchor_pose");
        m.anchor_pose = Pose(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>());
        m.center_forward = j.value("center_forward_m", kViewCenterForward);
    } catch (const nlohmann::json::exception& e) {
        throw Error("local map sidecar '" + sidecar.string() + "': " + e.what());
    }
    if (!(m.extent > 0.0)) throw Error("local map extent must be positive");
    return m;
}

}  // namespace gridnav
