#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"
#include "gridnav/gridworld.hpp"

namespace gridnav {

struct LidarParams {
    double fov = deg2rad(270.0);
    int n_beams = 541;
    double max_range = 20.0;
    double range_noise_sigma = 0.0;

    void validate() const {
        if (!(fov > 0.0 && fov <= 2.0 * kPi + 1e-12)) throw Error("lidar fov must be in (0, 2pi]");
        if (n_beams < 2) throw Error("lidar needs at least 2 beams");
        if (!(max_range > 0.0)) throw Error("lidar max_range must be positive");
        if (!(range_noise_sigma >= 0.0)) throw Error("lidar noise sigma must be >= 0");
    }
};

/// One sweep. Angles are relative to the robot heading (CCW positive);
/// a range equal to max_range means the beam hit nothing.
struct Scan {
    double angle_min = 0.0;
    double angle_max = 0.0;
    double max_range = 20.0;
    double timestamp = 0.0;
    std::vector<double> ranges;

    int n_beams() const { return static_cast<int>(ranges.size()); }
    double angle_increment() const { return (angle_max - angle_min) / (n_beams() - 1); }
    double angle(int i) const { return angle_min + i * angle_increment(); }
    bool is_hit(int i) const { return ranges[static_cast<std::size_t>(i)] < max_range; }

    friend bool operator==(const Scan&, const Scan&) = default;
};

/// Distance from `origin` along `dir` (unit) to the entry of the first
/// OCCUPIED cell, found by Amanatides-Woo grid traversal. UNKNOWN cells do
/// not block. Returns +inf when nothing is hit within max_range.
inline double trace_ray(const OccupancyGrid& grid, Vec2 origin, Vec2 dir, double max_range) {
    const double res = grid.resolution();
    const double gx = (origin.x - grid.origin().x) / res;
    const double gy = (origin.y - grid.origin().y) / res;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    const int H = grid.height();
    const int W = grid.width();
    constexpr double inf = std::numeric_limits<double>::infinity();

    const int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
    const int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
    // t is measured in meters along the ray.
    double t_max_x = step_x > 0 ? (ix + 1 - gx) * res / dir.x : (step_x < 0 ? (gx - ix) * res / -dir.x : inf);
    double t_max_y = step_y > 0 ? (iy + 1 - gy) * res / dir.y : (step_y < 0 ? (gy - iy) * res / -dir.y : inf);
    const double t_delta_x = step_x != 0 ? res / std::abs(dir.x) : inf;
    const double t_delta_y = step_y != 0 ? res / std::abs(dir.y) : inf;

    double t = 0.0;
    while (t <= max_range) {
        if (ix < 0 || iy < 0 || ix >= W || iy >= H) return inf;
        if (grid.state(ix, H - 1 - iy) == CellState::Occupied) return t;
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
    return inf;
}

inline void check_pose_in_map(const OccupancyGrid& grid, const Pose& pose) {
    const auto c = grid.world_to_cell(pose.position());
    if (!c.in_bounds) throw Error("pose (" + std::to_string(pose.x) + ", " + std::to_string(pose.y) + ") is outside the map");
}

template <class Rng>
Scan cast_scan(const OccupancyGrid& grid, const Pose& pose, const LidarParams& params, Rng& rng, double timestamp = 0.0) {
    params.validate();
    check_pose_in_map(grid, pose);
    const auto c = grid.world_to_cell(pose.position());
    if (grid.state(c.col, c.row) == CellState::Occupied) throw Error("pose lies inside an occupied cell");

    Scan scan;
    scan.angle_min = -params.fov / 2.0;
    scan.angle_max = params.fov / 2.0;
    scan.max_range = params.max_range;
    scan.timestamp = timestamp;
    scan.ranges.resize(static_cast<std::size_t>(params.n_beams));
    std::normal_distribution<double> noise(0.0, params.range_noise_sigma > 0 ? params.range_noise_sigma : 1.0);
    const double inc = (scan.angle_max - scan.angle_min) / (params.n_beams - 1);
    for (int i = 0; i < params.n_beams; ++i) {
        const double a = pose.theta + scan.angle_min + i * inc;
        double r = trace_ray(grid, pose.position(), {std::cos(a), std::sin(a)}, params.max_range);
        if (r >= params.max_range) {
            r = params.max_range;
        } else if (params.range_noise_sigma > 0.0) {
            r = std::clamp(r + noise(rng), 1e-6, params.max_range);
        } else {
            r = std::max(r, 1e-6);
        }
        scan.ranges[static_cast<std::size_t>(i)] = r;
    }
    return scan;
}

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct Trajectory {
    std::vector<Vec2> waypoints;
    double speed = 0.5;      // m/s
    double scan_rate = 10.0;  // Hz

    void validate() const {
        if (waypoints.size() < 2) throw Error("trajectory needs at least 2 waypoints");
        if (!(speed > 0.0)) throw Error("trajectory speed must be positive");
        if (!(scan_rate > 0.0)) throw Error("trajectory scan rate must be positive");
    }

    double length() const {
        double L = 0.0;
        for (std::size_t i = 1; i < waypoints.size(); ++i) L += distance(waypoints[i - 1], waypoints[i]);
        return L;
    }
};

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
    nlohmann::json wp = nlohmann::json::array();
    for (const auto& p : t.waypoints) wp.push_back({p.x, p.y});
    return {{"waypoints_m", wp}, {"speed_mps", t.speed}, {"scan_rate_hz", t.scan_rate}};
}

inline Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory t;
    try {
        for (const auto& p : j.at("waypoints_m")) t.waypoints.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        t.speed = j.at("speed_mps").get<double>();
        t.scan_rate = j.at("scan_rate_hz").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("trajectory: ") + e.what());
    }
    t.validate();
    return t;
}

inline Trajectory load_trajectory(const std::filesystem::path& path) {
    try {
        return trajectory_from_json(nlohmann::json::parse(read_text(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error("trajectory '" + path.string() + "': " + e.what());
    }
}

inline void save_trajectory(const std::filesystem::path& path, const Trajectory& t) {
    write_text_atomic(path, trajectory_to_json(t).dump(2) + "\n");
}

inline void validate_trajectory_on_map(const OccupancyGrid& grid, const Trajectory& traj) {
    traj.validate();
    for (const auto& w : traj.waypoints) {
        const auto c = grid.world_to_cell(w);
        if (!c.in_bounds || grid.state(c.col, c.row) != CellState::Free)
            throw Error("waypoint (" + std::to_string(w.x) + ", " + std::to_string(w.y) + ") is not in free space");
    }
}

struct TimedPose {
    double t = 0.0;
    Pose pose;
};

/// Kinematic poses along the polyline at constant speed, one per scan period.
/// Heading is the direction of the segment being traversed; at a shared
/// waypoint the outgoing segment's heading applies.
inline std::vector<TimedPose> sample_poses(const Trajectory& traj) {
    traj.validate();
    std::vector<Vec2> pts;
    for (const auto& w : traj.waypoints)
        if (pts.empty() || distance(pts.back(), w) > 1e-12) pts.push_back(w);
    if (pts.size() < 2) throw Error("trajectory has zero length");

    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i) cum[i] = cum[i - 1] + distance(pts[i - 1], pts[i]);
    const double total = cum.back();
    const double duration = total / traj.speed;
    const auto n = static_cast<std::size_t>(std::floor(duration * traj.scan_rate + 1e-9)) + 1;

    std::vector<TimedPose> out;
    out.reserve(n);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / traj.scan_rate;
        const double s = std::min(total, t * traj.speed);
        while (seg + 2 < pts.size() && s >= cum[seg + 1]) ++seg;
        const Vec2 a = pts[seg];
        const Vec2 b = pts[seg + 1];
        const double len = cum[seg + 1] - cum[seg];
        const double u = std::clamp((s - cum[seg]) / len, 0.0, 1.0);
        const Vec2 p = a + u * (b - a);
        out.push_back({t, Pose(p.x, p.y, std::atan2(b.y - a.y, b.x - a.x))});
    }
    return out;
}

struct Frame {
    Pose pose;
    Scan scan;
};

template <class Rng>
std::vector<Frame> play_trajectory(const OccupancyGrid& grid, const Trajectory& traj, const LidarParams& params, Rng& rng) {
    validate_trajectory_on_map(grid, traj);
    std::vector<Frame> frames;
    for (const auto& tp : sample_poses(traj)) frames.push_back({tp.pose, cast_scan(grid, tp.pose, params, rng, tp.t)});
    return frames;
}

}  // namespace gridnav
