#pragma once

#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/detector.hpp"
#include "gridnav/evalkit/dataset.hpp"
#include "gridnav/evalkit/metrics.hpp"
#include "gridnav/evalkit/train.hpp"
#include "gridnav/mapper.hpp"
#include "gridnav/narrator.hpp"
#include "gridnav/scansim.hpp"
#include "gridnav/tracker.hpp"

namespace gridnav {

/// Per-frame detector: network-sized laser and GMap views anchored at `anchor`.
using DetectFn = std::function<std::vector<Detection>(const LocalMap& laser, const LocalMap& gmap, const Pose& anchor)>;

inline DetectFn network_detector(Net& net, Variant variant, double tau) {
    return [&net, variant, tau](const LocalMap& laser, const LocalMap& gmap, const Pose& anchor) {
        ViewSample v{laser, gmap, {}};
        const auto pred = predict(net, variant, {&v});
        return decode(pred.front(), anchor, tau);
    };
}

/// Reports every ground-truth label inside the window at probability 1.
inline DetectFn oracle_detector(const std::vector<NavLabel>& world_labels) {
    return [world_labels](const LocalMap&, const LocalMap&, const Pose& anchor) {
        std::vector<Detection> out;
        for (const auto& l : world_labels) {
            const Vec2 r = world_to_robot(anchor, l.position);
            if (!in_network_window(r)) continue;
            Detection d;
            d.category = l.category;
            d.robot_position = r;
            d.position = l.position;
            d.probability = 1.0;
            const GridPoint g = grid_point(r);
            d.row = g.row;
            d.col = g.col;
            out.push_back(d);
        }
        return out;
    };
}

struct PipelineConfig {
    int network_px = kNetworkPixels;
    int detect_stride = 5;  // run the detector on every k-th scan
    TrackerConfig tracker{};
    NarratorConfig narrator{};
    LidarParams lidar{};
    std::pair<double, double> door_angle_range{deg2rad(30.0), deg2rad(100.0)};
    bool randomize_doors = true;
    double fov_exit_seconds = 1.0;
    double match_radius = 0.5;
    double odom_sigma_xy = 0.0;     // m per scan, random walk
    double odom_sigma_theta = 0.0;  // rad per scan

    void validate() const {
        tracker.validate();
        lidar.validate();
        if (detect_stride < 1) throw Error("detect stride must be >= 1");
        if (network_px < 8) throw Error("network image size too small");
        if (odom_sigma_xy < 0 || odom_sigma_theta < 0) throw Error("odometry noise must be non-negative");
    }
};

struct SemanticEntry {
    std::uint64_t cluster = 0;
    Category category = Category::ClosedRoom;
    Vec2 position{};
    double t = 0.0;
};

/// Final map of tracked predictions. An entry is written when its cluster
/// leaves the field of view (and at the end of the run); a later cluster at
/// the same place replaces the older entry.
struct SemanticMap {
    double radius = 1.0;
    std::vector<SemanticEntry> entries;

    void freeze(const TrackedFeature& f, double t) {
        const SemanticEntry e{f.id, f.category, f.position, t};
        for (auto& x : entries)
            if (x.cluster == f.id) {
                x = e;
                return;
            }
        for (auto& x : entries)
            if (distance(x.position, f.position) <= radius) {
                x = e;
                return;
            }
        entries.push_back(e);
    }

    std::vector<PointLabel> points() const {
        std::vector<PointLabel> p;
        for (const auto& e : entries) p.push_back({e.category, e.position});
        return p;
    }
};

struct FrameEvent {
    double t = 0.0;
    Pose pose;  // estimated pose used for mapping and detection
    const std::vector<Detection>* detections = nullptr;
    const std::vector<TrackedFeature>* snapshot = nullptr;
    const std::vector<Utterance>* utterances = nullptr;
};

struct PassResult {
    MetricsReport per_frame;
    MetricsReport tracked;
    SemanticMap semantic;
    std::set<std::size_t> seen_truths;  // label indices that were ever in the window
    int detection_frames = 0;
};

/// Online run over a world: one optional mapping-only pass over the
/// trajectory (explored), then a pass with detection, tracking and narration.
class OnlineRun {
public:
    OnlineRun(const WorldMap& world, const Trajectory& traj, const PipelineConfig& cfg, std::uint64_t seed)
        : cfg_(cfg), rng_(seed), traj_(traj) {
        cfg_.validate();
        validate_trajectory_on_map(world.grid, traj);
        world_ = cfg_.randomize_doors ? with_random_doors(world, cfg_.door_angle_range, rng_) : world;
        gmap_ = GlobalMapState(world_.grid);
        poses_ = sample_poses(traj_);
    }

    const WorldMap& world() const { return world_; }
    const GlobalMapState& global_map() const { return gmap_; }

    /// Drives the trajectory once, only building the global map.
    void explore() {
        for (const auto& tp : poses_) {
            const Pose est = estimate(tp.pose);
            update_global(gmap_, cast_scan(world_.grid, tp.pose, cfg_.lidar, rng_, tp.t), est);
        }
    }

    PassResult run(const DetectFn& detect, const std::function<void(const FrameEvent&)>& on_frame = {}) {
        PassResult res;
        res.semantic.radius = cfg_.tracker.radius;
        Tracker tracker(cfg_.tracker);
        AnnouncementState announce;
        std::map<std::uint64_t, double> last_inside;
        std::set<std::uint64_t> frozen_since_exit;
        const int px = cfg_.network_px;
        for (std::size_t k = 0; k < poses_.size(); ++k) {
            const auto& tp = poses_[k];
            const Pose est = estimate(tp.pose);
            const Scan scan = cast_scan(world_.grid, tp.pose, cfg_.lidar, rng_, tp.t);
            update_global(gmap_, scan, est);
            if (k % static_cast<std::size_t>(cfg_.detect_stride) != 0) continue;
            ++res.detection_frames;

            const LocalMap laser = rasterize_scan(scan, est, kWindowExtent, px, kViewCenterForward);
            const LocalMap gmap = crop_local(gmap_, est, kWindowExtent, px, kViewCenterForward);
            const std::vector<Detection> dets = detect(laser, gmap, est);

            std::vector<PointLabel> truth;
            for (std::size_t i = 0; i < world_.labels.size(); ++i) {
                const auto& l = world_.labels[i];
                if (!in_network_window(world_to_robot(tp.pose, l.position))) continue;
                truth.push_back({l.category, l.position});
                res.seen_truths.insert(i);
            }
            res.per_frame.accumulate(points_of(dets, false), truth, cfg_.match_radius);

            tracker.prune(tp.t);
            tracker.integrate(dets, tp.t);
            for (const auto& f : tracker.features()) {
                if (in_network_window(world_to_robot(est, f.position))) {
                    last_inside[f.id] = tp.t;
                    frozen_since_exit.erase(f.id);
                } else if (!frozen_since_exit.contains(f.id) && last_inside.contains(f.id) &&
                           tp.t - last_inside[f.id] >= cfg_.fov_exit_seconds) {
                    res.semantic.freeze(f, tp.t);
                    frozen_since_exit.insert(f.id);
                }
            }
            const auto snap = tracker.snapshot();
            const auto utter = narrate(est, snap, announce, tp.t, cfg_.narrator);
            if (on_frame) on_frame({tp.t, est, &dets, &snap, &utter});
        }
        const double t_end = poses_.empty() ? 0.0 : poses_.back().t;
        for (const auto& f : tracker.snapshot())
            if (!frozen_since_exit.contains(f.id)) res.semantic.freeze(f, t_end);

        std::vector<PointLabel> truths;
        for (std::size_t i : res.seen_truths) truths.push_back({world_.labels[i].category, world_.labels[i].position});
        res.tracked.accumulate(res.semantic.points(), truths, cfg_.match_radius);
        res.per_frame.finalize();
        res.tracked.finalize();
        return res;
    }

private:
    Pose estimate(const Pose& truth) {
        if (cfg_.odom_sigma_xy == 0.0 && cfg_.odom_sigma_theta == 0.0) return truth;
        std::normal_distribution<double> nxy(0.0, cfg_.odom_sigma_xy), nth(0.0, cfg_.odom_sigma_theta);
        drift_x_ += cfg_.odom_sigma_xy > 0 ? nxy(rng_) : 0.0;
        drift_y_ += cfg_.odom_sigma_xy > 0 ? nxy(rng_) : 0.0;
        drift_th_ += cfg_.odom_sigma_theta > 0 ? nth(rng_) : 0.0;
        return Pose(truth.x + drift_x_, truth.y + drift_y_, truth.theta + drift_th_);
    }

    PipelineConfig cfg_;
    std::mt19937_64 rng_;
    Trajectory traj_;
    WorldMap world_;
    GlobalMapState gmap_;
    std::vector<TimedPose> poses_;
    double drift_x_ = 0.0, drift_y_ = 0.0, drift_th_ = 0.0;
};

struct TrackedEvalResult {
    MetricsReport tracked;    // averaged over repetitions
    MetricsReport per_frame;  // averaged over repetitions
    std::vector<MetricsReport> tracked_runs;
    std::vector<MetricsReport> per_frame_runs;
};

/// Repeats the online run with per-repetition seeds and averages the metrics.
/// Explored and unexplored evaluations with the same seed see the same doors.
inline TrackedEvalResult eval_tracked(const WorldMap& world, const Trajectory& traj, const DetectFn& detect,
                                      const PipelineConfig& cfg, bool explored, int repetitions, std::uint64_t seed) {
    if (repetitions < 1) throw Error("repetitions must be >= 1");
    TrackedEvalResult out;
    for (int rep = 0; rep < repetitions; ++rep) {
        OnlineRun run(world, traj, cfg, derive_seed(seed, static_cast<std::uint64_t>(rep)));
        if (explored) run.explore();
        PassResult r = run.run(detect);
        r.tracked.meta["seed"] = seed;
        r.tracked.meta["repetition"] = rep;
        out.tracked_runs.push_back(r.tracked);
        out.per_frame_runs.push_back(r.per_frame);
    }
    out.tracked = average_reports(out.tracked_runs);
    out.per_frame = average_reports(out.per_frame_runs);
    for (auto* m : {&out.tracked, &out.per_frame}) {
        m->meta["explored"] = explored;
        m->meta["seed"] = seed;
        m->meta["map"] = world.name;
    }
    return out;
}

}  // namespace gridnav
