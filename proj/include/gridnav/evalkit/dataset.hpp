#pragma once

#include <array>
#include <filesystem>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/augment.hpp"
#include "gridnav/core.hpp"
#include "gridnav/mapper.hpp"
#include "gridnav/nn/tensor.hpp"
#include "gridnav/scansim.hpp"
#include "gridnav/worldgen.hpp"

namespace gridnav {

// ---------------------------------------------------------------------------
// Model variants and network inputs
// ---------------------------------------------------------------------------

enum class Variant { Laser, Map, Combined };

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::Laser: return "laser";
        case Variant::Map: return "map";
        case Variant::Combined: return "combined";
    }
    return "?";
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "laser") return Variant::Laser;
    if (s == "map") return Variant::Map;
    if (s == "combined") return Variant::Combined;
    throw Error("unknown variant '" + s + "' (expected laser, map or combined)");
}

/// Pixel -> network value. FREE = 1, UNKNOWN = 0, OCCUPIED ~ -1.
inline float input_value(std::uint8_t v) { return (static_cast<float>(v) - 128.0f) / 127.0f; }

template <class T>
void write_input(const LocalMap& m, nn::Tensor4<T>& dst, int n) {
    if (dst.h() != m.image.height || dst.w() != m.image.width || dst.c() != 1)
        throw Error("input raster " + std::to_string(m.image.width) + "px does not match network input " + dst.shape().str());
    T* p = dst.sample(n);
    for (std::size_t i = 0; i < m.image.pixels.size(); ++i) p[i] = static_cast<T>(input_value(m.image.pixels[i]));
}

/// Fills one batch slot for the given variant. The absent input of the
/// single-input variants stays all-UNKNOWN (zero).
template <class T>
void write_inputs(Variant v, const LocalMap& laser, const LocalMap& gmap, nn::Tensor4<T>& laser_in, nn::Tensor4<T>& gmap_in,
                  int n) {
    if (v != Variant::Map) write_input(laser, laser_in, n);
    if (v != Variant::Laser) write_input(gmap, gmap_in, n);
}

// ---------------------------------------------------------------------------
// Dataset records
// ---------------------------------------------------------------------------

struct DatasetRecord {
    std::filesystem::path laser16;
    std::filesystem::path gmap16;
    Pose pose;
    double t = 0.0;
    std::vector<NavLabel> labels;   // robot frame, inside the network window
    std::vector<NavLabel> context;  // robot frame, inside the stored raster but outside the window
    std::string map;
    std::string split;
};

inline nlohmann::json record_to_json(const DatasetRecord& r) {
    nlohmann::json labels = nlohmann::json::array();
    nlohmann::json context = nlohmann::json::array();
    for (const auto& l : r.labels) labels.push_back(label_to_json(l));
    for (const auto& l : r.context) context.push_back(label_to_json(l));
    return {{"laser16", r.laser16.generic_string()},
            {"gmap16", r.gmap16.generic_string()},
            {"pose", {r.pose.x, r.pose.y, r.pose.theta}},
            {"t", r.t},
            {"labels", labels},
            {"context_labels", context},
            {"map", r.map},
            {"split", r.split}};
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
    DatasetRecord r;
    r.laser16 = j.at("laser16").get<std::string>();
    r.gmap16 = j.at("gmap16").get<std::string>();
    const auto& p = j.at("pose");
    r.pose = Pose(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    r.t = j.at("t").get<double>();
    for (const auto& l : j.at("labels")) r.labels.push_back(label_from_json(l));
    if (j.contains("context_labels"))
        for (const auto& l : j.at("context_labels")) r.context.push_back(label_from_json(l));
    r.map = j.at("map").get<std::string>();
    r.split = j.at("split").get<std::string>();
    check_split(r.split);
    return r;
}

struct DatasetIndex {
    std::filesystem::path root;
    std::vector<DatasetRecord> records;

    std::vector<const DatasetRecord*> split(const std::string& s) const {
        std::vector<const DatasetRecord*> out;
        for (const auto& r : records)
            if (r.split == s) out.push_back(&r);
        return out;
    }
};

inline DatasetIndex load_index(const std::filesystem::path& path) {
    DatasetIndex idx;
    idx.root = path.parent_path();
    std::istringstream in(read_text(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            idx.records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return idx;
}

inline Sample load_sample(const DatasetIndex& idx, const DatasetRecord& r) {
    Sample s{load_local_map(idx.root / r.laser16), load_local_map(idx.root / r.gmap16), r.labels, r.pose};
    s.labels.insert(s.labels.end(), r.context.begin(), r.context.end());
    return s;
}

/// Untransformed network views of a stored sample.
inline ViewSample plain_view(const Sample& s, int px) { return transform_sample(s, AugmentParams{}, px); }

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct DatasetParams {
    int network_px = kNetworkPixels;
    int record_stride = 10;  // keep every k-th scan
    int passes = 1;          // trajectory repeats per map, each with fresh door angles
    LidarParams lidar{};
    std::pair<double, double> door_angle_range{deg2rad(30.0), deg2rad(100.0)};

    int stored_px() const { return 2 * network_px; }
    void validate() const {
        lidar.validate();
        if (network_px < 8) throw Error("network image size too small");
        if (record_stride < 1) throw Error("record stride must be >= 1");
        if (passes < 1) throw Error("passes must be >= 1");
    }
};

/// Draws a fresh panel angle for every open-room doorway.
template <class Rng>
WorldMap with_random_doors(const WorldMap& w, std::pair<double, double> range, Rng& rng) {
    std::uniform_real_distribution<double> angle(range.first, range.second);
    WorldMap out = w;
    for (const auto& l : w.labels)
        if (l.door) out = synthesize_door(out, l, angle(rng));
    return out;
}

/// Labels of a world, split into in-window and rest-of-raster, robot frame.
inline void visible_labels(const std::vector<NavLabel>& world_labels, const Pose& pose, std::vector<NavLabel>& in_window,
                           std::vector<NavLabel>* context = nullptr) {
    for (const auto& l : world_labels) {
        const NavLabel r = label_to_robot(pose, l);
        if (in_network_window(r.position)) {
            in_window.push_back(r);
        } else if (context && std::abs(r.position.x) < kStoredExtent / 2 &&
                   std::abs(r.position.y - kViewCenterForward) < kStoredExtent / 2) {
            context->push_back(r);
        }
    }
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(a),
                      static_cast<std::uint32_t>(b)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct DatasetSummary {
    std::map<std::string, std::array<int, kNumCategories>> labels_per_split;
    std::map<std::string, int> frames_per_split;
};

/// Simulates every suite trajectory, builds the global map online, and writes
/// laser/GMap local maps plus index.jsonl under `out`.
inline DatasetSummary generate_dataset(const MapSuite& suite, const DatasetParams& params, std::uint64_t seed,
                                       const std::filesystem::path& out) {
    params.validate();
    std::filesystem::create_directories(out / "frames");
    DatasetSummary summary;
    std::ostringstream index;
    const int spx = params.stored_px();
    for (std::size_t mi = 0; mi < suite.maps.size(); ++mi) {
        const auto& entry = suite.maps[mi];
        const WorldMap base = load_world(suite, entry);
        const Trajectory traj = load_trajectory(suite.root / entry.trajectory);
        validate_trajectory_on_map(base.grid, traj);
        const auto poses = sample_poses(traj);
        for (int pass = 0; pass < params.passes; ++pass) {
            std::mt19937_64 rng(derive_seed(seed, mi, static_cast<std::uint64_t>(pass)));
            const WorldMap world = with_random_doors(base, params.door_angle_range, rng);
            GlobalMapState gmap(world.grid);
            for (std::size_t k = 0; k < poses.size(); ++k) {
                const auto& tp = poses[k];
                const Scan scan = cast_scan(world.grid, tp.pose, params.lidar, rng, tp.t);
                update_global(gmap, scan, tp.pose);
                if (k % static_cast<std::size_t>(params.record_stride) != 0) continue;
                DatasetRecord r;
                r.pose = tp.pose;
                r.t = tp.t;
                r.map = entry.name;
                r.split = entry.split;
                visible_labels(world.labels, tp.pose, r.labels, &r.context);
                std::ostringstream stem;
                stem << entry.name << "_p" << pass << "_" << std::setw(6) << std::setfill('0') << k;
                r.laser16 = std::filesystem::path("frames") / (stem.str() + "_laser.pgm");
                r.gmap16 = std::filesystem::path("frames") / (stem.str() + "_gmap.pgm");
                save_local_map(out / r.laser16, rasterize_scan(scan, tp.pose, kStoredExtent, spx));
                save_local_map(out / r.gmap16, crop_local(gmap, tp.pose, kStoredExtent, spx));
                index << record_to_json(r).dump() << "\n";
                auto& counts = summary.labels_per_split[r.split];
                for (const auto& l : r.labels) ++counts[static_cast<std::size_t>(index_of(l.category))];
                ++summary.frames_per_split[r.split];
            }
        }
    }
    write_text_atomic(out / "index.jsonl", index.str());
    return summary;
}

/// Per-split label counts and percentages, one row per split.
inline std::string label_table(const DatasetSummary& s) {
    std::ostringstream o;
    o << std::left << std::setw(12) << "split" << std::setw(8) << "frames";
    for (auto c : kAllCategories) o << std::setw(20) << to_string(c);
    o << "\n";
    for (const auto& [split, counts] : s.labels_per_split) {
        const int total = counts[0] + counts[1] + counts[2];
        o << std::setw(12) << split << std::setw(8) << s.frames_per_split.at(split);
        for (int k : counts) {
            std::ostringstream cell;
            cell << k << " (" << std::fixed << std::setprecision(1) << (total ? 100.0 * k / total : 0.0) << "%)";
            o << std::setw(20) << cell.str();
        }
        o << "\n";
    }
    return o.str();
}

inline nlohmann::json summary_to_json(const DatasetSummary& s) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [split, counts] : s.labels_per_split) {
        nlohmann::json c = nlohmann::json::object();
        for (auto cat : kAllCategories) c[std::string(to_string(cat))] = counts[static_cast<std::size_t>(index_of(cat))];
        j[split] = {{"frames", s.frames_per_split.at(split)}, {"labels", c}};
    }
    return j;
}

}  // namespace gridnav
