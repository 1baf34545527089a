#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"
#include "gridnav/gridworld.hpp"
#include "gridnav/scansim.hpp"

namespace gridnav {

// Synthetic office-like worlds: a rectilinear corridor graph with rooms hung
// off the corridor walls. Everything starts OCCUPIED and free space is
// carved out, so walls are solid.
//
// Labels:
//   corridor    - mouth of each arm at a junction (node degree >= 3)
//   open_room   - center of a doorway cut through the wall; the panel is not
//                 drawn here, see synthesize_door
//   closed_room - center of a shallow recess in the corridor wall

struct WorldGenParams {
    int nodes_x = 3;
    int nodes_y = 3;
    std::pair<double, double> spacing{12.5, 15.0};
    double corridor_width = 2.2;
    double wall = 0.2;
    double door_width = 0.9;
    double closed_recess = 0.1;
    std::pair<double, double> room_depth{3.0, 4.5};
    std::pair<double, double> room_width{3.0, 4.5};
    double p_open = 0.5;
    double p_extra_edge = 0.5;
    double min_label_gap = 2.0;
    double lateral_jitter = 0.3;
    double resolution = 0.05;

    void validate() const {
        if (nodes_x < 1 || nodes_y < 1 || nodes_x * nodes_y < 2) throw Error("worldgen: need at least 2 nodes");
        if (!(corridor_width > door_width)) throw Error("worldgen: corridors must be wider than doors");
        if (!(wall > closed_recess && closed_recess > 0)) throw Error("worldgen: recess must be shallower than the wall");
        if (!(resolution > 0)) throw Error("worldgen: resolution must be positive");
        if (spacing.first > spacing.second || room_depth.first > room_depth.second || room_width.first > room_width.second)
            throw Error("worldgen: empty range");
        if (spacing.first < corridor_width + 2 * (2 * wall + room_depth.second))
            throw Error("worldgen: node spacing too small for the room depth");
    }
};

struct GeneratedWorld {
    WorldMap world;
    Trajectory trajectory;
};

namespace detail {

struct Rect {
    double x0, y0, x1, y1;
};

inline Rect rect_of(Vec2 a, Vec2 b) { return {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)}; }

template <class F>
void for_cells(const OccupancyGrid& g, const Rect& r, F&& f) {
    const double res = g.resolution();
    const int c0 = std::max(0, static_cast<int>(std::ceil((r.x0 - g.origin().x) / res - 0.5)));
    const int c1 = std::min(g.width() - 1, static_cast<int>(std::floor((r.x1 - g.origin().x) / res - 0.5)));
    // row 0 is the top (max y)
    const int r0 = std::max(0, static_cast<int>(std::ceil((g.origin().y + g.height_m() - r.y1) / res - 0.5)));
    const int r1 = std::min(g.height() - 1, static_cast<int>(std::floor((g.origin().y + g.height_m() - r.y0) / res - 0.5)));
    for (int row = r0; row <= r1; ++row)
        for (int col = c0; col <= c1; ++col) f(col, row);
}

inline void fill_rect(OccupancyGrid& g, const Rect& r, CellState s) {
    for_cells(g, r, [&](int c, int row) { g.set_state(c, row, s); });
}

inline bool all_occupied(const OccupancyGrid& g, const Rect& r) {
    bool ok = true;
    for_cells(g, r, [&](int c, int row) { ok = ok && g.state(c, row) == CellState::Occupied; });
    return ok;
}

struct Edge {
    int a, b;
};

}  // namespace detail

template <class Rng>
GeneratedWorld generate_world(const WorldGenParams& p, Rng& rng, const std::string& name = "world") {
    p.validate();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto draw = [&](std::pair<double, double> r) { return r.first + (r.second - r.first) * unit(rng); };

    const double margin = p.corridor_width / 2 + 2 * p.wall + p.room_depth.second + 1.5;
    std::vector<double> xs{margin}, ys{margin};
    for (int i = 1; i < p.nodes_x; ++i) xs.push_back(xs.back() + draw(p.spacing));
    for (int j = 1; j < p.nodes_y; ++j) ys.push_back(ys.back() + draw(p.spacing));
    const int n_nodes = p.nodes_x * p.nodes_y;
    const auto node_pos = [&](int k) { return Vec2{xs[static_cast<std::size_t>(k % p.nodes_x)], ys[static_cast<std::size_t>(k / p.nodes_x)]}; };

    // Corridor graph: random spanning tree over the node lattice plus extra
    // edges. Retried until it has at least one junction when that is possible.
    std::vector<detail::Edge> lattice;
    for (int j = 0; j < p.nodes_y; ++j)
        for (int i = 0; i < p.nodes_x; ++i) {
            const int k = j * p.nodes_x + i;
            if (i + 1 < p.nodes_x) lattice.push_back({k, k + 1});
            if (j + 1 < p.nodes_y) lattice.push_back({k, k + p.nodes_x});
        }
    std::vector<detail::Edge> edges;
    std::vector<int> degree;
    for (int attempt = 0; attempt < 50; ++attempt) {
        std::vector<detail::Edge> order = lattice;
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> parent(static_cast<std::size_t>(n_nodes));
        std::iota(parent.begin(), parent.end(), 0);
        const auto find = [&](int v) {
            while (parent[static_cast<std::size_t>(v)] != v) v = parent[static_cast<std::size_t>(v)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
            return v;
        };
        edges.clear();
        for (const auto& e : order) {
            const int ra = find(e.a), rb = find(e.b);
            const bool extra = unit(rng) < p.p_extra_edge;
            if (ra != rb) {
                parent[static_cast<std::size_t>(ra)] = rb;
                edges.push_back(e);
            } else if (extra) {
                edges.push_back(e);
            }
        }
        degree.assign(static_cast<std::size_t>(n_nodes), 0);
        for (const auto& e : edges) ++degree[static_cast<std::size_t>(e.a)], ++degree[static_cast<std::size_t>(e.b)];
        if (n_nodes < 4 || std::any_of(degree.begin(), degree.end(), [](int d) { return d >= 3; })) break;
    }

    const double W = xs.back() + margin;
    const double H = ys.back() + margin;
    OccupancyGrid grid(static_cast<int>(std::ceil(W / p.resolution)), static_cast<int>(std::ceil(H / p.resolution)),
                       p.resolution, {0.0, 0.0}, CellState::Occupied);
    const double hw = p.corridor_width / 2;
    for (const auto& e : edges) {
        const Vec2 a = node_pos(e.a), b = node_pos(e.b);
        detail::Rect r = detail::rect_of(a, b);
        r.x0 -= hw, r.y0 -= hw, r.x1 += hw, r.y1 += hw;
        detail::fill_rect(grid, r, CellState::Free);
    }

    std::vector<NavLabel> labels;
    for (int k = 0; k < n_nodes; ++k) {
        if (degree[static_cast<std::size_t>(k)] < 3) continue;
        for (const auto& e : edges) {
            if (e.a != k && e.b != k) continue;
            const Vec2 other = node_pos(e.a == k ? e.b : e.a);
            const Vec2 d = other - node_pos(k);
            labels.push_back({Category::Corridor, node_pos(k) + (hw / norm(d)) * d, std::nullopt});
        }
    }
    const auto far_from_labels = [&](Vec2 q) {
        return std::all_of(labels.begin(), labels.end(), [&](const NavLabel& l) { return distance(l.position, q) >= p.min_label_gap; });
    };

    // Rooms along both sides of every corridor.
    std::vector<detail::Edge> room_order = edges;
    std::shuffle(room_order.begin(), room_order.end(), rng);
    for (const auto& e : room_order) {
        const Vec2 a = node_pos(e.a), b = node_pos(e.b);
        const double len = distance(a, b);
        const Vec2 u = (1.0 / len) * (b - a);
        for (const Vec2 n : {Vec2{-u.y, u.x}, Vec2{u.y, -u.x}}) {
            const auto at = [&](double su, double sn) { return a + su * u + sn * n; };
            double s = hw + p.wall;
            while (true) {
                const double rw = draw(p.room_width);
                const double rd = draw(p.room_depth);
                const double slack = rw / 2 - p.door_width / 2 - 0.3;
                const double door_off = (2 * unit(rng) - 1) * std::max(0.0, slack);
                const bool open = unit(rng) < p.p_open;
                if (s + rw + p.wall > len - hw - p.wall) break;
                const double rn0 = hw + p.wall;
                const detail::Rect outer = detail::rect_of(at(s - p.wall, hw + p.resolution), at(s + rw + p.wall, rn0 + rd + p.wall));
                const double dc = s + rw / 2 + door_off;
                const Vec2 label_pos = at(dc, hw + p.wall / 2);
                const bool inside_map = outer.x0 > 1.0 && outer.y0 > 1.0 && outer.x1 < W - 1.0 && outer.y1 < H - 1.0;
                if (!inside_map || !detail::all_occupied(grid, outer) || !far_from_labels(label_pos)) {
                    s += 0.5;
                    continue;
                }
                detail::fill_rect(grid, detail::rect_of(at(s, rn0), at(s + rw, rn0 + rd)), CellState::Free);
                const double depth = open ? p.wall + p.resolution : p.closed_recess;
                detail::fill_rect(grid, detail::rect_of(at(dc - p.door_width / 2, hw - p.resolution), at(dc + p.door_width / 2, hw + depth)),
                                  CellState::Free);
                NavLabel l{open ? Category::OpenRoom : Category::ClosedRoom, label_pos, std::nullopt};
                if (open) {
                    // Counter-clockwise swing from the frame direction goes into the room.
                    const Vec2 f{n.y, -n.x};
                    l.door = DoorGeometry{at(dc, rn0) - (p.door_width / 2) * f, p.door_width, std::atan2(f.y, f.x)};
                }
                labels.push_back(l);
                s += rw + p.wall + 0.5;
            }
        }
    }

    // Trajectory: depth-first walk that drives every corridor once in each
    // direction, with a laterally jittered midpoint on each pass.
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n_nodes));
    for (std::size_t i = 0; i < edges.size(); ++i) {
        adj[static_cast<std::size_t>(edges[i].a)].push_back(static_cast<int>(i));
        adj[static_cast<std::size_t>(edges[i].b)].push_back(static_cast<int>(i));
    }
    for (auto& v : adj) std::shuffle(v.begin(), v.end(), rng);
    std::vector<bool> edge_done(edges.size(), false), node_seen(static_cast<std::size_t>(n_nodes), false);
    Trajectory traj;
    const auto lateral = [&](Vec2 from, Vec2 to) {
        const Vec2 d = (1.0 / distance(from, to)) * (to - from);
        const double j = (2 * unit(rng) - 1) * p.lateral_jitter;
        return 0.5 * (from + to) + j * Vec2{-d.y, d.x};
    };
    std::vector<int> start_candidates;
    for (int k = 0; k < n_nodes; ++k)
        if (degree[static_cast<std::size_t>(k)] > 0) start_candidates.push_back(k);
    const int start = start_candidates[static_cast<std::size_t>(unit(rng) * static_cast<double>(start_candidates.size())) % start_candidates.size()];
    traj.waypoints.push_back(node_pos(start));
    const auto visit = [&](auto&& self, int u) -> void {
        node_seen[static_cast<std::size_t>(u)] = true;
        for (int ei : adj[static_cast<std::size_t>(u)]) {
            if (edge_done[static_cast<std::size_t>(ei)]) continue;
            edge_done[static_cast<std::size_t>(ei)] = true;
            const auto& e = edges[static_cast<std::size_t>(ei)];
            const int v = e.a == u ? e.b : e.a;
            traj.waypoints.push_back(lateral(node_pos(u), node_pos(v)));
            traj.waypoints.push_back(node_pos(v));
            if (!node_seen[static_cast<std::size_t>(v)]) self(self, v);
            traj.waypoints.push_back(lateral(node_pos(v), node_pos(u)));
            traj.waypoints.push_back(node_pos(u));
        }
    };
    visit(visit, start);

    GeneratedWorld out{WorldMap{std::move(grid), std::move(labels), name}, std::move(traj)};
    out.world.validate();
    validate_trajectory_on_map(out.world.grid, out.trajectory);
    return out;
}

// ---------------------------------------------------------------------------
// Map suite on disk
// ---------------------------------------------------------------------------

struct SuiteEntry {
    std::string name;
    std::string split;  // train | validation | test
    std::filesystem::path image, metadata, labels, trajectory;
};

struct MapSuite {
    std::filesystem::path root;
    std::vector<SuiteEntry> maps;
};

inline void check_split(const std::string& s) {
    if (s != "train" && s != "validation" && s != "test")
        throw Error("split must be train, validation or test (got '" + s + "')");
}

inline void save_world(const std::filesystem::path& dir, const GeneratedWorld& g, SuiteEntry& e) {
    e.image = e.name + ".pgm";
    e.metadata = e.name + ".json";
    e.labels = e.name + ".labels.json";
    e.trajectory = e.name + ".traj.json";
    save_map(g.world.grid, dir / e.image, dir / e.metadata);
    save_labels(dir / e.labels, g.world.labels);
    save_trajectory(dir / e.trajectory, g.trajectory);
}

inline void save_suite(const MapSuite& s, const nlohmann::json& params = nlohmann::json::object()) {
    nlohmann::json maps = nlohmann::json::array();
    for (const auto& m : s.maps)
        maps.push_back({{"name", m.name},
                        {"split", m.split},
                        {"image", m.image.string()},
                        {"metadata", m.metadata.string()},
                        {"labels", m.labels.string()},
                        {"trajectory", m.trajectory.string()}});
    write_text_atomic(s.root / "suite.json", nlohmann::json{{"maps", maps}, {"params", params}}.dump(2) + "\n");
}

inline MapSuite load_suite(const std::filesystem::path& manifest) {
    MapSuite s;
    s.root = manifest.parent_path();
    try {
        const auto j = nlohmann::json::parse(read_text(manifest));
        for (const auto& m : j.at("maps")) {
            SuiteEntry e{m.at("name").get<std::string>(), m.at("split").get<std::string>(),
                         m.at("image").get<std::string>(), m.at("metadata").get<std::string>(),
                         m.at("labels").get<std::string>(), m.at("trajectory").get<std::string>()};
            check_split(e.split);
            s.maps.push_back(e);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("suite manifest '" + manifest.string() + "': " + e.what());
    }
    return s;
}

inline WorldMap load_world(const MapSuite& s, const SuiteEntry& e) {
    WorldMap w{load_map(s.root / e.image, s.root / e.metadata), {}, e.name};
    w.labels = load_labels(s.root / e.labels, &w.grid);
    return w;
}

}  // namespace gridnav
