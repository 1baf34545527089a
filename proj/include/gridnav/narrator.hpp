#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"
#include "gridnav/tracker.hpp"

namespace gridnav {

enum class Side { Left, Front, Right };

inline const char* to_string(Side s) {
    switch (s) {
        case Side::Left: return "left";
        case Side::Front: return "front";
        case Side::Right: return "right";
    }
    return "?";
}

/// Bearing of a robot-frame point from the heading, positive to the right.
inline double bearing_q(Vec2 robot) { return std::atan2(robot.x, robot.y); }

/// Open intervals; everything else is silent.
inline std::optional<Side> side_for(double q) {
    const double d = rad2deg(q);
    if (d > -120.0 && d < -50.0) return Side::Left;
    if (d > -30.0 && d < 30.0) return Side::Front;
    if (d > 50.0 && d < 120.0) return Side::Right;
    return std::nullopt;
}

struct Utterance {
    Category category = Category::ClosedRoom;
    Side side = Side::Front;
    double q = 0.0;
    double distance = 0.0;
    std::uint64_t feature_id = 0;
    double t = 0.0;
};

struct NarratorConfig {
    double radius = 5.0;
};

/// Per-feature announcement memory. A feature is announced once per entry
/// into the disc, and again if its category changes while inside.
struct AnnouncementState {
    struct Entry {
        bool inside = false;
        std::optional<Category> announced;
    };
    std::map<std::uint64_t, Entry> entries;
};

inline std::vector<Utterance> narrate(const Pose& robot, const std::vector<TrackedFeature>& features,
                                      AnnouncementState& state, double t = 0.0, const NarratorConfig& cfg = {}) {
    std::vector<Utterance> out;
    for (const auto& f : features) {
        auto& e = state.entries[f.id];
        const Vec2 r = world_to_robot(robot, f.position);
        const double d = norm(r);
        if (d > cfg.radius) {
            e.inside = false;
            e.announced.reset();
            continue;
        }
        e.inside = true;
        if (e.announced == f.category) continue;
        const double q = bearing_q(r);
        const auto side = side_for(q);
        if (!side) continue;
        e.announced = f.category;
        out.push_back({f.category, *side, q, d, f.id, t});
    }
    return out;
}

inline std::string category_phrase(Category c) {
    switch (c) {
        case Category::ClosedRoom: return "Closed-room";
        case Category::OpenRoom: return "Open-room";
        case Category::Corridor: return "Corridor";
    }
    return "?";
}

inline std::string format_utterance(const Utterance& u) {
    return category_phrase(u.category) + " on the " + to_string(u.side);
}

/// One sentence per utterance, except that corridors announced in the same
/// call are folded into one sentence listing their sides.
inline std::vector<std::string> format_utterances(const std::vector<Utterance>& us) {
    std::vector<std::string> out;
    std::vector<const Utterance*> corridors;
    for (const auto& u : us) {
        if (u.category == Category::Corridor)
            corridors.push_back(&u);
        else
            out.push_back(format_utterance(u));
    }
    if (corridors.size() == 1) {
        out.push_back(format_utterance(*corridors.front()));
    } else if (corridors.size() > 1) {
        std::vector<std::string> sides;
        for (Side s : {Side::Left, Side::Front, Side::Right})
            for (const auto* u : corridors)
                if (u->side == s) {
                    sides.emplace_back(to_string(s));
                    break;
                }
        std::string list = sides[0];
        for (std::size_t i = 1; i < sides.size(); ++i) list += (i + 1 == sides.size() ? " and " : ", ") + sides[i];
        out.push_back("corridors on the " + list);
    }
    return out;
}

inline nlohmann::json utterance_to_json(const Utterance& u) {
    return {{"t", u.t},
            {"feature", u.feature_id},
            {"category", std::string(to_string(u.category))},
            {"side", to_string(u.side)},
            {"q_deg", rad2deg(u.q)},
            {"distance_m", u.distance},
            {"text", format_utterance(u)}};
}

}  // namespace gridnav
