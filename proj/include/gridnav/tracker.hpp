#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"
#include "gridnav/detector.hpp"

namespace gridnav {

struct TrackerConfig {
    double radius = 1.0;     // m
    double lifetime = 30.0;  // s

    void validate() const {
        if (!(radius > 0.0)) throw Error("tracker radius must be positive");
        if (!(lifetime > 0.0)) throw Error("tracker lifetime must be positive");
    }
};

struct Observation {
    Category category = Category::ClosedRoom;
    Vec2 position{};
    double probability = 0.0;
    double t = 0.0;
};

inline Observation observation_of(const Detection& d, double t) { return {d.category, d.position, d.probability, t}; }

struct TrackedFeature {
    std::uint64_t id = 0;
    std::vector<Observation> members;
    Category category = Category::ClosedRoom;
    Vec2 position{};
    std::array<double, kNumCategories> mean_probability{};
    std::array<int, kNumCategories> count{};
    double created_at = 0.0;
    double last_seen = 0.0;

    /// Per-category means are over the members that reported that category.
    /// Argmax ties go to the lower category index.
    void aggregate() {
        mean_probability.fill(0.0);
        count.fill(0);
        std::array<Vec2, kNumCategories> sum{};
        for (const auto& m : members) {
            const auto k = static_cast<std::size_t>(index_of(m.category));
            mean_probability[k] += m.probability;
            sum[k] = sum[k] + m.position;
            ++count[k];
        }
        std::size_t best = 0;
        for (std::size_t k = 0; k < kNumCategories; ++k) {
            if (count[k] > 0) mean_probability[k] /= count[k];
            if (count[k] > 0 && (count[best] == 0 || mean_probability[k] > mean_probability[best])) best = k;
        }
        category = kAllCategories[best];
        if (count[best] > 0) position = (1.0 / count[best]) * sum[best];
        last_seen = -std::numeric_limits<double>::infinity();
        for (const auto& m : members) last_seen = std::max(last_seen, m.t);
    }
};

/// Greedy online clustering: each detection joins the nearest cluster whose
/// aggregated position is within the radius, otherwise it starts a new one.
/// The result depends on detection order.
class Tracker {
public:
    explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    const TrackerConfig& config() const { return cfg_; }
    const std::vector<TrackedFeature>& features() const { return features_; }
    double last_time() const { return last_t_; }

    void integrate(const std::vector<Detection>& detections, double t) {
        std::vector<Observation> obs;
        obs.reserve(detections.size());
        for (const auto& d : detections) obs.push_back(observation_of(d, t));
        integrate(obs, t);
    }

    void integrate(const std::vector<Observation>& obs, double t) {
        if (!std::isfinite(t)) throw Error("tracker: non-finite timestamp");
        if (t < last_t_) throw Error("tracker: time went backwards (" + std::to_string(t) + " < " + std::to_string(last_t_) + ")");
        last_t_ = t;
        for (Observation o : obs) {
            o.t = t;
            TrackedFeature* best = nullptr;
            double best_d = std::numeric_limits<double>::infinity();
            for (auto& f : features_) {
                const double d = distance(f.position, o.position);
                if (d <= cfg_.radius && d < best_d) {
                    best = &f;
                    best_d = d;
                }
            }
            if (!best) {
                features_.emplace_back();
                best = &features_.back();
                best->id = next_id_++;
                best->created_at = t;
            }
            best->members.push_back(o);
            best->aggregate();
        }
    }

    /// Drops members older than the lifetime (a member exactly lifetime old stays).
    void prune(double now) {
        for (auto& f : features_) {
            const auto before = f.members.size();
            std::erase_if(f.members, [&](const Observation& m) { return now - m.t > cfg_.lifetime; });
            if (f.members.size() != before && !f.members.empty()) f.aggregate();
        }
        std::erase_if(features_, [](const TrackedFeature& f) { return f.members.empty(); });
    }

    std::vector<TrackedFeature> snapshot() const {
        std::vector<TrackedFeature> s = features_;
        std::stable_sort(s.begin(), s.end(), [](const TrackedFeature& a, const TrackedFeature& b) {
            return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
        });
        return s;
    }

private:
    TrackerConfig cfg_;
    std::vector<TrackedFeature> features_;
    std::uint64_t next_id_ = 0;
    double last_t_ = -std::numeric_limits<double>::infinity();
};

inline nlohmann::json feature_to_json(const TrackedFeature& f) {
    nlohmann::json means = nlohmann::json::object();
    for (auto c : kAllCategories) {
        const auto k = static_cast<std::size_t>(index_of(c));
        if (f.count[k] > 0) means[std::string(to_string(c))] = f.mean_probability[k];
    }
    return {{"id", f.id},
            {"category", std::string(to_string(f.category))},
            {"x_m", f.position.x},
            {"y_m", f.position.y},
            {"mean_p", means},
            {"members", f.members.size()},
            {"created_at", f.created_at},
            {"last_seen", f.last_seen}};
}

inline nlohmann::json snapshot_to_json(const std::vector<TrackedFeature>& snap, double t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : snap) arr.push_back(feature_to_json(f));
    return {{"t", t}, {"features", arr}};
}

}  // namespace gridnav
