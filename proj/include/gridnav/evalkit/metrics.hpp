#pragma once

#include <algorithm>
#include <array>
#include <iomanip>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "gridnav/core.hpp"

namespace gridnav {

struct PointLabel {
    Category category = Category::ClosedRoom;
    Vec2 position{};
};

struct MatchResult {
    std::vector<std::pair<int, int>> matches;  // (prediction, truth)
    std::vector<int> unmatched_predictions;
    std::vector<int> unmatched_truths;
};

/// Greedy by ascending distance over same-category pairs within `radius`.
/// Ties resolve by prediction index, then truth index.
inline MatchResult greedy_match(const std::vector<PointLabel>& preds, const std::vector<PointLabel>& truths,
                                double radius = 0.5) {
    std::vector<std::tuple<double, int, int>> pairs;
    for (int i = 0; i < static_cast<int>(preds.size()); ++i)
        for (int j = 0; j < static_cast<int>(truths.size()); ++j) {
            if (preds[static_cast<std::size_t>(i)].category != truths[static_cast<std::size_t>(j)].category) continue;
            const double d = distance(preds[static_cast<std::size_t>(i)].position, truths[static_cast<std::size_t>(j)].position);
            if (d <= radius) pairs.emplace_back(d, i, j);
        }
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> pu(preds.size(), false), tu(truths.size(), false);
    MatchResult r;
    for (auto [d, i, j] : pairs) {
        if (pu[static_cast<std::size_t>(i)] || tu[static_cast<std::size_t>(j)]) continue;
        pu[static_cast<std::size_t>(i)] = tu[static_cast<std::size_t>(j)] = true;
        r.matches.emplace_back(i, j);
    }
    for (int i = 0; i < static_cast<int>(preds.size()); ++i)
        if (!pu[static_cast<std::size_t>(i)]) r.unmatched_predictions.push_back(i);
    for (int j = 0; j < static_cast<int>(truths.size()); ++j)
        if (!tu[static_cast<std::size_t>(j)]) r.unmatched_truths.push_back(j);
    return r;
}

struct CategoryMetrics {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    /// Undefined ratios are reported as 0.
    void finalize() {
        precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        f1 = f1_score(precision, recall);
    }

    static double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }
};

struct MetricsReport {
    std::array<CategoryMetrics, kNumCategories> per_category{};
    nlohmann::json meta = nlohmann::json::object();

    CategoryMetrics& operator[](Category c) { return per_category[static_cast<std::size_t>(index_of(c))]; }
    const CategoryMetrics& operator[](Category c) const { return per_category[static_cast<std::size_t>(index_of(c))]; }

    /// Adds one frame (or one map) worth of matches to the counts.
    void accumulate(const std::vector<PointLabel>& preds, const std::vector<PointLabel>& truths, double radius = 0.5) {
        const MatchResult m = greedy_match(preds, truths, radius);
        for (auto [i, j] : m.matches) ++(*this)[preds[static_cast<std::size_t>(i)].category].tp;
        for (int i : m.unmatched_predictions) ++(*this)[preds[static_cast<std::size_t>(i)].category].fp;
        for (int j : m.unmatched_truths) ++(*this)[truths[static_cast<std::size_t>(j)].category].fn;
    }

    void finalize() {
        for (auto& c : per_category) c.finalize();
    }

    double mean_f1() const {
        double s = 0.0;
        for (const auto& c : per_category) s += c.f1;
        return s / kNumCategories;
    }
};

/// Counts are summed; precision, recall and F1 are arithmetic means of the
/// per-report values.
inline MetricsReport average_reports(const std::vector<MetricsReport>& reps) {
    MetricsReport out;
    if (reps.empty()) return out;
    for (const auto& r : reps) {
        for (std::size_t k = 0; k < kNumCategories; ++k) {
            auto& o = out.per_category[k];
            const auto& c = r.per_category[k];
            o.tp += c.tp;
            o.fp += c.fp;
            o.fn += c.fn;
            o.precision += c.precision;
            o.recall += c.recall;
            o.f1 += c.f1;
        }
    }
    const double n = static_cast<double>(reps.size());
    for (auto& o : out.per_category) {
        o.precision /= n;
        o.recall /= n;
        o.f1 /= n;
    }
    out.meta["repetitions"] = reps.size();
    return out;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
    nlohmann::json cats = nlohmann::json::object();
    for (auto c : kAllCategories) {
        const auto& m = r[c];
        cats[std::string(to_string(c))] = {{"tp", m.tp},
                                           {"fp", m.fp},
                                           {"fn", m.fn},
                                           {"precision", m.precision},
                                           {"recall", m.recall},
                                           {"f1", m.f1}};
    }
    return {{"categories", cats}, {"meta", r.meta}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
    MetricsReport r;
    for (auto c : kAllCategories) {
        const auto& m = j.at("categories").at(std::string(to_string(c)));
        auto& o = r[c];
        o.tp = m.at("tp").get<long>();
        o.fp = m.at("fp").get<long>();
        o.fn = m.at("fn").get<long>();
        o.precision = m.at("precision").get<double>();
        o.recall = m.at("recall").get<double>();
        o.f1 = m.at("f1").get<double>();
    }
    r.meta = j.value("meta", nlohmann::json::object());
    return r;
}

/// Recall / Precision / F1 rows with one column per category.
inline std::string report_table(const MetricsReport& r, const std::string& title = "") {
    std::ostringstream o;
    if (!title.empty()) o << title << "\n";
    o << std::left << std::setw(11) << "";
    for (auto c : kAllCategories) o << std::right << std::setw(13) << to_string(c);
    o << "\n";
    const auto row = [&](const char* name, auto get) {
        o << std::left << std::setw(11) << name;
        for (auto c : kAllCategories) o << std::right << std::setw(13) << std::fixed << std::setprecision(3) << get(r[c]);
        o << "\n";
    };
    row("Recall", [](const CategoryMetrics& m) { return m.recall; });
    row("Precision", [](const CategoryMetrics& m) { return m.precision; });
    row("F1", [](const CategoryMetrics& m) { return m.f1; });
    o << std::left << std::setw(11) << "TP/FP/FN";
    for (auto c : kAllCategories) {
        std::ostringstream cell;
        cell << r[c].tp << "/" << r[c].fp << "/" << r[c].fn;
        o << std::right << std::setw(13) << cell.str();
    }
    o << "\n";
    return o.str();
}

}  // namespace gridnav
