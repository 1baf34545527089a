#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/augment.hpp"
#include "gridnav/core.hpp"
#include "gridnav/gridworld.hpp"
#include "gridnav/mapper.hpp"
#include "gridnav/nn/tensor.hpp"

namespace gridnav {

inline constexpr int kGridSize = 5;
inline constexpr int kCellChannels = 3 + kNumCategories;  // confidence, x, y, categories

/// One grid cell: Pr(Object), center offset from the cell's top-left corner
/// in cell units, and Pr(category | Object).
struct CellVector {
    double confidence = 0.0;
    double x = 0.5;
    double y = 0.5;
    std::array<double, kNumCategories> category{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

    friend bool operator==(const CellVector&, const CellVector&) = default;
};

/// S x S grid over the 8 m network window, row-major from the image top-left.
struct DetectionTensor {
    int grid = kGridSize;
    std::vector<CellVector> cells = std::vector<CellVector>(static_cast<std::size_t>(kGridSize * kGridSize));

    CellVector& at(int row, int col) { return cells[static_cast<std::size_t>(row * grid + col)]; }
    const CellVector& at(int row, int col) const { return cells[static_cast<std::size_t>(row * grid + col)]; }
    int object_count() const {
        return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const CellVector& c) { return c.confidence > 0.5; }));
    }
};

struct GridPoint {
    int row = 0;
    int col = 0;
    double x = 0.0;  // offset within the cell, [0, 1)
    double y = 0.0;
};

/// Robot-frame point -> grid cell and offset. Points on a cell edge go to the
/// higher index, matching OccupancyGrid::world_to_cell.
inline GridPoint grid_point(Vec2 robot, int S = kGridSize, double window = kWindowExtent) {
    const double u = (robot.x + window / 2.0) / window * S;
    const double v = (window - robot.y) / window * S;
    GridPoint g;
    g.col = static_cast<int>(std::floor(u));
    g.row = static_cast<int>(std::floor(v));
    g.x = u - g.col;
    g.y = v - g.row;
    return g;
}

inline Vec2 grid_to_robot(int row, int col, double x, double y, int S = kGridSize, double window = kWindowExtent) {
    const double u = (col + x) / S;
    const double v = (row + y) / S;
    return {u * window - window / 2.0, window - v * window};
}

struct LossWeights {
    double xent = 0.61;
    double coord = 0.14;
    double conf = 0.25;

    void validate() const {
        if (xent < 0 || coord < 0 || conf < 0) throw Error("loss weights must be non-negative");
        if (std::abs(xent + coord + conf - 1.0) > 1e-9) throw Error("loss weights must sum to 1");
    }
};

/// Each label marks its containing cell. When two labels share a cell the one
/// nearer the cell center wins; ties go to the lower label index.
inline DetectionTensor encode_targets(const std::vector<NavLabel>& robot_labels, double window = kWindowExtent,
                                      int S = kGridSize) {
    DetectionTensor t;
    t.grid = S;
    t.cells.assign(static_cast<std::size_t>(S * S), CellVector{});
    std::vector<double> best(static_cast<std::size_t>(S * S), std::numeric_limits<double>::infinity());
    for (const auto& l : robot_labels) {
        const GridPoint g = grid_point(l.position, S, window);
        if (g.row < 0 || g.col < 0 || g.row >= S || g.col >= S)
            throw Error("encode_targets: label outside the network window");
        const double d = std::hypot(g.x - 0.5, g.y - 0.5);
        auto& slot = best[static_cast<std::size_t>(g.row * S + g.col)];
        if (d < slot) {
            slot = d;
            CellVector& c = t.at(g.row, g.col);
            c.confidence = 1.0;
            c.x = g.x;
            c.y = g.y;
            c.category = {0.0, 0.0, 0.0};
            c.category[static_cast<std::size_t>(index_of(l.category))] = 1.0;
        }
    }
    return t;
}

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// Head activations for sample n of a (N, 6, S, S) logit tensor: logistic on
/// confidence and offsets, softmax over category logits.
template <class T>
DetectionTensor activate(const nn::Tensor4<T>& logits, int n = 0) {
    if (logits.c() != kCellChannels || logits.h() != logits.w())
        throw Error("head output must be (N, 6, S, S), got " + logits.shape().str());
    DetectionTensor d;
    d.grid = logits.h();
    d.cells.assign(static_cast<std::size_t>(d.grid * d.grid), CellVector{});
    for (int i = 0; i < d.grid; ++i) {
        for (int j = 0; j < d.grid; ++j) {
            CellVector& c = d.at(i, j);
            c.confidence = sigmoid(logits(n, 0, i, j));
            c.x = sigmoid(logits(n, 1, i, j));
            c.y = sigmoid(logits(n, 2, i, j));
            double m = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < kNumCategories; ++k) m = std::max(m, static_cast<double>(logits(n, 3 + k, i, j)));
            double z = 0.0;
            for (int k = 0; k < kNumCategories; ++k) z += std::exp(logits(n, 3 + k, i, j) - m);
            for (int k = 0; k < kNumCategories; ++k)
                c.category[static_cast<std::size_t>(k)] = std::exp(logits(n, 3 + k, i, j) - m) / z;
        }
    }
    return d;
}

struct LossTerms {
    double total = 0.0;
    double xent = 0.0;
    double coord = 0.0;
    double conf = 0.0;
};

/// Weighted loss on activated predictions. Cross-entropy and coordinate
/// terms cover object cells only (mean over cells, and over the 2 offsets);
/// the confidence term covers every cell.
inline LossTerms detection_loss(const DetectionTensor& pred, const DetectionTensor& target, const LossWeights& w) {
    if (pred.grid != target.grid || pred.cells.size() != target.cells.size()) throw Error("loss: grid size mismatch");
    LossTerms L;
    int n_obj = 0;
    for (std::size_t k = 0; k < pred.cells.size(); ++k) {
        const auto& p = pred.cells[k];
        const auto& t = target.cells[k];
        L.conf += (p.confidence - t.confidence) * (p.confidence - t.confidence);
        if (t.confidence > 0.5) {
            ++n_obj;
            L.coord += (p.x - t.x) * (p.x - t.x) + (p.y - t.y) * (p.y - t.y);
            for (int c = 0; c < kNumCategories; ++c) {
                const double tc = t.category[static_cast<std::size_t>(c)];
                if (tc > 0.0) L.xent -= tc * std::log(p.category[static_cast<std::size_t>(c)]);
            }
        }
    }
    L.conf /= static_cast<double>(pred.cells.size());
    if (n_obj > 0) {
        L.coord /= 2.0 * n_obj;
        L.xent /= n_obj;
    }
    L.total = w.xent * L.xent + w.coord * L.coord + w.conf * L.conf;
    return L;
}

template <class T>
struct LossAndGrad {
    LossTerms terms;            // batch means
    nn::Tensor4<T> grad;        // d(total)/d(logits)
};

/// Batch-mean loss on head logits with its exact gradient.
template <class T>
LossAndGrad<T> detection_loss_with_grad(const nn::Tensor4<T>& logits, const std::vector<DetectionTensor>& targets,
                                        const LossWeights& w) {
    if (static_cast<int>(targets.size()) != logits.n()) throw Error("loss: batch size mismatch");
    LossAndGrad<T> out;
    out.grad = nn::Tensor4<T>(logits.shape());
    const int S = logits.h();
    const double B = logits.n();
    for (int n = 0; n < logits.n(); ++n) {
        const auto& target = targets[static_cast<std::size_t>(n)];
        if (target.grid != S) throw Error("loss: grid size mismatch");
        const DetectionTensor pred = activate(logits, n);
        const LossTerms L = detection_loss(pred, target, w);
        out.terms.total += L.total / B;
        out.terms.xent += L.xent / B;
        out.terms.coord += L.coord / B;
        out.terms.conf += L.conf / B;
        const int n_obj = std::max(1, target.object_count());
        const double n_cells = S * S;
        for (int i = 0; i < S; ++i) {
            for (int j = 0; j < S; ++j) {
                const auto& p = pred.at(i, j);
                const auto& t = target.at(i, j);
                const double sc = p.confidence;
                out.grad(n, 0, i, j) = static_cast<T>(w.conf * 2.0 / n_cells * (sc - t.confidence) * sc * (1.0 - sc) / B);
                if (t.confidence > 0.5) {
                    out.grad(n, 1, i, j) = static_cast<T>(w.coord / n_obj * (p.x - t.x) * p.x * (1.0 - p.x) / B);
                    out.grad(n, 2, i, j) = static_cast<T>(w.coord / n_obj * (p.y - t.y) * p.y * (1.0 - p.y) / B);
                    double tsum = 0.0;
                    for (double v : t.category) tsum += v;
                    for (int c = 0; c < kNumCategories; ++c)
                        out.grad(n, 3 + c, i, j) = static_cast<T>(
                            w.xent / n_obj *
                            (tsum * p.category[static_cast<std::size_t>(c)] - t.category[static_cast<std::size_t>(c)]) / B);
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

struct Detection {
    Category category = Category::ClosedRoom;
    Vec2 robot_position{};  // anchor frame
    Vec2 position{};        // world frame
    double probability = 0.0;
    int row = 0;
    int col = 0;
    std::array<double, kNumCategories> class_probability{};  // Pr(c | Object) * Pr(Object)
};

/// Final probability per category is Pr(c | Object) * Pr(Object); each cell
/// emits its argmax category when that product reaches tau.
inline std::vector<Detection> decode(const DetectionTensor& pred, const Pose& anchor, double tau = 0.5,
                                     double window = kWindowExtent) {
    if (tau < 0.0 || tau > 1.0) throw Error("decode threshold must be in [0, 1]");
    std::vector<Detection> out;
    for (int i = 0; i < pred.grid; ++i) {
        for (int j = 0; j < pred.grid; ++j) {
            const CellVector& c = pred.at(i, j);
            Detection d;
            int best = 0;
            for (int k = 0; k < kNumCategories; ++k) {
                d.class_probability[static_cast<std::size_t>(k)] = c.category[static_cast<std::size_t>(k)] * c.confidence;
                if (d.class_probability[static_cast<std::size_t>(k)] > d.class_probability[static_cast<std::size_t>(best)]) best = k;
            }
            d.probability = d.class_probability[static_cast<std::size_t>(best)];
            if (d.probability < tau) continue;
            d.category = kAllCategories[static_cast<std::size_t>(best)];
            d.row = i;
            d.col = j;
            d.robot_position = grid_to_robot(i, j, c.x, c.y, pred.grid, window);
            d.position = robot_to_world(anchor, d.robot_position);
            out.push_back(d);
        }
    }
    return out;
}

inline nlohmann::json detection_to_json(const Detection& d, double t) {
    return {{"t", t},
            {"category", std::string(to_string(d.category))},
            {"x_m", d.position.x},
            {"y_m", d.position.y},
            {"p", d.probability},
            {"cell", {d.row, d.col}}};
}

}  // namespace gridnav
