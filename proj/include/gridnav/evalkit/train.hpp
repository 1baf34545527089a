#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/augment.hpp"
#include "gridnav/detector.hpp"
#include "gridnav/evalkit/dataset.hpp"
#include "gridnav/evalkit/metrics.hpp"
#include "gridnav/nn/adadelta.hpp"
#include "gridnav/nn/net.hpp"
#include "gridnav/nn/weights_io.hpp"

namespace gridnav {

using Net = nn::DetectorNet<float>;

/// Eval-mode detection tensors for a batch of views.
inline std::vector<DetectionTensor> predict(Net& net, Variant variant, const std::vector<const ViewSample*>& views) {
    std::vector<DetectionTensor> out;
    if (views.empty()) return out;
    const int n = static_cast<int>(views.size());
    nn::Tensor4<float> a(net.input_shape(n)), b(net.input_shape(n));
    for (int i = 0; i < n; ++i) write_inputs(variant, views[static_cast<std::size_t>(i)]->laser, views[static_cast<std::size_t>(i)]->gmap, a, b, i);
    const auto logits = net.forward(a, b, nn::Mode::Eval);
    for (int i = 0; i < n; ++i) out.push_back(activate(logits, i));
    return out;
}

struct TrainConfig {
    Variant variant = Variant::Combined;
    int epochs = 10;
    int batch_size = 60;
    std::uint64_t seed = 0;
    LossWeights weights{};
    AugmentPolicy policy{};
    bool augment = true;
    double rho = 0.95;
    double eps = 1e-6;
    double lr = 1.0;

    void validate() const {
        if (epochs < 1) throw Error("epochs must be >= 1");
        if (batch_size < 1) throw Error("batch size must be >= 1");
        weights.validate();
        policy.validate();
    }
};

struct EpochLog {
    int epoch = 0;
    LossTerms train;
    double val_loss = 0.0;
};

struct TrainResult {
    std::unique_ptr<Net> best;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    double initial_loss = 0.0;  // first mini-batch, before any update
    std::vector<EpochLog> epochs;
    nlohmann::json log;
};

using TrainProgress = std::function<void(const EpochLog&)>;

/// Mean per-sample validation loss in eval mode, without augmentation.
inline double validation_loss(Net& net, Variant variant, const std::vector<ViewSample>& views, const LossWeights& w,
                              int batch = 32) {
    double total = 0.0;
    for (std::size_t i = 0; i < views.size(); i += static_cast<std::size_t>(batch)) {
        std::vector<const ViewSample*> b;
        for (std::size_t k = i; k < std::min(views.size(), i + static_cast<std::size_t>(batch)); ++k) b.push_back(&views[k]);
        const auto preds = predict(net, variant, b);
        for (std::size_t k = 0; k < preds.size(); ++k) total += detection_loss(preds[k], encode_targets(b[k]->labels), w).total;
    }
    return views.empty() ? 0.0 : total / static_cast<double>(views.size());
}

/// Mini-batch Adadelta with on-the-fly augmentation; keeps the weights of
/// the epoch with the lowest validation loss (earliest on ties).
inline TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val_set, const nn::NetSpec& spec,
                         const TrainConfig& cfg, const TrainProgress& progress = {}) {
    cfg.validate();
    if (train_set.empty()) throw Error("training split is empty");
    if (val_set.empty()) throw Error("validation split is empty");
    const int px = spec.input_size;

    std::mt19937_64 rng(cfg.seed);
    auto net = std::make_unique<Net>(spec, derive_seed(cfg.seed, 1));
    nn::Adadelta<float> opt(cfg.rho, cfg.eps, cfg.lr);
    const auto params = net->params();

    std::vector<ViewSample> val_views;
    val_views.reserve(val_set.size());
    for (const auto& s : val_set) val_views.push_back(plain_view(s, px));

    TrainResult res;
    res.best = std::make_unique<Net>(spec, 0);
    res.best_val_loss = std::numeric_limits<double>::infinity();
    bool first = true;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochLog log;
        log.epoch = epoch;
        double seen = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const int n = static_cast<int>(end - start);
            nn::Tensor4<float> a(net->input_shape(n)), b(net->input_shape(n));
            std::vector<DetectionTensor> targets;
            for (std::size_t k = start; k < end; ++k) {
                const Sample& s = train_set[order[k]];
                const ViewSample v = cfg.augment ? random_augment(s, cfg.policy, rng, px) : plain_view(s, px);
                write_inputs(cfg.variant, v.laser, v.gmap, a, b, static_cast<int>(k - start));
                targets.push_back(encode_targets(v.labels));
            }
            nn::ForwardCache<float> cache;
            const auto logits = net->forward(a, b, nn::Mode::Train, cache);
            const auto lg = detection_loss_with_grad(logits, targets, cfg.weights);
            if (!std::isfinite(lg.terms.total))
                throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", sample offset " +
                            std::to_string(start));
            if (first) {
                res.initial_loss = lg.terms.total;
                first = false;
            }
            net->zero_grad();
            net->backward(cache, lg.grad);
            opt.step(params);
            net->bump_version();
            log.train.total += lg.terms.total * n;
            log.train.xent += lg.terms.xent * n;
            log.train.coord += lg.terms.coord * n;
            log.train.conf += lg.terms.conf * n;
            seen += n;
        }
        log.train.total /= seen;
        log.train.xent /= seen;
        log.train.coord /= seen;
        log.train.conf /= seen;
        log.val_loss = validation_loss(*net, cfg.variant, val_views, cfg.weights);
        if (!std::isfinite(log.val_loss)) throw Error("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
        if (log.val_loss < res.best_val_loss) {
            res.best_val_loss = log.val_loss;
            res.best_epoch = epoch;
            nn::copy_state(*res.best, *net);
        }
        res.epochs.push_back(log);
        if (progress) progress(log);
    }

    nlohmann::json epochs = nlohmann::json::array();
    for (const auto& e : res.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train.total},
                          {"train_xent", e.train.xent},
                          {"train_coord", e.train.coord},
                          {"train_conf", e.train.conf},
                          {"val_loss", e.val_loss}});
    res.log = {{"seed", cfg.seed},
               {"variant", to_string(cfg.variant)},
               {"alpha", {cfg.weights.xent, cfg.weights.coord, cfg.weights.conf}},
               {"batch_size", cfg.batch_size},
               {"epochs", epochs},
               {"initial_loss", res.initial_loss},
               {"best_epoch", res.best_epoch},
               {"best_val_loss", res.best_val_loss},
               {"train_frames", train_set.size()},
               {"validation_frames", val_set.size()},
               {"augment", cfg.augment ? policy_to_json(cfg.policy) : nlohmann::json(nullptr)},
               {"optimizer", {{"name", "adadelta"}, {"rho", cfg.rho}, {"eps", cfg.eps}, {"lr", cfg.lr}}},
               {"netspec", nn::to_json(spec)}};
    return res;
}

inline std::vector<Sample> load_split(const DatasetIndex& idx, const std::string& split) {
    std::vector<Sample> out;
    for (const auto* r : idx.split(split)) out.push_back(load_sample(idx, *r));
    return out;
}

// ---------------------------------------------------------------------------
// Per-frame evaluation
// ---------------------------------------------------------------------------

inline std::vector<PointLabel> points_of(const std::vector<NavLabel>& labels) {
    std::vector<PointLabel> p;
    for (const auto& l : labels) p.push_back({l.category, l.position});
    return p;
}

inline std::vector<PointLabel> points_of(const std::vector<Detection>& dets, bool robot_frame) {
    std::vector<PointLabel> p;
    for (const auto& d : dets) p.push_back({d.category, robot_frame ? d.robot_position : d.position});
    return p;
}

/// Decodes every frame of a split and matches it against its in-window labels.
inline MetricsReport eval_frames(Net& net, Variant variant, const std::vector<Sample>& samples, double tau = 0.5,
                                 double radius = 0.5, int batch = 32) {
    MetricsReport rep;
    const int px = net.spec().input_size;
    for (std::size_t i = 0; i < samples.size(); i += static_cast<std::size_t>(batch)) {
        std::vector<ViewSample> views;
        for (std::size_t k = i; k < std::min(samples.size(), i + static_cast<std::size_t>(batch)); ++k)
            views.push_back(plain_view(samples[k], px));
        std::vector<const ViewSample*> ptrs;
        for (const auto& v : views) ptrs.push_back(&v);
        const auto preds = predict(net, variant, ptrs);
        for (std::size_t k = 0; k < preds.size(); ++k) {
            const auto dets = decode(preds[k], samples[i + k].pose, tau);
            rep.accumulate(points_of(dets, true), points_of(views[k].labels), radius);
        }
    }
    rep.finalize();
    rep.meta["variant"] = to_string(variant);
    rep.meta["tau"] = tau;
    rep.meta["radius_m"] = radius;
    rep.meta["frames"] = samples.size();
    return rep;
}

}  // namespace gridnav
