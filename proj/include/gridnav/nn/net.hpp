#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridnav/nn/layers.hpp"

namespace gridnav::nn {

enum class LayerType { Conv, BatchNorm, ReLU, Residual };

inline std::string to_string(LayerType t) {
    switch (t) {
        case LayerType::Conv: return "conv";
        case LayerType::BatchNorm: return "batchnorm";
        case LayerType::ReLU: return "relu";
        case LayerType::Residual: return "residual";
    }
    return "?";
}

inline LayerType layer_type_from_string(const std::string& s) {
    if (s == "conv") return LayerType::Conv;
    if (s == "batchnorm") return LayerType::BatchNorm;
    if (s == "relu") return LayerType::ReLU;
    if (s == "residual") return LayerType::Residual;
    throw Error("unknown layer type '" + s + "'");
}

struct LayerSpec {
    LayerType type = LayerType::Conv;
    int out_channels = 0;  // conv / residual
    int kernel = 3;        // conv
    int stride = 1;        // conv / residual
    int padding = 1;       // conv

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline nlohmann::json to_json(const LayerSpec& l) {
    nlohmann::json j = {{"type", to_string(l.type)}};
    if (l.type == LayerType::Conv || l.type == LayerType::Residual) {
        j["out"] = l.out_channels;
        j["stride"] = l.stride;
    }
    if (l.type == LayerType::Conv) {
        j["kernel"] = l.kernel;
        j["pad"] = l.padding;
    }
    return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    LayerSpec l;
    l.type = layer_type_from_string(j.at("type").get<std::string>());
    l.out_channels = j.value("out", 0);
    l.stride = j.value("stride", 1);
    l.kernel = j.value("kernel", 3);
    l.padding = j.value("pad", 1);
    return l;
}

/// Two parallel towers (laser, GMap) -> channel concat -> trunk -> head conv.
struct NetSpec {
    int input_size = 244;
    int input_channels = 1;
    std::vector<LayerSpec> tower;
    std::vector<LayerSpec> trunk;
    LayerSpec head{LayerType::Conv, 6, 4, 1, 0};
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    friend bool operator==(const NetSpec&, const NetSpec&) = default;

    /// Default plan: towers of 3 stride-2 residual blocks (16, 32, 64 channels),
    /// trunk of 2 residual blocks (64, 32 channels) with strides chosen so the
    /// trunk ends at 8x8, then a 4x4 valid head conv to 5x5x6.
    static NetSpec for_input(int px) {
        NetSpec s;
        s.input_size = px;
        const auto half = [](int v) { return (v - 1) / 2 + 1; };
        int size = px;
        for (int ch : {16, 32, 64}) {
            s.tower.push_back({LayerType::Residual, ch, 3, 2, 1});
            size = half(size);
        }
        int trunk_strides[2] = {1, 1};
        if (half(half(size)) == 8) {
            trunk_strides[0] = trunk_strides[1] = 2;
        } else if (half(size) == 8) {
            trunk_strides[0] = 2;
        } else if (size != 8) {
            throw Error("input size " + std::to_string(px) + " does not reduce to the 8x8 trunk output");
        }
        s.trunk.push_back({LayerType::Residual, 64, 3, trunk_strides[0], 1});
        s.trunk.push_back({LayerType::Residual, 32, 3, trunk_strides[1], 1});
        return s;
    }
};

inline nlohmann::json to_json(const NetSpec& s) {
    nlohmann::json tower = nlohmann::json::array();
    nlohmann::json trunk = nlohmann::json::array();
    for (const auto& l : s.tower) tower.push_back(to_json(l));
    for (const auto& l : s.trunk) trunk.push_back(to_json(l));
    return {{"input_size", s.input_size}, {"input_channels", s.input_channels}, {"tower", tower}, {"trunk", trunk},
            {"head", to_json(s.head)},    {"bn_momentum", s.bn_momentum},        {"bn_eps", s.bn_eps}};
}

inline NetSpec net_spec_from_json(const nlohmann::json& j) {
    NetSpec s;
    s.input_size = j.at("input_size").get<int>();
    s.input_channels = j.value("input_channels", 1);
    for (const auto& l : j.at("tower")) s.tower.push_back(layer_spec_from_json(l));
    for (const auto& l : j.at("trunk")) s.trunk.push_back(layer_spec_from_json(l));
    s.head = layer_spec_from_json(j.at("head"));
    s.bn_momentum = j.value("bn_momentum", 0.1);
    s.bn_eps = j.value("bn_eps", 1e-5);
    return s;
}

// ---------------------------------------------------------------------------
// Sequential container
// ---------------------------------------------------------------------------

template <class T>
class Sequential final : public Layer<T> {
public:
    Sequential() = default;
    Sequential(std::string name, const std::vector<LayerSpec>& specs, int in_channels, double bn_momentum, double bn_eps)
        : name_(std::move(name)) {
        int ch = in_channels;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const auto& s = specs[i];
            const std::string lname = name_ + "." + std::to_string(i);
            switch (s.type) {
                case LayerType::Conv:
                    layers_.push_back(std::make_unique<Conv2d<T>>(lname, ch, s.out_channels, s.kernel, s.stride, s.padding));
                    ch = s.out_channels;
                    break;
                case LayerType::BatchNorm:
                    layers_.push_back(std::make_unique<BatchNorm2d<T>>(lname, ch, bn_momentum, bn_eps));
                    break;
                case LayerType::ReLU: layers_.push_back(std::make_unique<ReLU<T>>(lname)); break;
                case LayerType::Residual:
                    layers_.push_back(
                        std::make_unique<ResidualBlock<T>>(lname, ch, s.out_channels, s.stride, bn_momentum, bn_eps));
                    ch = s.out_channels;
                    break;
            }
        }
        out_channels_ = ch;
    }

    std::string kind() const override { return "sequential"; }
    int out_channels() const { return out_channels_; }
    std::size_t size() const { return layers_.size(); }
    Layer<T>& at(std::size_t i) { return *layers_[i]; }

    template <class Rng>
    void init(Rng& rng) {
        for (auto& l : layers_) {
            if (auto* c = dynamic_cast<Conv2d<T>*>(l.get())) c->init(rng);
            if (auto* r = dynamic_cast<ResidualBlock<T>*>(l.get())) r->init(rng);
        }
    }

    Shape4 output_shape(const Shape4& in) const override {
        Shape4 s = in;
        for (const auto& l : layers_) s = l->output_shape(s);
        return s;
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode, LayerCache<T>& cache) override {
        cache.mode = mode;
        cache.children.assign(layers_.size(), LayerCache<T>{});
        Tensor4<T> h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, mode, cache.children[i]);
        return h;
    }

    Tensor4<T> backward(const Tensor4<T>& dy, const LayerCache<T>& cache) override {
        if (cache.children.size() != layers_.size()) throw Error(name_ + ": cache does not match layer list");
        Tensor4<T> g = dy;
        for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, cache.children[i]);
        return g;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        for (auto& l : layers_) l->collect_params(out);
    }
    void collect_buffers(std::vector<std::pair<std::string, Tensor4<T>*>>& out) override {
        for (auto& l : layers_) l->collect_buffers(out);
    }

    nlohmann::json describe() const override {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& l : layers_) arr.push_back(l->describe());
        return {{"name", name_}, {"type", "sequential"}, {"layers", arr}};
    }

private:
    std::string name_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    int out_channels_ = 0;
};

// ---------------------------------------------------------------------------
// Two-tower detector network
// ---------------------------------------------------------------------------

inline std::uint64_t next_net_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter++;
}

template <class T>
struct ForwardCache {
    std::uint64_t net_id = 0;
    std::uint64_t version = 0;
    Mode mode = Mode::Eval;
    int laser_channels = 0;
    LayerCache<T> laser;
    LayerCache<T> gmap;
    LayerCache<T> trunk;
    LayerCache<T> head;
};

template <class T>
struct InputGrads {
    Tensor4<T> laser;
    Tensor4<T> gmap;
};

template <class T>
class DetectorNet {
public:
    explicit DetectorNet(NetSpec spec, std::uint64_t seed = 0)
        : spec_(std::move(spec)), id_(next_net_id()),
          laser_("laser", spec_.tower, spec_.input_channels, spec_.bn_momentum, spec_.bn_eps),
          gmap_("gmap", spec_.tower, spec_.input_channels, spec_.bn_momentum, spec_.bn_eps),
          trunk_("trunk", spec_.trunk, laser_.out_channels() + gmap_.out_channels(), spec_.bn_momentum, spec_.bn_eps),
          head_("head", trunk_.out_channels(), spec_.head.out_channels, spec_.head.kernel, spec_.head.stride,
                spec_.head.padding) {
        if (spec_.head.type != LayerType::Conv) throw Error("head must be a conv layer");
        output_shape(1);  // validates the layer chain
        std::mt19937_64 rng(seed);
        laser_.init(rng);
        gmap_.init(rng);
        trunk_.init(rng);
        head_.init(rng);
    }

    DetectorNet(const DetectorNet&) = delete;
    DetectorNet& operator=(const DetectorNet&) = delete;

    const NetSpec& spec() const { return spec_; }

    Shape4 input_shape(int batch) const { return {batch, spec_.input_channels, spec_.input_size, spec_.input_size}; }

    Shape4 output_shape(int batch) const {
        const Shape4 a = laser_.output_shape(input_shape(batch));
        const Shape4 b = gmap_.output_shape(input_shape(batch));
        if (a.h != b.h || a.w != b.w) throw Error("tower outputs disagree spatially");
        const Shape4 t = trunk_.output_shape({batch, a.c + b.c, a.h, a.w});
        return head_.output_shape(t);
    }

    /// Returns head logits (N, 6, 5, 5) for the default spec.
    Tensor4<T> forward(const Tensor4<T>& laser, const Tensor4<T>& gmap, Mode mode, ForwardCache<T>& cache) {
        if (!(laser.shape() == input_shape(laser.n())) || !(gmap.shape() == laser.shape()))
            throw Error("input shape mismatch: expected " + input_shape(laser.n()).str() + ", got laser " +
                        laser.shape().str() + " and gmap " + gmap.shape().str());
        cache.net_id = id_;
        cache.version = version_;
        cache.mode = mode;
        const Tensor4<T> a = laser_.forward(laser, mode, cache.laser);
        const Tensor4<T> b = gmap_.forward(gmap, mode, cache.gmap);
        cache.laser_channels = a.c();
        const Tensor4<T> t = trunk_.forward(concat_channels(a, b), mode, cache.trunk);
        Tensor4<T> out = head_.forward(t, mode, cache.head);
        require_finite(out, "network output");
        return out;
    }

    Tensor4<T> forward(const Tensor4<T>& laser, const Tensor4<T>& gmap, Mode mode) {
        ForwardCache<T> cache;
        return forward(laser, gmap, mode, cache);
    }

    /// Accumulates parameter gradients; returns input gradients.
    InputGrads<T> backward(const ForwardCache<T>& cache, const Tensor4<T>& dout) {
        if (cache.net_id != id_) throw Error("forward cache belongs to a different network");
        if (cache.version != version_) throw Error("stale forward cache: parameters changed since forward");
        if (cache.mode != Mode::Train) throw Error("backward needs a train-mode forward cache");
        Tensor4<T> g = head_.backward(dout, cache.head);
        g = trunk_.backward(g, cache.trunk);
        auto [ga, gb] = split_channels(g, cache.laser_channels);
        InputGrads<T> out;
        out.laser = laser_.backward(ga, cache.laser);
        out.gmap = gmap_.backward(gb, cache.gmap);
        return out;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> out;
        laser_.collect_params(out);
        gmap_.collect_params(out);
        trunk_.collect_params(out);
        head_.collect_params(out);
        return out;
    }

    std::vector<std::pair<std::string, Tensor4<T>*>> buffers() {
        std::vector<std::pair<std::string, Tensor4<T>*>> out;
        laser_.collect_buffers(out);
        gmap_.collect_buffers(out);
        trunk_.collect_buffers(out);
        head_.collect_buffers(out);
        return out;
    }

    /// Every persistent tensor in declaration order: parameters, then buffers.
    std::vector<std::pair<std::string, Tensor4<T>*>> state_tensors() {
        std::vector<std::pair<std::string, Tensor4<T>*>> out;
        for (auto* p : params()) out.emplace_back(p->name, &p->value);
        for (auto& b : buffers()) out.push_back(b);
        return out;
    }

    void zero_grad() {
        for (auto* p : params()) p->grad.fill(T(0));
    }

    /// Marks parameters as modified, invalidating outstanding caches.
    void bump_version() { ++version_; }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->value.size();
        return n;
    }

    Sequential<T>& laser_tower() { return laser_; }
    Sequential<T>& gmap_tower() { return gmap_; }
    Sequential<T>& trunk() { return trunk_; }
    Conv2d<T>& head() { return head_; }

private:
    NetSpec spec_;
    std::uint64_t id_;
    std::uint64_t version_ = 0;
    Sequential<T> laser_;
    Sequential<T> gmap_;
    Sequential<T> trunk_;
    Conv2d<T> head_;
};

}  // namespace gridnav::nn
