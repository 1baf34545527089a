#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "gridnav/nn/tensor.hpp"

namespace gridnav::nn {

enum class Mode { Train, Eval };

/// A trainable tensor and its accumulated gradient.
template <class T>
struct Param {
    std::string name;
    Tensor4<T> value;
    Tensor4<T> grad;

    Param() = default;
    Param(std::string n, Shape4 s) : name(std::move(n)), value(s), grad(s) {}
};

/// Per-layer activation record produced by forward and consumed by backward.
template <class T>
struct LayerCache {
    Mode mode = Mode::Eval;
    std::vector<Tensor4<T>> saved;
    std::vector<T> scalars;
    std::vector<LayerCache> children;
};

template <class T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual std::string kind() const = 0;
    virtual Shape4 output_shape(const Shape4& in) const = 0;
    virtual Tensor4<T> forward(const Tensor4<T>& x, Mode mode, LayerCache<T>& cache) = 0;
    /// Accumulates parameter gradients into Param::grad and returns dL/dx.
    virtual Tensor4<T> backward(const Tensor4<T>& dy, const LayerCache<T>& cache) = 0;
    virtual void collect_params(std::vector<Param<T>*>& /*out*/) {}
    /// Non-trainable persistent state (batchnorm running statistics).
    virtual void collect_buffers(std::vector<std::pair<std::string, Tensor4<T>*>>& /*out*/) {}
    virtual nlohmann::json describe() const = 0;
};


template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

// ---------------------------------------------------------------------------
// Convolution (im2col + GEMM)
// ---------------------------------------------------------------------------

template <class T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad)
        : name_(std::move(name)), in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
          weight_(name_ + ".weight", {out_ch, in_ch, kernel, kernel}), bias_(name_ + ".bias", {1, out_ch, 1, 1}) {
        if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0) throw Error("invalid conv config " + name_);
    }

    std::string kind() const override { return "conv"; }
    int in_channels() const { return in_; }
    int out_channels() const { return out_; }
    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

    Shape4 output_shape(const Shape4& in) const override {
        if (in.c != in_)
            throw Error(name_ + ": expected " + std::to_string(in_) + " input channels, got " + std::to_string(in.c));
        const int ho = (in.h + 2 * p_ - k_) / s_ + 1;
        const int wo = (in.w + 2 * p_ - k_) / s_ + 1;
        if (ho < 1 || wo < 1 || in.h + 2 * p_ < k_ || in.w + 2 * p_ < k_)
            throw Error(name_ + ": input " + in.str() + " too small for kernel");
        return {in.n, out_, ho, wo};
    }

    /// He (fan-in) normal initialization with zero bias.
    template <class Rng>
    void init(Rng& rng) {
        std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (in_ * k_ * k_)));
        for (auto& v : weight_.value.values()) v = static_cast<T>(nd(rng));
        bias_.value.fill(T(0));
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode, LayerCache<T>& cache) override {
        const Shape4 os = output_shape(x.shape());
        Tensor4<T> y(os);
        const int rows = in_ * k_ * k_;
        const int cols = os.h * os.w;
        col_.resize(static_cast<std::size_t>(rows) * cols);
        ConstMatMap<T> W(weight_.value.data(), out_, rows);
        for (int n = 0; n < x.n(); ++n) {
            im2col(x, n, os.h, os.w);
            MatMap<T> Y(y.sample(n), out_, cols);
            Y.noalias() = W * ConstMatMap<T>(col_.data(), rows, cols);
            for (int o = 0; o < out_; ++o) Y.row(o).array() += bias_.value[static_cast<std::size_t>(o)];
        }
        cache.mode = mode;
        cache.saved.clear();
        if (mode == Mode::Train) cache.saved.push_back(x);
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy, const LayerCache<T>& cache) override {
        if (cache.saved.size() != 1) throw Error(name_ + ": backward needs a train-mode forward cache");
        const Tensor4<T>& x = cache.saved[0];
        const Shape4 os = output_shape(x.shape());
        if (!(dy.shape() == os)) throw Error(name_ + ": gradient shape " + dy.shape().str() + " != " + os.str());
        const int rows = in_ * k_ * k_;
        const int cols = os.h * os.w;
        col_.resize(static_cast<std::size_t>(rows) * cols);
        dcol_.resize(col_.size());
        Tensor4<T> dx(x.shape());
        ConstMatMap<T> W(weight_.value.data(), out_, rows);
        MatMap<T> dW(weight_.grad.data(), out_, rows);
        for (int n = 0; n < x.n(); ++n) {
            im2col(x, n, os.h, os.w);
            ConstMatMap<T> dY(dy.sample(n), out_, cols);
            dW.noalias() += dY * ConstMatMap<T>(col_.data(), rows, cols).transpose();
            // Plain loop: Eigen's vectorized sum splits at an address-dependent
            // boundary, which makes the result vary between allocations.
            for (int o = 0; o < out_; ++o) {
                const T* row = dy.sample(n) + static_cast<std::size_t>(o) * cols;
                T s = T(0);
                for (int i = 0; i < cols; ++i) s += row[i];
                bias_.grad[static_cast<std::size_t>(o)] += s;
            }
            MatMap<T>(dcol_.data(), rows, cols).noalias() = W.transpose() * dY;
            col2im(dx, n, os.h, os.w);
        }
        return dx;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    nlohmann::json describe() const override {
        return {{"name", name_}, {"type", "conv"}, {"in", in_}, {"out", out_}, {"kernel", k_}, {"stride", s_}, {"pad", p_}};
    }

private:
    void im2col(const Tensor4<T>& x, int n, int ho, int wo) {
        const int H = x.h();
        const int Wd = x.w();
        const T* src = x.sample(n);
        T* dst = col_.data();
        for (int c = 0; c < in_; ++c) {
            const T* plane = src + static_cast<std::size_t>(c) * H * Wd;
            for (int kh = 0; kh < k_; ++kh) {
                for (int kw = 0; kw < k_; ++kw) {
                    for (int oh = 0; oh < ho; ++oh) {
                        const int ih = oh * s_ - p_ + kh;
                        if (ih < 0 || ih >= H) {
                            std::fill_n(dst, wo, T(0));
                            dst += wo;
                            continue;
                        }
                        const T* line = plane + static_cast<std::size_t>(ih) * Wd;
                        for (int ow = 0; ow < wo; ++ow) {
                            const int iw = ow * s_ - p_ + kw;
                            *dst++ = (iw >= 0 && iw < Wd) ? line[iw] : T(0);
                        }
                    }
                }
            }
        }
    }

    void col2im(Tensor4<T>& dx, int n, int ho, int wo) const {
        const int H = dx.h();
        const int Wd = dx.w();
        T* dst = dx.sample(n);
        const T* src = dcol_.data();
        for (int c = 0; c < in_; ++c) {
            T* plane = dst + static_cast<std::size_t>(c) * H * Wd;
            for (int kh = 0; kh < k_; ++kh) {
                for (int kw = 0; kw < k_; ++kw) {
                    for (int oh = 0; oh < ho; ++oh) {
                        const int ih = oh * s_ - p_ + kh;
                        if (ih < 0 || ih >= H) {
                            src += wo;
                            continue;
                        }
                        T* line = plane + static_cast<std::size_t>(ih) * Wd;
                        for (int ow = 0; ow < wo; ++ow, ++src) {
                            const int iw = ow * s_ - p_ + kw;
                            if (iw >= 0 && iw < Wd) line[iw] += *src;
                        }
                    }
                }
            }
        }
    }

    std::string name_;
    int in_, out_, k_, s_, p_;
    Param<T> weight_;
    Param<T> bias_;
    std::vector<T> col_;
    std::vector<T> dcol_;
};

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

template <class T>
class BatchNorm2d final : public Layer<T> {
public:
    BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5)
        : name_(std::move(name)), ch_(channels), momentum_(momentum), eps_(eps),
          gamma_(name_ + ".gamma", {1, channels, 1, 1}), beta_(name_ + ".beta", {1, channels, 1, 1}),
          running_mean_({1, channels, 1, 1}, T(0)), running_var_({1, channels, 1, 1}, T(1)) {
        gamma_.value.fill(T(1));
    }

    std::string kind() const override { return "batchnorm"; }
    Param<T>& gamma() { return gamma_; }
    Param<T>& beta() { return beta_; }
    Tensor4<T>& running_mean() { return running_mean_; }
    Tensor4<T>& running_var() { return running_var_; }

    Shape4 output_shape(const Shape4& in) const override {
        if (in.c != ch_) throw Error(name_ + ": expected " + std::to_string(ch_) + " channels, got " + std::to_string(in.c));
        return in;
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode, LayerCache<T>& cache) override {
        output_shape(x.shape());
        const int N = x.n();
        const std::size_t plane = static_cast<std::size_t>(x.h()) * x.w();
        const double M = static_cast<double>(N) * static_cast<double>(plane);
        Tensor4<T> y(x.shape());
        cache.mode = mode;
        cache.saved.clear();
        cache.scalars.clear();
        if (mode == Mode::Train) {
            if (M < 2) throw Error(name_ + ": train-mode batchnorm needs more than one value per channel");
            Tensor4<T> xhat(x.shape());
            std::vector<T> invstd(static_cast<std::size_t>(ch_));
            for (int c = 0; c < ch_; ++c) {
                double sum = 0.0;
                for (int n = 0; n < N; ++n) {
                    const T* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) sum += p[i];
                }
                const double mean = sum / M;
                double sq = 0.0;
                for (int n = 0; n < N; ++n) {
                    const T* p = x.sample(n) + static_cast<std::size_t>(c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        const double d = p[i] - mean;
                        sq += d * d;
                    }
                }
                const double var = sq / M;
                const double is = 1.0 / std::sqrt(var + eps_);
                invstd[static_cast<std::size_t>(c)] = static_cast<T>(is);
                const T g = gamma_.value[static_cast<std::size_t>(c)];
                const T b = beta_.value[static_cast<std::size_t>(c)];
                for (int n = 0; n < N; ++n) {
                    const std::size_t off = static_cast<std::size_t>(c) * plane;
                    const T* p = x.sample(n) + off;
                    T* h = xhat.sample(n) + off;
                    T* q = y.sample(n) + off;
                    for (std::size_t i = 0; i < plane; ++i) {
                        h[i] = static_cast<T>((p[i] - mean) * is);
                        q[i] = g * h[i] + b;
                    }
                }
                auto& rm = running_mean_[static_cast<std::size_t>(c)];
                auto& rv = running_var_[static_cast<std::size_t>(c)];
                rm = static_cast<T>((1.0 - momentum_) * rm + momentum_ * mean);
                rv = static_cast<T>((1.0 - momentum_) * rv + momentum_ * var * M / (M - 1.0));
            }
            cache.saved.push_back(std::move(xhat));
            cache.scalars = std::move(invstd);
        } else {
            for (int c = 0; c < ch_; ++c) {
                const double is = 1.0 / std::sqrt(static_cast<double>(running_var_[static_cast<std::size_t>(c)]) + eps_);
                const double mean = running_mean_[static_cast<std::size_t>(c)];
                const double g = gamma_.value[static_cast<std::size_t>(c)];
                const double b = beta_.value[static_cast<std::size_t>(c)];
                for (int n = 0; n < N; ++n) {
                    const std::size_t off = static_cast<std::size_t>(c) * plane;
                    const T* p = x.sample(n) + off;
                    T* q = y.sample(n) + off;
                    for (std::size_t i = 0; i < plane; ++i) q[i] = static_cast<T>(g * (p[i] - mean) * is + b);
                }
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy, const LayerCache<T>& cache) override {
        if (cache.mode != Mode::Train || cache.saved.size() != 1)
            throw Error(name_ + ": backward needs a train-mode forward cache");
        const Tensor4<T>& xhat = cache.saved[0];
        if (!(dy.shape() == xhat.shape())) throw Error(name_ + ": gradient shape mismatch");
        const int N = dy.n();
        const std::size_t plane = static_cast<std::size_t>(dy.h()) * dy.w();
        const double M = static_cast<double>(N) * static_cast<double>(plane);
        Tensor4<T> dx(dy.shape());
        for (int c = 0; c < ch_; ++c) {
            const std::size_t off = static_cast<std::size_t>(c) * plane;
            double sum_dy = 0.0;
            double sum_dy_xhat = 0.0;
            for (int n = 0; n < N; ++n) {
                const T* g = dy.sample(n) + off;
                const T* h = xhat.sample(n) + off;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += g[i];
                    sum_dy_xhat += static_cast<double>(g[i]) * h[i];
                }
            }
            gamma_.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy_xhat);
            beta_.grad[static_cast<std::size_t>(c)] += static_cast<T>(sum_dy);
            const double gm = gamma_.value[static_cast<std::size_t>(c)];
            const double is = cache.scalars[static_cast<std::size_t>(c)];
            const double k = gm * is / M;
            for (int n = 0; n < N; ++n) {
                const T* g = dy.sample(n) + off;
                const T* h = xhat.sample(n) + off;
                T* d = dx.sample(n) + off;
                for (std::size_t i = 0; i < plane; ++i)
                    d[i] = static_cast<T>(k * (M * g[i] - sum_dy - h[i] * sum_dy_xhat));
            }
        }
        return dx;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }
    void collect_buffers(std::vector<std::pair<std::string, Tensor4<T>*>>& out) override {
        out.emplace_back(name_ + ".running_mean", &running_mean_);
        out.emplace_back(name_ + ".running_var", &running_var_);
    }

    nlohmann::json describe() const override {
        return {{"name", name_}, {"type", "batchnorm"}, {"channels", ch_}, {"momentum", momentum_}, {"eps", eps_}};
    }

private:
    std::string name_;
    int ch_;
    double momentum_;
    double eps_;
    Param<T> gamma_;
    Param<T> beta_;
    Tensor4<T> running_mean_;
    Tensor4<T> running_var_;
};

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

template <class T>
class ReLU final : public Layer<T> {
public:
    explicit ReLU(std::string name = "relu") : name_(std::move(name)) {}

    std::string kind() const override { return "relu"; }
    Shape4 output_shape(const Shape4& in) const override { return in; }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode, LayerCache<T>& cache) override {
        Tensor4<T> y = x;
        for (auto& v : y.values()) v = v > T(0) ? v : T(0);
        cache.mode = mode;
        cache.saved.clear();
        if (mode == Mode::Train) cache.saved.push_back(y);
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& dy, const LayerCache<T>& cache) override {
        if (cache.saved.size() != 1) throw Error(name_ + ": backward needs a train-mode forward cache");
        const auto& y = cache.saved[0];
        if (!(dy.shape() == y.shape())) throw Error(name_ + ": gradient shape mismatch");
        Tensor4<T> dx(dy.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
        return dx;
    }

    nlohmann::json describe() const override { return {{"name", name_}, {"type", "relu"}}; }

private:
    std::string name_;
};

// ---------------------------------------------------------------------------
// Residual block: relu(bn2(conv2(relu(bn1(conv1 x)))) + skip(x))
// ---------------------------------------------------------------------------

template <class T>
class ResidualBlock final : public Layer<T> {
public:
    ResidualBlock(std::string name, int in_ch, int out_ch, int stride, double bn_momentum = 0.1, double bn_eps = 1e-5)
        : name_(std::move(name)), in_(in_ch), out_(out_ch), stride_(stride),
          conv1_(name_ + ".conv1", in_ch, out_ch, 3, stride, 1), bn1_(name_ + ".bn1", out_ch, bn_momentum, bn_eps),
          relu1_(name_ + ".relu1"), conv2_(name_ + ".conv2", out_ch, out_ch, 3, 1, 1),
          bn2_(name_ + ".bn2", out_ch, bn_momentum, bn_eps), relu_out_(name_ + ".relu_out") {
        if (in_ch != out_ch || stride != 1) proj_ = std::make_unique<Conv2d<T>>(name_ + ".proj", in_ch, out_ch, 1, stride, 0);
    }

    std::string kind() const override { return "residual"; }
    bool has_projection() const { return proj_ != nullptr; }
    Conv2d<T>& conv1() { return conv1_; }
    Conv2d<T>& conv2() { return conv2_; }
    BatchNorm2d<T>& bn1() { return bn1_; }
    BatchNorm2d<T>& bn2() { return bn2_; }
    Conv2d<T>* projection() { return proj_.get(); }

    /// When set, the residual branch contributes nothing (used to isolate the skip path).
    void set_branch_enabled(bool on) { branch_enabled_ = on; }

    Shape4 output_shape(const Shape4& in) const override {
        const Shape4 s = conv1_.output_shape(in);
        const Shape4 skip = proj_ ? proj_->output_shape(in) : in;
        if (!(skip == s)) throw Error(name_ + ": skip shape " + skip.str() + " does not match block output " + s.str());
        return s;
    }

    template <class Rng>
    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        if (proj_) proj_->init(rng);
    }

    Tensor4<T> forward(const Tensor4<T>& x, Mode mode, LayerCache<T>& cache) override {
        output_shape(x.shape());
        cache.mode = mode;
        cache.children.assign(proj_ ? 7 : 6, LayerCache<T>{});
        auto& ch = cache.children;
        Tensor4<T> h = conv1_.forward(x, mode, ch[0]);
        h = bn1_.forward(h, mode, ch[1]);
        h = relu1_.forward(h, mode, ch[2]);
        h = conv2_.forward(h, mode, ch[3]);
        h = bn2_.forward(h, mode, ch[4]);
        if (!branch_enabled_) h.fill(T(0));
        Tensor4<T> skip = proj_ ? proj_->forward(x, mode, ch[6]) : x;
        add_inplace(h, skip);
        return relu_out_.forward(h, mode, ch[5]);
    }

    Tensor4<T> backward(const Tensor4<T>& dy, const LayerCache<T>& cache) override {
        if (cache.mode != Mode::Train || cache.children.size() != (proj_ ? 7u : 6u))
            throw Error(name_ + ": backward needs a train-mode forward cache");
        const auto& ch = cache.children;
        const Tensor4<T> dsum = relu_out_.backward(dy, ch[5]);
        Tensor4<T> dx = proj_ ? proj_->backward(dsum, ch[6]) : dsum;
        Tensor4<T> g = dsum;
        if (!branch_enabled_) g.fill(T(0));
        g = bn2_.backward(g, ch[4]);
        g = conv2_.backward(g, ch[3]);
        g = relu1_.backward(g, ch[2]);
        g = bn1_.backward(g, ch[1]);
        g = conv1_.backward(g, ch[0]);
        add_inplace(dx, g);
        return dx;
    }

    void collect_params(std::vector<Param<T>*>& out) override {
        conv1_.collect_params(out);
        bn1_.collect_params(out);
        conv2_.collect_params(out);
        bn2_.collect_params(out);
        if (proj_) proj_->collect_params(out);
    }
    void collect_buffers(std::vector<std::pair<std::string, Tensor4<T>*>>& out) override {
        bn1_.collect_buffers(out);
        bn2_.collect_buffers(out);
    }

    nlohmann::json describe() const override {
        return {{"name", name_}, {"type", "residual"}, {"in", in_}, {"out", out_}, {"stride", stride_},
                {"projection", proj_ != nullptr}};
    }

private:
    std::string name_;
    int in_, out_, stride_;
    Conv2d<T> conv1_;
    BatchNorm2d<T> bn1_;
    ReLU<T> relu1_;
    Conv2d<T> conv2_;
    BatchNorm2d<T> bn2_;
    ReLU<T> relu_out_;
    std::unique_ptr<Conv2d<T>> proj_;
    bool branch_enabled_ = true;
};

}  // namespace gridnav::nn
