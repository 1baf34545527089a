#pragma once

#include <cmath>
#include <vector>

#include "gridnav/nn/layers.hpp"

namespace gridnav::nn {

/// Adadelta (Zeiler 2012):
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx      =  -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + lr * dx
template <class T>
class Adadelta {
public:
    explicit Adadelta(double rho = 0.95, double eps = 1e-6, double lr = 1.0) : rho_(rho), eps_(eps), lr_(lr) {
        if (!(rho > 0.0 && rho < 1.0)) throw Error("adadelta rho must be in (0, 1)");
        if (!(eps > 0.0)) throw Error("adadelta eps must be positive");
    }

    double rho() const { return rho_; }
    double eps() const { return eps_; }

    void step(const std::vector<Param<T>*>& params) {
        if (sq_grad_.empty()) {
            for (auto* p : params) {
                sq_grad_.emplace_back(p->value.size(), 0.0);
                sq_delta_.emplace_back(p->value.size(), 0.0);
            }
        }
        if (sq_grad_.size() != params.size()) throw Error("adadelta: parameter list changed between steps");
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto& p = *params[k];
            auto& eg = sq_grad_[k];
            auto& ed = sq_delta_[k];
            if (eg.size() != p.value.size() || !(p.grad.shape() == p.value.shape()))
                throw Error("adadelta: shape mismatch for " + p.name);
            for (std::size_t i = 0; i < eg.size(); ++i) {
                const double g = p.grad[i];
                eg[i] = rho_ * eg[i] + (1.0 - rho_) * g * g;
                const double dx = -std::sqrt(ed[i] + eps_) / std::sqrt(eg[i] + eps_) * g;
                ed[i] = rho_ * ed[i] + (1.0 - rho_) * dx * dx;
                p.value[i] = static_cast<T>(p.value[i] + lr_ * dx);
            }
        }
    }

    const std::vector<std::vector<double>>& sq_grad() const { return sq_grad_; }
    const std::vector<std::vector<double>>& sq_delta() const { return sq_delta_; }

private:
    double rho_;
    double eps_;
    double lr_;
    std::vector<std::vector<double>> sq_grad_;
    std::vector<std::vector<double>> sq_delta_;
};

}  // namespace gridnav::nn
