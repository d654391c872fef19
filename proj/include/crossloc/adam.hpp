#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "crossloc/layers.hpp"

namespace crossloc::nn {

// Adam with bias correction. State is exposed for checkpointing.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<NamedParam<T>> params, double lr,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
        if (lr <= 0.0) throw std::invalid_argument("adam: lr must be positive");
        for (const auto& p : params_) {
            const auto& v = p.var->value;
            m_.emplace_back(v.n, v.c, v.h, v.w);
            v_.emplace_back(v.n, v.c, v.h, v.w);
        }
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].var;
            if (!p->requires_grad) continue;
            if (p->grad.size() != p->value.size())
                throw std::runtime_error("adam: missing gradient for " + params_[i].name);
            for (std::size_t j = 0; j < p->value.size(); ++j) {
                const double g = static_cast<double>(p->grad.v[j]);
                if (!std::isfinite(g))
                    throw std::runtime_error("adam: non-finite gradient in " + params_[i].name +
                                             " at element " + std::to_string(j));
                double& m = m_[i].v[j];
                double& v = v_[i].v[j];
                m = b1_ * m + (1.0 - b1_) * g;
                v = b2_ * v + (1.0 - b2_) * g * g;
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                p->value.v[j] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    long step_count() const { return t_; }
    double lr() const { return lr_; }
    const std::vector<Tensor<double>>& m() const { return m_; }
    const std::vector<Tensor<double>>& v() const { return v_; }
    std::vector<Tensor<double>>& m() { return m_; }
    std::vector<Tensor<double>>& v() { return v_; }
    void set_step_count(long t) { t_ = t; }
    const std::vector<NamedParam<T>>& params() const { return params_; }

private:
    std::vector<NamedParam<T>> params_;
    std::vector<Tensor<double>> m_, v_;
    double lr_ = 2e-4, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    long t_ = 0;
};

}  // namespace crossloc::nn
