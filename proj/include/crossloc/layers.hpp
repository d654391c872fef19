#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "crossloc/autograd.hpp"

namespace crossloc::nn {

enum class LayerKind {
    conv,
    conv_transpose,
    instance_norm,
    relu,
    lrelu,
    sigmoid,
    reflection_pad,
    dropout,
    resnet_block,
};

struct LayerSpec {
    LayerKind kind;
    int cin = 0, cout = 0, k = 0, s = 1, p = 0, p_out = 0;
    double ns = 0.2;       // lrelu slope
    double drop = 0.0;     // dropout ratio (also inside resnet blocks)
    bool block_drop = false;

    static LayerSpec Conv(int cin, int cout, int k, int s, int p) {
        return {LayerKind::conv, cin, cout, k, s, p, 0, 0.2, 0.0, false};
    }
    static LayerSpec ConvT(int cin, int cout, int k, int s, int p, int p_out) {
        return {LayerKind::conv_transpose, cin, cout, k, s, p, p_out, 0.2, 0.0, false};
    }
    static LayerSpec IN() { return {LayerKind::instance_norm}; }
    static LayerSpec ReLU() { return {LayerKind::relu}; }
    static LayerSpec LReLU(double ns) { return {LayerKind::lrelu, 0, 0, 0, 1, 0, 0, ns, 0.0, false}; }
    static LayerSpec Sigmoid() { return {LayerKind::sigmoid}; }
    static LayerSpec RP(int p) { return {LayerKind::reflection_pad, 0, 0, 0, 1, p, 0, 0.2, 0.0, false}; }
    static LayerSpec Drop(double d) { return {LayerKind::dropout, 0, 0, 0, 1, 0, 0, 0.2, d, false}; }
    // two 3x3 convs with reflection padding 1 so the residual add is
    // shape-consistent (the tables write p=0 and elide the padding)
    static LayerSpec ResBlock(int c, bool with_dropout) {
        return {LayerKind::resnet_block, c, c, 3, 1, 1, 0, 0.2, 0.5, with_dropout};
    }

    std::size_t param_count() const {
        switch (kind) {
            case LayerKind::conv:
            case LayerKind::conv_transpose:
                return static_cast<std::size_t>(cin) * cout * k * k + cout;
            case LayerKind::resnet_block:
                return 2 * (static_cast<std::size_t>(cin) * cout * k * k + cout);
            default:
                return 0;
        }
    }
};

template <typename T>
struct NamedParam {
    std::string name;
    Var<T> var;
};

namespace detail {

template <typename T>
Var<T> init_conv_weight(int d0, int d1, int k, int fan_in, std::mt19937& rng) {
    Tensor<T> w(d0, d1, k, k);
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& v : w.v) v = static_cast<T>(u(rng));
    return make_param(std::move(w));
}

}  // namespace detail

// A feed-forward stack built from LayerSpecs. Covers every architecture
// table except the U-Net (which needs skips, see models.hpp).
template <typename T>
class Sequential {
public:
    Sequential() = default;
    Sequential(std::vector<LayerSpec> specs, const std::string& prefix, std::mt19937& rng)
        : specs_(std::move(specs)) {
        int idx = 0;
        for (const auto& sp : specs_) {
            Layer l;
            l.spec = sp;
            const std::string base = prefix + ".l" + std::to_string(idx++);
            if (sp.kind == LayerKind::conv) {
                l.w1 = detail::init_conv_weight<T>(sp.cout, sp.cin, sp.k, sp.cin * sp.k * sp.k, rng);
                l.b1 = make_param(Tensor<T>(1, sp.cout, 1, 1));
                params_.push_back({base + ".w", l.w1});
                params_.push_back({base + ".b", l.b1});
            } else if (sp.kind == LayerKind::conv_transpose) {
                l.w1 = detail::init_conv_weight<T>(sp.cin, sp.cout, sp.k, sp.cin * sp.k * sp.k, rng);
                l.b1 = make_param(Tensor<T>(1, sp.cout, 1, 1));
                params_.push_back({base + ".w", l.w1});
                params_.push_back({base + ".b", l.b1});
            } else if (sp.kind == LayerKind::resnet_block) {
                l.w1 = detail::init_conv_weight<T>(sp.cout, sp.cin, 3, sp.cin * 9, rng);
                l.b1 = make_param(Tensor<T>(1, sp.cout, 1, 1));
                l.w2 = detail::init_conv_weight<T>(sp.cout, sp.cin, 3, sp.cin * 9, rng);
                l.b2 = make_param(Tensor<T>(1, sp.cout, 1, 1));
                params_.push_back({base + ".w1", l.w1});
                params_.push_back({base + ".b1", l.b1});
                params_.push_back({base + ".w2", l.w2});
                params_.push_back({base + ".b2", l.b2});
            }
            layers_.push_back(std::move(l));
        }
    }

    Var<T> forward(Var<T> x, bool train, std::mt19937* drop_rng) const {
        for (const auto& l : layers_) {
            const auto& sp = l.spec;
            switch (sp.kind) {
                case LayerKind::conv:
                    x = conv2d(x, l.w1, l.b1, sp.s, sp.p);
                    break;
                case LayerKind::conv_transpose:
                    x = conv_transpose2d(x, l.w1, l.b1, sp.s, sp.p, sp.p_out);
                    break;
                case LayerKind::instance_norm:
                    x = instance_norm2d(x);
                    break;
                case LayerKind::relu:
                    x = relu(x);
                    break;
                case LayerKind::lrelu:
                    x = lrelu(x, static_cast<T>(sp.ns));
                    break;
                case LayerKind::sigmoid:
                    x = sigmoid(x);
                    break;
                case LayerKind::reflection_pad:
                    x = reflection_pad2d(x, sp.p);
                    break;
                case LayerKind::dropout:
                    x = dropout(x, sp.drop, train, drop_rng);
                    break;
                case LayerKind::resnet_block: {
                    Var<T> y = reflection_pad2d(x, 1);
                    y = conv2d(y, l.w1, l.b1, 1, 0);
                    y = instance_norm2d(y);
                    y = relu(y);
                    if (sp.block_drop) y = dropout(y, sp.drop, train, drop_rng);
                    y = reflection_pad2d(y, 1);
                    y = conv2d(y, l.w2, l.b2, 1, 0);
                    y = instance_norm2d(y);
                    x = add(x, y);
                    break;
                }
            }
        }
        return x;
    }

    const std::vector<NamedParam<T>>& params() const { return params_; }

    void set_trainable(bool on) {
        for (auto& p : params_) p.var->requires_grad = on;
    }

private:
    struct Layer {
        LayerSpec spec;
        Var<T> w1, b1, w2, b2;
    };
    std::vector<LayerSpec> specs_;
    std::vector<Layer> layers_;
    std::vector<NamedParam<T>> params_;
};

}  // namespace crossloc::nn
