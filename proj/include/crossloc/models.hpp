#pragma once

#include <cmath>
#include <memory>

#include "crossloc/image.hpp"
#include "crossloc/layers.hpp"

namespace crossloc::nn {

// width_scale shrinks every channel count for desk-scale training; 1.0
// reproduces the architecture tables exactly.
inline int scaled(int base, double ws) {
    return std::max(1, static_cast<int>(std::lround(base * ws)));
}

template <typename T>
Tensor<T> tensor_from_image(const ImagePatch& img) {
    Tensor<T> t(1, img.channels, img.height, img.width);
    for (std::size_t i = 0; i < img.data.size(); ++i) t.v[i] = static_cast<T>(img.data[i]);
    return t;
}

template <typename T>
ImagePatch image_from_tensor(const Tensor<T>& t, double resolution = 1.0, int sample = 0) {
    ImagePatch img(t.c, t.h, t.w, resolution);
    const std::size_t per = static_cast<std::size_t>(t.c) * t.h * t.w;
    for (std::size_t i = 0; i < per; ++i) {
        float v = static_cast<float>(t.v[sample * per + i]);
        img.data[i] = std::min(1.0f, std::max(0.0f, v));
    }
    return img;
}

// Rotation-inference trunk: four stride-2 conv+IN+ReLU stages then six
// residual blocks (no dropout).
inline std::vector<LayerSpec> rot_trunk_spec(int in_ch, double ws = 1.0) {
    std::vector<LayerSpec> s;
    int c = in_ch;
    for (int base : {32, 64, 128, 256}) {
        const int o = scaled(base, ws);
        s.push_back(LayerSpec::Conv(c, o, 3, 2, 1));
        s.push_back(LayerSpec::IN());
        s.push_back(LayerSpec::ReLU());
        c = o;
    }
    for (int i = 0; i < 6; ++i) s.push_back(LayerSpec::ResBlock(c, false));
    return s;
}

// Generation encoders: 7x7 stem, four stride-2 stages, nine residual
// blocks with Drop(0.5).
inline std::vector<LayerSpec> encoder_spec(int in_ch, double ws = 1.0) {
    std::vector<LayerSpec> s;
    s.push_back(LayerSpec::RP(3));
    int c = scaled(16, ws);
    s.push_back(LayerSpec::Conv(in_ch, c, 7, 1, 0));
    s.push_back(LayerSpec::IN());
    s.push_back(LayerSpec::ReLU());
    for (int base : {32, 64, 128, 256}) {
        const int o = scaled(base, ws);
        s.push_back(LayerSpec::Conv(c, o, 3, 2, 1));
        s.push_back(LayerSpec::IN());
        s.push_back(LayerSpec::ReLU());
        c = o;
    }
    for (int i = 0; i < 9; ++i) s.push_back(LayerSpec::ResBlock(c, true));
    return s;
}

// Decoder: four doubling ConvT stages from the fused 512-channel latent,
// 7x7 head, sigmoid output.
inline std::vector<LayerSpec> decoder_spec(double ws = 1.0) {
    std::vector<LayerSpec> s;
    // fused latent: appearance and pose codes concatenated (512 at full width)
    int c = 2 * scaled(256, ws);
    for (int base : {256, 128, 64, 32}) {
        const int o = scaled(base, ws);
        s.push_back(LayerSpec::ConvT(c, o, 3, 2, 1, 1));
        s.push_back(LayerSpec::IN());
        s.push_back(LayerSpec::ReLU());
        s.push_back(LayerSpec::Drop(0.5));
        c = o;
    }
    s.push_back(LayerSpec::RP(3));
    s.push_back(LayerSpec::Conv(c, 1, 7, 1, 0));
    s.push_back(LayerSpec::Sigmoid());
    return s;
}

// f_R: shared trunk applied to an n-element stack of (map || live)
// channel-concatenated tensors; softmax over per-element latent sums;
// output is the softmax-weighted sum of whichever side is the stack. The
// channel order (map first, live last) is fixed so the same trunk serves
// both training passes: pass 1 holds the map constant and stacks live
// rotations, pass 2 holds the picked live image constant and stacks map
// rotations.
template <typename T>
class RotSelector {
public:
    RotSelector() = default;
    RotSelector(int map_ch, int live_ch, double ws, std::mt19937& rng)
        : map_ch_(map_ch), live_ch_(live_ch),
          trunk_(rot_trunk_spec(map_ch + live_ch, ws), "f_R", rng) {}

    struct Selection {
        Var<T> weights;  // (n,1,1,1) probability vector
        Var<T> picked;   // (1,C,H,W) softmax-weighted sum of the stacked side
    };

    // map_part (n_m, map_ch, H, W), live_part (n_l, live_ch, H, W); exactly
    // one side may have n > 1 and that side is the stack being selected over.
    Selection select(const Var<T>& map_part, const Var<T>& live_part,
                     bool train = false, std::mt19937* drop_rng = nullptr) const {
        if (map_part->value.c != map_ch_ || live_part->value.c != live_ch_)
            throw std::invalid_argument("RotSelector: channel mismatch");
        if (map_part->value.h != live_part->value.h ||
            map_part->value.w != live_part->value.w)
            throw std::invalid_argument("RotSelector: spatial mismatch");
        const int nm = map_part->value.n, nl = live_part->value.n;
        if (nm != 1 && nl != 1 && nm != nl)
            throw std::invalid_argument("RotSelector: incompatible stack sizes");
        const int n = std::max(nm, nl);
        Var<T> m = nm == n ? map_part : repeat_n(map_part, n);
        Var<T> l = nl == n ? live_part : repeat_n(live_part, n);
        Var<T> latent = trunk_.forward(concat_c(m, l), train, drop_rng);
        Var<T> weights = softmax_batch(sum_per_sample(latent));
        // live side is the stack when sizes are ambiguous (n_m == n_l)
        Var<T> stacked = nl == n ? live_part : map_part;
        Var<T> picked = stack_weighted_sum(stacked, weights);
        return {weights, picked};
    }

    Sequential<T>& trunk() { return trunk_; }
    const Sequential<T>& trunk() const { return trunk_; }
    const std::vector<NamedParam<T>>& params() const { return trunk_.params(); }
    int map_channels() const { return map_ch_; }
    int live_channels() const { return live_ch_; }

private:
    int map_ch_ = 1, live_ch_ = 1;
    Sequential<T> trunk_;
};

// The four generation networks. E_a/E_p/D are pre-trained intra-modality;
// E_p_star is the cross-modality pose encoder trained with the rest frozen.
template <typename T>
class GeneratorBundle {
public:
    GeneratorBundle() = default;
    GeneratorBundle(int map_ch, double ws, std::mt19937& rng)
        : e_a(encoder_spec(1, ws), "E_a", rng),
          e_p(encoder_spec(2, ws), "E_p", rng),
          e_p_star(encoder_spec(map_ch + 1, ws), "E_p_star", rng),
          dec(decoder_spec(ws), "D", rng),
          map_ch_(map_ch), ws_(ws) {}

    // output = D(E_a(appearance) || E_pose(pose_ref, pose_shifted)).
    // E_p's input order encodes the shift carrying pose_ref -> pose_shifted.
    Var<T> generate(const Var<T>& appearance, const Var<T>& pose_ref,
                    const Var<T>& pose_shifted, bool use_cross,
                    bool train = false, std::mt19937* drop_rng = nullptr) const {
        Var<T> app = e_a.forward(appearance, train, drop_rng);
        Var<T> pose_in = concat_c(pose_ref, pose_shifted);
        Var<T> pose = use_cross ? e_p_star.forward(pose_in, train, drop_rng)
                                : e_p.forward(pose_in, train, drop_rng);
        return dec.forward(concat_c(app, pose), train, drop_rng);
    }

    std::vector<NamedParam<T>> all_params() const {
        std::vector<NamedParam<T>> out;
        for (const auto* s : {&e_a, &e_p, &e_p_star, &dec})
            for (const auto& p : s->params()) out.push_back(p);
        return out;
    }

    int map_channels() const { return map_ch_; }
    double width_scale() const { return ws_; }

    Sequential<T> e_a, e_p, e_p_star, dec;

private:
    int map_ch_ = 1;
    double ws_ = 1.0;
};

// Embedding U-Net: k4 s2 down convs mirrored by k4 s2 ConvT ups with
// additive skip connections, single-channel sigmoid output at input
// resolution.
template <typename T>
class UNet {
public:
    UNet() = default;
    UNet(const std::string& prefix, int levels, double ws, std::mt19937& rng)
        : levels_(levels) {
        int c = 1;
        for (int i = 0; i < levels; ++i) {
            const int o = scaled(32 << i, ws);
            down_w_.push_back(detail::init_conv_weight<T>(o, c, 4, c * 16, rng));
            down_b_.push_back(make_param(Tensor<T>(1, o, 1, 1)));
            params_.push_back({prefix + ".down" + std::to_string(i) + ".w", down_w_.back()});
            params_.push_back({prefix + ".down" + std::to_string(i) + ".b", down_b_.back()});
            c = o;
        }
        for (int i = 0; i < levels; ++i) {
            const int o = (i + 1 == levels) ? 1 : scaled(32 << (levels - 2 - i), ws);
            up_w_.push_back(detail::init_conv_weight<T>(c, o, 4, c * 16, rng));
            up_b_.push_back(make_param(Tensor<T>(1, o, 1, 1)));
            params_.push_back({prefix + ".up" + std::to_string(i) + ".w", up_w_.back()});
            params_.push_back({prefix + ".up" + std::to_string(i) + ".b", up_b_.back()});
            c = o;
        }
    }

    Var<T> forward(Var<T> x, bool /*train*/ = false) const {
        if (x->value.h % (1 << levels_) != 0)
            throw std::invalid_argument("UNet: input size not divisible by 2^levels");
        std::vector<Var<T>> feats;
        for (int i = 0; i < levels_; ++i) {
            if (i > 0) x = lrelu(x, T(0.2));
            x = conv2d(x, down_w_[i], down_b_[i], 2, 1);
            if (i > 0 && i + 1 < levels_) x = instance_norm2d(x);
            feats.push_back(x);
        }
        for (int i = 0; i < levels_; ++i) {
            x = relu(x);
            x = conv_transpose2d(x, up_w_[i], up_b_[i], 2, 1, 0);
            if (i + 1 < levels_) {
                x = instance_norm2d(x);
                x = add(x, feats[levels_ - 2 - i]);
            }
        }
        return sigmoid(x);
    }

    const std::vector<NamedParam<T>>& params() const { return params_; }
    void set_trainable(bool on) {
        for (auto& p : params_) p.var->requires_grad = on;
    }
    int levels() const { return levels_; }

private:
    int levels_ = 6;
    std::vector<Var<T>> down_w_, down_b_, up_w_, up_b_;
    std::vector<NamedParam<T>> params_;
};

// largest level count a square input supports (table depth is 6)
inline int unet_levels_for(int size) {
    int l = 0;
    while (size % 2 == 0 && size > 1 && l < 6) {
        size /= 2;
        ++l;
    }
    return l;
}

}  // namespace crossloc::nn
