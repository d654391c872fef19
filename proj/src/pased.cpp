#include "crossloc/pased.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crossloc/adam.hpp"
#include "crossloc/checkpoint.hpp"
#include "crossloc/trainutil.hpp"

namespace crossloc {

using nn::Var;

namespace {

ImagePatch int_shift(const ImagePatch& img, int dx, int dy) {
    return warp(img, {0.0, static_cast<double>(dx), static_cast<double>(dy), Interp::nearest});
}

void snapshot(const std::vector<nn::NamedParam<float>>& ps, std::vector<Tensor<float>>& out) {
    out.clear();
    for (const auto& p : ps) out.push_back(p.var->value);
}

void restore(const std::vector<nn::NamedParam<float>>& ps, const std::vector<Tensor<float>>& in) {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i].var->value = in[i];
}

void save_params(const std::vector<nn::NamedParam<float>>& ps, const std::string& path) {
    if (path.empty()) return;
    Checkpoint ck;
    ck.put_params(ps);
    ck.save(path);
}

}  // namespace

ImagePatch generate_image(const nn::GeneratorBundle<float>& bundle,
                          const ImagePatch& appearance, const ImagePatch& pose_ref,
                          const ImagePatch& pose_shifted, bool use_cross) {
    Var<float> out = bundle.generate(image_var(appearance), image_var(pose_ref),
                                     image_var(pose_shifted), use_cross, false, nullptr);
    return nn::image_from_tensor(out->value, appearance.resolution);
}

TrainResult pretrain_pased(nn::GeneratorBundle<float>& bundle,
                           const std::vector<ImagePatch>& train_imgs,
                           const std::vector<ImagePatch>& val_imgs,
                           const PasedTrainOptions& opt) {
    if (train_imgs.size() < 2)
        throw std::invalid_argument("pretrain_pased: needs at least two distinct images");

    std::vector<nn::NamedParam<float>> params;
    for (const auto* s : {&bundle.e_a, &bundle.e_p, &bundle.dec})
        for (const auto& p : s->params()) params.push_back(p);
    bundle.e_a.set_trainable(true);
    bundle.e_p.set_trainable(true);
    bundle.dec.set_trainable(true);
    bundle.e_p_star.set_trainable(false);

    nn::Adam<float> adam(params, opt.lr);
    EarlyStopper stop(opt.patience);
    CsvLogger log(opt.csv_path, "epoch,train_loss,val_loss");
    std::mt19937 rng = seeded_rng(opt.seed, 21);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(train_imgs.size()) - 1);
    std::uniform_int_distribution<int> gam(-opt.shift_px, opt.shift_px);

    const int steps = opt.steps_per_epoch > 0 ? opt.steps_per_epoch
                                              : static_cast<int>(train_imgs.size());
    std::vector<Tensor<float>> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainResult res;

    auto pair_loss = [&](const ImagePatch& b1, const ImagePatch& b2, int gx, int gy,
                         bool train_mode, std::mt19937* drop_rng) {
        Var<float> out = bundle.generate(image_var(b1), image_var(b2),
                                         image_var(int_shift(b2, gx, gy)), false,
                                         train_mode, drop_rng);
        return nn::l1_loss(out, image_var(int_shift(b1, gx, gy)));
    };

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        double train_loss = 0.0;
        for (int i = 0; i < steps; ++i) {
            int i1 = pick(rng), i2 = pick(rng);
            while (i2 == i1) i2 = pick(rng);  // distinct pair disentangles pose/appearance
            Var<float> loss = pair_loss(train_imgs[i1], train_imgs[i2], gam(rng), gam(rng),
                                        true, &rng);
            const double lv = loss->value.v[0];
            if (!std::isfinite(lv)) {
                save_params(params, opt.checkpoint_path);
                throw std::runtime_error("pretrain_pased: non-finite loss; checkpoint saved");
            }
            train_loss += lv;
            nn::backward(loss);
            try {
                adam.step();
            } catch (const std::runtime_error&) {
                save_params(params, opt.checkpoint_path);
                throw;
            }
        }
        train_loss /= steps;

        std::mt19937 vrng = seeded_rng(opt.seed, 23);
        std::uniform_int_distribution<int> vgam(-opt.shift_px, opt.shift_px);
        double val_loss = 0.0;
        int vcount = 0;
        for (std::size_t i = 0; i + 1 < val_imgs.size(); i += 2, ++vcount)
            val_loss += pair_loss(val_imgs[i], val_imgs[i + 1], vgam(vrng), vgam(vrng),
                                  false, nullptr)->value.v[0];
        if (vcount > 0) val_loss /= vcount;

        log.row(std::to_string(epoch) + "," + std::to_string(train_loss) + "," +
                std::to_string(val_loss));
        res.epochs = epoch + 1;
        const double gate = vcount > 0 ? val_loss : train_loss;
        if (gate < best_val) {
            best_val = gate;
            snapshot(params, best_params);
        }
        if (stop.update(gate)) {
            res.early_stopped = true;
            break;
        }
    }

    if (!best_params.empty()) restore(params, best_params);
    res.best_val = best_val;
    save_params(bundle.all_params(), opt.checkpoint_path);
    return res;
}

namespace {

// one cross-stage loss graph; gradients reach only E_p*
Var<float> cross_loss(const nn::GeneratorBundle<float>& bundle, const CrossSample& s,
                      int sx, int sy, bool raw_target, bool train_mode,
                      std::mt19937* drop_rng) {
    Var<float> b_theta = image_var(s.b_theta);
    Var<float> a = image_var(s.requery(0, 0));
    Var<float> a_prime = image_var(s.requery(sx, sy));

    // trainable pose codes from the cross-modality encoder
    Var<float> code_a = bundle.e_p_star.forward(nn::concat_c(a, b_theta), train_mode, drop_rng);
    Var<float> code_b =
        bundle.e_p_star.forward(nn::concat_c(a_prime, b_theta), train_mode, drop_rng);

    // frozen nets run in eval mode so the target construction is deterministic
    Var<float> app = bundle.e_a.forward(b_theta, false, nullptr);
    Var<float> bt_alpha = bundle.dec.forward(nn::concat_c(app, code_a), false, nullptr);
    Var<float> bt_beta = bundle.dec.forward(nn::concat_c(app, code_b), false, nullptr);
    Var<float> code_zero =
        bundle.e_p.forward(nn::concat_c(b_theta, b_theta), false, nullptr);
    Var<float> bt_zero = bundle.dec.forward(nn::concat_c(app, code_zero), false, nullptr);

    // E_p(bt_alpha, bt_zero) encodes -alpha; applied to the beta-shifted
    // appearance it decodes the beta-alpha image
    Var<float> code_neg_alpha =
        bundle.e_p.forward(nn::concat_c(bt_alpha, bt_zero), false, nullptr);
    Var<float> app_beta = bundle.e_a.forward(bt_beta, false, nullptr);
    Var<float> combined =
        bundle.dec.forward(nn::concat_c(app_beta, code_neg_alpha), false, nullptr);

    // beta - alpha = (-sx, -sy): the re-queried centre moved by +s, so the
    // content moved by -s
    ImagePatch target_img = warp(s.b_theta, {0.0, static_cast<double>(-sx),
                                             static_cast<double>(-sy), Interp::nearest});
    Var<float> target;
    if (raw_target) {
        target = image_var(target_img);
    } else {
        Var<float> code_t = bundle.e_p.forward(
            nn::concat_c(nn::detach(b_theta), image_var(target_img)), false, nullptr);
        Var<float> app_t = bundle.e_a.forward(nn::detach(b_theta), false, nullptr);
        target = nn::detach(bundle.dec.forward(nn::concat_c(app_t, code_t), false, nullptr));
    }
    return nn::l1_loss(combined, target);
}

}  // namespace

TrainResult train_cross(nn::GeneratorBundle<float>& bundle,
                        const std::vector<CrossSample>& train,
                        const std::vector<CrossSample>& val,
                        const PasedTrainOptions& opt) {
    if (train.empty()) throw std::invalid_argument("train_cross: empty training set");

    bundle.e_a.set_trainable(false);
    bundle.e_p.set_trainable(false);
    bundle.dec.set_trainable(false);
    bundle.e_p_star.set_trainable(true);

    std::vector<nn::NamedParam<float>> frozen;
    for (const auto* s : {&bundle.e_a, &bundle.e_p, &bundle.dec})
        for (const auto& p : s->params()) frozen.push_back(p);
    const double frozen_sum = param_checksum(frozen);

    nn::Adam<float> adam(bundle.e_p_star.params(), opt.lr);
    EarlyStopper stop(opt.patience);
    CsvLogger log(opt.csv_path, "epoch,train_loss,val_loss");
    std::mt19937 rng = seeded_rng(opt.seed, 31);
    std::uniform_int_distribution<int> sh(-opt.shift_px, opt.shift_px);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Tensor<float>> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainResult res;

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_loss = 0.0;
        for (std::size_t i : order) {
            Var<float> loss =
                cross_loss(bundle, train[i], sh(rng), sh(rng), opt.raw_target, true, &rng);
            const double lv = loss->value.v[0];
            if (!std::isfinite(lv)) {
                save_params(bundle.e_p_star.params(), opt.checkpoint_path);
                throw std::runtime_error("train_cross: non-finite loss; checkpoint saved");
            }
            train_loss += lv;
            nn::backward(loss);
            try {
                adam.step();
            } catch (const std::runtime_error&) {
                save_params(bundle.e_p_star.params(), opt.checkpoint_path);
                throw;
            }
            if (param_checksum(frozen) != frozen_sum)
                throw std::logic_error("train_cross: frozen parameters changed");
        }
        train_loss /= train.size();

        std::mt19937 vrng = seeded_rng(opt.seed, 33);
        std::uniform_int_distribution<int> vsh(-opt.shift_px, opt.shift_px);
        double val_loss = 0.0;
        for (const auto& s : val)
            val_loss +=
                cross_loss(bundle, s, vsh(vrng), vsh(vrng), opt.raw_target, false, nullptr)
                    ->value.v[0];
        if (!val.empty()) val_loss /= val.size();

        log.row(std::to_string(epoch) + "," + std::to_string(train_loss) + "," +
                std::to_string(val_loss));
        res.epochs = epoch + 1;
        const double gate = val.empty() ? train_loss : val_loss;
        if (gate < best_val) {
            best_val = gate;
            snapshot(bundle.e_p_star.params(), best_params);
        }
        if (stop.update(gate)) {
            res.early_stopped = true;
            break;
        }
    }

    if (!best_params.empty()) restore(bundle.e_p_star.params(), best_params);
    res.best_val = best_val;
    save_params(bundle.all_params(), opt.checkpoint_path);
    return res;
}

}  // namespace crossloc
