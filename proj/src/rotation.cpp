#include "crossloc/rotation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossloc/adam.hpp"
#include "crossloc/checkpoint.hpp"
#include "crossloc/trainutil.hpp"

namespace crossloc {

using nn::Var;

nn::Var<float> image_var(const ImagePatch& img) {
    return nn::constant(nn::tensor_from_image<float>(img));
}

nn::Var<float> stack_var(const std::vector<ImagePatch>& imgs) {
    const auto& f = imgs.front();
    Tensor<float> t(static_cast<int>(imgs.size()), f.channels, f.height, f.width);
    const std::size_t per = f.data.size();
    for (std::size_t i = 0; i < imgs.size(); ++i)
        std::copy_n(imgs[i].data.data(), per, &t.v[i * per]);
    return nn::constant(std::move(t));
}

RotationStack build_stack(const ImagePatch& base, double theta0,
                          double half_range, double step) {
    if (step <= 0) throw std::invalid_argument("build_stack: step must be positive");
    if (half_range < 0) throw std::invalid_argument("build_stack: negative half_range");
    const int K = static_cast<int>(std::ceil(half_range / step));
    RotationStack st;
    st.base = base;
    for (int k = -K; k <= K; ++k) {
        const double a = theta0 + k * step;
        st.angles.push_back(a);
        st.copies.push_back(warp(base, {a, 0.0, 0.0, Interp::bilinear}));
    }
    return st;
}

double estimate_theta(const std::vector<double>& weights,
                      const std::vector<double>& angles, double theta0, bool soft) {
    if (weights.empty() || weights.size() != angles.size())
        throw std::invalid_argument("estimate_theta: empty or mismatched stack");
    if (soft) {
        double s = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * angles[i];
        return s;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < weights.size(); ++i) {
        if (weights[i] > weights[best] ||
            (weights[i] == weights[best] &&
             std::abs(angles[i] - theta0) < std::abs(angles[best] - theta0)))
            best = i;
    }
    return angles[best];
}

namespace {

// random map-stack angles: always contains 0 (the L1 target must be in the
// stack), the rest uniform over the covered range but outside a one-step
// dead zone so the target stays unambiguous, order shuffled
std::vector<double> map_stack_angles(int n, double half_range, double step,
                                     std::mt19937& rng) {
    std::vector<double> a{0.0};
    std::uniform_real_distribution<double> u(-half_range, half_range);
    for (int i = 1; i < n; ++i) {
        double v = u(rng);
        while (std::abs(v) < step) v = u(rng);
        a.push_back(v);
    }
    std::shuffle(a.begin(), a.end(), rng);
    return a;
}

// zero everything outside the inscribed circle, where rotations clip
void mask_circle(ImagePatch& img) {
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;
    const double r2 = 0.25 * std::min(img.width, img.height) *
                      std::min(img.width, img.height);
    for (int ch = 0; ch < img.channels; ++ch)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                if ((x - cx) * (x - cx) + (y - cy) * (y - cy) > r2)
                    img.at(ch, y, x) = 0.0f;
}

Var<float> sample_loss(const nn::RotSelector<float>& f_r, const RotSample& s,
                       const RotTrainOptions& opt, std::mt19937& rng) {
    const ImagePatch* live_img = &s.live;
    double theta0 = s.theta0;
    ImagePatch aug;
    if (opt.augment_deg > 0.0) {
        std::uniform_real_distribution<double> au(-opt.augment_deg, opt.augment_deg);
        const double d = au(rng);
        aug = warp(s.live, {d, 0.0, 0.0, Interp::bilinear});
        live_img = &aug;
        theta0 -= d;  // rotating the content moves the alignment angle by -d
    }
    RotationStack live = build_stack(*live_img, theta0, opt.half_range, opt.step);
    Var<float> map_v = image_var(s.map);
    auto pass1 = f_r.select(map_v, stack_var(live.copies));
    if (opt.single_pass) return nn::l1_loss(pass1.picked, map_v);

    // every copy is resampled twice through generic angles and masked to the
    // inscribed circle, so no interpolation or clipping artefact marks the
    // zero-angle target; otherwise pass 2 can find it without looking at the
    // pass-1 output and pass 1 receives no training signal
    const int n = static_cast<int>(live.copies.size());
    std::uniform_real_distribution<double> gu(8.0, 18.0);
    const double g = (rng() & 1u ? 1.0 : -1.0) * gu(rng);
    const ImagePatch pre = warp(s.map, {g, 0.0, 0.0, Interp::bilinear});
    std::vector<ImagePatch> map_copies;
    for (double a : map_stack_angles(n, opt.half_range, opt.step, rng)) {
        ImagePatch c = warp(pre, {a - g, 0.0, 0.0, Interp::bilinear});
        mask_circle(c);
        map_copies.push_back(std::move(c));
    }
    auto pass2 = f_r.select(stack_var(map_copies), pass1.picked);
    return nn::l1_loss(pass2.picked, map_v);
}

void save_params(const nn::RotSelector<float>& f_r, const std::string& path) {
    if (path.empty()) return;
    Checkpoint ck;
    ck.put_params(f_r.params());
    ck.save(path);
}

}  // namespace

TrainResult train_rotation(nn::RotSelector<float>& f_r,
                           const std::vector<RotSample>& train,
                           const std::vector<RotSample>& val,
                           const RotTrainOptions& opt) {
    if (train.empty()) throw std::invalid_argument("train_rotation: empty training set");
    nn::Adam<float> adam(f_r.params(), opt.lr);
    EarlyStopper stop(opt.patience);
    CsvLogger log(opt.csv_path, "epoch,train_loss,val_loss");

    std::mt19937 rng = seeded_rng(opt.seed, 11);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<Tensor<float>> best_params;
    TrainResult res;
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t per_epoch = order.size();
        if (opt.max_train_per_epoch > 0)
            per_epoch = std::min<std::size_t>(per_epoch, opt.max_train_per_epoch);

        double train_loss = 0.0;
        for (std::size_t i = 0; i < per_epoch; ++i) {
            Var<float> loss = sample_loss(f_r, train[order[i]], opt, rng);
            const double lv = loss->value.v[0];
            if (!std::isfinite(lv)) {
                save_params(f_r, opt.checkpoint_path);
                throw std::runtime_error("train_rotation: non-finite loss; checkpoint saved");
            }
            train_loss += lv;
            nn::backward(loss);
            try {
                adam.step();
            } catch (const std::runtime_error&) {
                save_params(f_r, opt.checkpoint_path);
                throw;
            }
        }
        train_loss /= per_epoch;

        std::mt19937 vrng = seeded_rng(opt.seed, 13);  // same val stacks every epoch
        double val_loss = 0.0;
        for (const auto& s : val) val_loss += sample_loss(f_r, s, opt, vrng)->value.v[0];
        if (!val.empty()) val_loss /= val.size();

        log.row(std::to_string(epoch) + "," + std::to_string(train_loss) + "," +
                std::to_string(val_loss));
        res.epochs = epoch + 1;

        const double gate = val.empty() ? train_loss : val_loss;
        if (gate < best_val) {
            best_val = gate;
            best_params.clear();
            for (const auto& p : f_r.params()) best_params.push_back(p.var->value);
        }
        if (stop.update(gate)) {
            res.early_stopped = true;
            break;
        }
    }

    if (!best_params.empty()) {
        const auto& ps = f_r.params();
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i].var->value = best_params[i];
    }
    res.best_val = best_val;
    save_params(f_r, opt.checkpoint_path);
    return res;
}

std::pair<double, std::vector<double>> infer_rotation(
    const nn::RotSelector<float>& f_r, const ImagePatch& map,
    const ImagePatch& live, double theta0, double half_range, double step) {
    RotationStack st = build_stack(live, theta0, half_range, step);
    auto sel = f_r.select(image_var(map), stack_var(st.copies));
    std::vector<double> w(sel.weights->value.v.begin(), sel.weights->value.v.end());
    return {estimate_theta(w, st.angles, theta0), w};
}

}  // namespace crossloc
