#include "crossloc/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "crossloc/adam.hpp"
#include "crossloc/checkpoint.hpp"
#include "crossloc/trainutil.hpp"

namespace crossloc {

using nn::Var;

ImagePatch embed_image(const nn::UNet<float>& net, const ImagePatch& img) {
    Var<float> e = net.forward(image_var(img));
    return nn::image_from_tensor(e->value, img.resolution);
}

std::pair<double, double> embedding_offset(const nn::UNet<float>& h_b,
                                           const nn::UNet<float>& h_bt,
                                           const ImagePatch& b_real,
                                           const ImagePatch& b_synth) {
    CorrelationSurface s =
        correlate_images_padded(embed_image(h_b, b_real), embed_image(h_bt, b_synth));
    return peak(s, PeakMode::hard);
}

namespace {

Var<float> offset_target(int sx, int sy) {
    Tensor<float> t(1, 2, 1, 1);
    t.v[0] = static_cast<float>(-sx);  // beta - alpha = -s
    t.v[1] = static_cast<float>(-sy);
    return nn::constant(std::move(t));
}

Var<float> embed_loss(const nn::UNet<float>& h_b, const nn::UNet<float>& h_bt,
                      const nn::GeneratorBundle<float>& frozen, const CrossSample& s,
                      int sx, int sy, double tau) {
    Var<float> b_theta = image_var(s.b_theta);
    // frozen generation pipeline, detached: only the embeddings learn here
    Var<float> bt_alpha = nn::detach(frozen.generate(
        b_theta, image_var(s.requery(0, 0)), b_theta, true, false, nullptr));
    Var<float> bt_beta = nn::detach(frozen.generate(
        b_theta, image_var(s.requery(sx, sy)), b_theta, true, false, nullptr));

    Var<float> e_real = h_b.forward(b_theta);
    Var<float> e_alpha = h_bt.forward(bt_alpha);
    Var<float> e_beta = h_bt.forward(bt_beta);

    Var<float> beta_hat =
        nn::soft_peak(nn::correlate(e_real, e_beta), static_cast<float>(tau));
    Var<float> neg_alpha_hat =
        nn::soft_peak(nn::correlate(e_alpha, e_real), static_cast<float>(tau));
    return nn::l1_loss(nn::add(beta_hat, neg_alpha_hat), offset_target(sx, sy));
}

}  // namespace

TrainResult train_embeddings(nn::UNet<float>& h_b, nn::UNet<float>& h_bt,
                             const nn::GeneratorBundle<float>& frozen,
                             const std::vector<CrossSample>& train,
                             const std::vector<CrossSample>& val,
                             const EmbedTrainOptions& opt) {
    if (train.empty()) throw std::invalid_argument("train_embeddings: empty training set");

    std::vector<nn::NamedParam<float>> params;
    for (const auto& p : h_b.params()) params.push_back(p);
    for (const auto& p : h_bt.params()) params.push_back(p);
    h_b.set_trainable(true);
    h_bt.set_trainable(true);

    nn::Adam<float> adam(params, opt.lr);
    EarlyStopper stop(opt.patience);
    CsvLogger log(opt.csv_path, "epoch,train_loss,val_loss");
    std::mt19937 rng = seeded_rng(opt.seed, 41);
    std::uniform_int_distribution<int> sh(-opt.shift_px, opt.shift_px);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Tensor<float>> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    TrainResult res;

    auto save = [&](const std::string& path) {
        if (path.empty()) return;
        Checkpoint ck;
        ck.put_params(params);
        ck.save(path);
    };

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double train_loss = 0.0;
        for (std::size_t i : order) {
            Var<float> loss = embed_loss(h_b, h_bt, frozen, train[i], sh(rng), sh(rng), opt.tau);
            const double lv = loss->value.v[0];
            if (!std::isfinite(lv)) {
                save(opt.checkpoint_path);
                throw std::runtime_error("train_embeddings: non-finite loss; checkpoint saved");
            }
            train_loss += lv;
            nn::backward(loss);
            try {
                adam.step();
            } catch (const std::runtime_error&) {
                save(opt.checkpoint_path);
                throw;
            }
        }
        train_loss /= train.size();

        std::mt19937 vrng = seeded_rng(opt.seed, 43);
        std::uniform_int_distribution<int> vsh(-opt.shift_px, opt.shift_px);
        double val_loss = 0.0;
        for (const auto& s : val)
            val_loss += embed_loss(h_b, h_bt, frozen, s, vsh(vrng), vsh(vrng), opt.tau)
                            ->value.v[0];
        if (!val.empty()) val_loss /= val.size();

        log.row(std::to_string(epoch) + "," + std::to_string(train_loss) + "," +
                std::to_string(val_loss));
        res.epochs = epoch + 1;
        const double gate = val.empty() ? train_loss : val_loss;
        if (gate < best_val) {
            best_val = gate;
            best_params.clear();
            for (const auto& p : params) best_params.push_back(p.var->value);
        }
        if (stop.update(gate)) {
            res.early_stopped = true;
            break;
        }
    }

    if (!best_params.empty())
        for (std::size_t i = 0; i < params.size(); ++i) params[i].var->value = best_params[i];
    res.best_val = best_val;
    save(opt.checkpoint_path);
    return res;
}

}  // namespace crossloc
