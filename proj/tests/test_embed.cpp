#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "crossloc/embed.hpp"
#include "crossloc/trainutil.hpp"

using namespace crossloc;

namespace {

ImagePatch smooth(int size, unsigned seed) {
    ImagePatch img(1, size, size, 1.0);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 6.28318530717959);
    const double p1 = u(rng), p2 = u(rng);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(0, y, x) = static_cast<float>(
                0.5 + 0.25 * std::sin(6.28318530717959 * 2 * x / size + p1) +
                0.25 * std::cos(6.28318530717959 * 3 * y / size + p2));
    return img;
}

std::vector<CrossSample> cross(int n, unsigned seed0) {
    std::vector<CrossSample> out;
    for (int i = 0; i < n; ++i) {
        CrossSample s;
        s.b_theta = smooth(32, seed0 + i);
        ImagePatch map = smooth(32, seed0 + 500 + i);
        s.requery = [map](int sx, int sy) { return circular_shift(map, -sx, -sy); };
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("embedding preserves geometry metadata") {
    std::mt19937 rng = seeded_rng(1, 1);
    nn::UNet<float> u("H", 5, 0.05, rng);
    ImagePatch img = smooth(32, 2);
    img.resolution = 0.5;
    ImagePatch e = embed_image(u, img);
    CHECK(e.channels == 1);
    CHECK(e.height == 32);
    CHECK(e.width == 32);
    CHECK(e.resolution == 0.5);
    CHECK(e.valid());
}

TEST_CASE("identical embedding networks place the peak at zero") {
    // if both sides share one network and one image, the offset must be 0
    std::mt19937 rng = seeded_rng(3, 1);
    nn::UNet<float> u("H", 5, 0.05, rng);
    ImagePatch img = smooth(32, 4);
    auto [dx, dy] = embedding_offset(u, u, img, img);
    CHECK(dx == 0.0);
    CHECK(dy == 0.0);
}

TEST_CASE("offset solver equals its definition through the public pieces") {
    std::mt19937 rng = seeded_rng(5, 1);
    nn::UNet<float> h_b("H_B", 5, 0.05, rng);
    nn::UNet<float> h_bt("H_Bt", 5, 0.05, rng);
    ImagePatch b = smooth(32, 6);
    ImagePatch bt = smooth(32, 7);
    auto [dx, dy] = embedding_offset(h_b, h_bt, b, bt);
    CorrelationSurface s = correlate_images_padded(embed_image(h_b, b), embed_image(h_bt, bt));
    auto [ex, ey] = peak(s, PeakMode::hard);
    CHECK(dx == ex);
    CHECK(dy == ey);
}

TEST_CASE("embedding training moves both networks and keeps the generator frozen") {
    std::mt19937 rng = seeded_rng(7, 1);
    nn::GeneratorBundle<float> gen(1, 0.05, rng);
    nn::UNet<float> h_b("H_B", 5, 0.05, rng);
    nn::UNet<float> h_bt("H_Bt", 5, 0.05, rng);
    const double gen_sum = param_checksum(gen.all_params());
    const double hb_sum = param_checksum(h_b.params());
    const double hbt_sum = param_checksum(h_bt.params());

    EmbedTrainOptions opt;
    opt.max_epochs = 1;
    opt.seed = 8;
    opt.lr = 1e-3;  // large enough to move the float32 weights measurably
    const auto dir = std::filesystem::temp_directory_path() / "crossloc_embed_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    opt.checkpoint_path = (dir / "embed.ck").string();

    TrainResult r = train_embeddings(h_b, h_bt, gen, cross(3, 10), cross(1, 20), opt);
    CHECK(r.epochs == 1);
    CHECK(std::isfinite(r.best_val));
    CHECK(param_checksum(gen.all_params()) == gen_sum);
    CHECK(param_checksum(h_b.params()) != hb_sum);
    CHECK(param_checksum(h_bt.params()) != hbt_sum);
    CHECK(std::filesystem::exists(dir / "embed.ck"));
}

TEST_CASE("embedding training is deterministic") {
    auto run = [&]() {
        std::mt19937 rng = seeded_rng(9, 1);
        nn::GeneratorBundle<float> gen(1, 0.05, rng);
        nn::UNet<float> h_b("H_B", 5, 0.05, rng);
        nn::UNet<float> h_bt("H_Bt", 5, 0.05, rng);
        EmbedTrainOptions opt;
        opt.max_epochs = 1;
        opt.seed = 10;
        train_embeddings(h_b, h_bt, gen, cross(2, 30), {}, opt);
        return param_checksum(h_b.params()) + param_checksum(h_bt.params());
    };
    CHECK(run() == run());
}

TEST_CASE("empty training set is rejected") {
    std::mt19937 rng = seeded_rng(11, 1);
    nn::GeneratorBundle<float> gen(1, 0.05, rng);
    nn::UNet<float> h_b("H_B", 5, 0.05, rng);
    nn::UNet<float> h_bt("H_Bt", 5, 0.05, rng);
    CHECK_THROWS_AS(train_embeddings(h_b, h_bt, gen, {}, {}, EmbedTrainOptions{}),
                    std::invalid_argument);
}
