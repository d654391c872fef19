// Fast acceptance gate: gradient integrity, correlation oracle, geometry
// oracles, and architecture-table conformance. One PASS/FAIL line per
// criterion; exit status reflects the worst result.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "crossloc/correlate.hpp"
#include "crossloc/geometry.hpp"
#include "crossloc/gradcheck.hpp"
#include "crossloc/models.hpp"

using namespace crossloc;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor<double> rand_tensor(int n, int c, int h, int w, std::mt19937& rng) {
    Tensor<double> t(n, c, h, w);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto& v : t.v) v = u(rng);
    return t;
}

// max relative FD error of l1(net_output, random target) over sampled coords
double check_network(const std::function<nn::Var<double>()>& fwd,
                     const std::vector<nn::NamedParam<double>>& params,
                     std::mt19937& rng, int samples = 2) {
    Tensor<double> tgt;
    {
        auto out = fwd();
        tgt = rand_tensor(out->value.n, out->value.c, out->value.h, out->value.w, rng);
    }
    auto make_loss = [&]() { return nn::l1_loss(fwd(), nn::constant(tgt)); };
    return nn::gradient_check(make_loss, params, samples, 1e-5, rng()).max_rel_err;
}

void criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(11);
    double worst = 0.0;
    std::string worst_net = "ops";

    // operator-level sweep (the unit suite covers these too; here they gate)
    {
        auto x = nn::make_param(rand_tensor(2, 2, 6, 6, rng));
        auto w = nn::make_param(rand_tensor(3, 2, 3, 3, rng));
        auto b = nn::make_param(rand_tensor(1, 3, 1, 1, rng));
        auto wt = nn::make_param(rand_tensor(3, 2, 3, 3, rng));
        // each op lists exactly the parameters its graph consumes; anything
        // else would retain stale gradients from the previous backward pass
        using Op = std::function<nn::Var<double>()>;
        std::vector<std::tuple<const char*, Op, std::vector<nn::NamedParam<double>>>> ops;
        ops.emplace_back("conv", [&]() { return nn::conv2d(x, w, b, 2, 1); },
                         std::vector<nn::NamedParam<double>>{{"x", x}, {"w", w}, {"b", b}});
        ops.emplace_back(
            "convT",
            [&]() {
                return nn::conv_transpose2d(nn::conv2d(x, w, b, 2, 1), wt,
                                            nn::constant(Tensor<double>(1, 2, 1, 1)), 2, 1, 1);
            },
            std::vector<nn::NamedParam<double>>{{"x", x}, {"w", w}, {"b", b}, {"wt", wt}});
        for (auto [name, op] : std::initializer_list<std::pair<const char*, Op>>{
                 {"in", [&]() { return nn::instance_norm2d(x); }},
                 {"relu", [&]() { return nn::relu(x); }},
                 {"lrelu", [&]() { return nn::lrelu(x, 0.2); }},
                 {"sigmoid", [&]() { return nn::sigmoid(x); }},
                 {"pad", [&]() { return nn::reflection_pad2d(x, 2); }},
                 {"sum", [&]() { return nn::sum_per_sample(x); }},
                 {"softmax", [&]() { return nn::softmax_batch(nn::sum_per_sample(x)); }}})
            ops.emplace_back(name, op, std::vector<nn::NamedParam<double>>{{"x", x}});
        for (auto& [name, op, ps] : ops) {
            const double e = check_network(op, ps, rng, 4);
            if (e > worst) {
                worst = e;
                worst_net = std::string("op ") + name;
            }
        }
        auto e1 = nn::make_param(rand_tensor(1, 1, 8, 8, rng));
        auto e2 = nn::make_param(rand_tensor(1, 1, 8, 8, rng));
        const double ec = check_network(
            [&]() { return nn::soft_peak(nn::correlate(e1, e2), 2.0); },
            {{"e1", e1}, {"e2", e2}}, rng, 8);
        if (ec > worst) {
            worst = ec;
            worst_net = "op correlate+soft_peak";
        }
    }

    // full networks at 32x32, architecture-table widths, dropout off
    auto track = [&](const char* name, double e) {
        if (e > worst) {
            worst = e;
            worst_net = name;
        }
    };
    {
        nn::RotSelector<double> f_r(1, 1, 1.0, rng);
        auto map1 = nn::constant(rand_tensor(1, 1, 32, 32, rng));
        auto live3 = nn::constant(rand_tensor(3, 1, 32, 32, rng));
        track("f_R", check_network([&]() { return f_r.select(map1, live3).picked; },
                                   f_r.params(), rng));
    }
    {
        nn::Sequential<double> e_a(nn::encoder_spec(1, 1.0), "E_a", rng);
        auto xin = nn::constant(rand_tensor(1, 1, 32, 32, rng));
        track("E_a", check_network([&]() { return e_a.forward(xin, false, nullptr); },
                                   e_a.params(), rng));
    }
    for (const char* name : {"E_p", "E_p_star"}) {
        nn::Sequential<double> e_p(nn::encoder_spec(2, 1.0), name, rng);
        auto xin = nn::constant(rand_tensor(1, 2, 32, 32, rng));
        track(name, check_network([&]() { return e_p.forward(xin, false, nullptr); },
                                  e_p.params(), rng));
    }
    {
        nn::Sequential<double> dec(nn::decoder_spec(1.0), "D", rng);
        auto zin = nn::constant(rand_tensor(1, 512, 2, 2, rng));
        track("D", check_network([&]() { return dec.forward(zin, false, nullptr); },
                                 dec.params(), rng));
    }
    for (const char* name : {"H_B", "H_Bt"}) {
        nn::UNet<double> u(name, nn::unet_levels_for(32), 1.0, rng);
        auto xin = nn::constant(rand_tensor(1, 1, 32, 32, rng));
        track(name, check_network([&]() { return u.forward(xin); }, u.params(), rng));
    }

    const double secs = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "gradient suite max relative error %.2e (worst: %s), %.0f s",
                  worst, worst_net.c_str(), secs);
    report(1, worst < 1e-3 && secs < 300.0, buf);
}

void criterion2() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    double max_rel = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(16 * 16), b(16 * 16), fast(16 * 16), slow(16 * 16);
        for (auto& v : a) v = u(rng);
        for (auto& v : b) v = u(rng);
        fftutil::cross_correlate(16, 16, a.data(), b.data(), fast.data());
        for (int sy = 0; sy < 16; ++sy)
            for (int sx = 0; sx < 16; ++sx) {
                double s = 0.0;
                for (int y = 0; y < 16; ++y)
                    for (int x = 0; x < 16; ++x)
                        s += a[y * 16 + x] * b[((y + sy) % 16) * 16 + (x + sx) % 16];
                slow[sy * 16 + sx] = s;
            }
        for (int i = 0; i < 256; ++i)
            max_rel = std::max(max_rel,
                               std::abs(fast[i] - slow[i]) / std::max(1.0, std::abs(slow[i])));
    }

    int exact = 0;
    std::uniform_int_distribution<int> sh(-15, 15);
    std::uniform_real_distribution<float> uf(0.0f, 1.0f);
    for (int trial = 0; trial < 500; ++trial) {
        ImagePatch img(1, 32, 32, 1.0);
        for (auto& v : img.data) v = uf(rng);
        const int dx = sh(rng), dy = sh(rng);
        CorrelationSurface s = correlate_images(img, circular_shift(img, dx, dy));
        exact += (s.peak_dx == dx && s.peak_dy == dy) ? 1 : 0;
    }

    const double secs = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "fft-vs-direct max rel %.2e on 200 pairs; %d/500 shifts exact, %.0f s",
                  max_rel, exact, secs);
    report(2, max_rel < 1e-6 && exact == 500 && secs < 60.0, buf);
}

void criterion3() {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string why = "all geometry oracles hold";

    ImagePatch img(1, 3, 3, 1.0);
    for (int i = 0; i < 9; ++i) img.data[i] = static_cast<float>(i + 1) / 10.0f;

    // identity warp is exact
    ImagePatch id = warp(img, {0.0, 0.0, 0.0, Interp::nearest});
    for (int i = 0; i < 9; ++i)
        if (id.data[i] != img.data[i]) ok = false, why = "identity warp not exact";

    // integer shift is exact
    ImagePatch sh = shift(img, 1.0, 0.0, Interp::nearest);
    if (sh.at(0, 1, 1) != img.at(0, 1, 0) || sh.at(0, 1, 0) != 0.0f)
        ok = false, why = "integer shift not exact";

    // 90-degree rotation permutes the pixels
    ImagePatch rot = rotate(img, 90.0, Interp::nearest);
    const float expect[9] = {0.7f, 0.4f, 0.1f, 0.8f, 0.5f, 0.2f, 0.9f, 0.6f, 0.3f};
    for (int i = 0; i < 9; ++i)
        if (std::abs(rot.data[i] - expect[i]) > 1e-7f)
            ok = false, why = "90-degree rotation oracle failed";

    // bilinear round trip within interpolation tolerance on the interior
    ImagePatch big(1, 32, 32, 1.0);
    std::mt19937 rng(3);
    std::uniform_real_distribution<float> uf(0.0f, 1.0f);
    for (auto& v : big.data) v = uf(rng);
    ImagePatch back = rotate(rotate(big, 17.0), -17.0);
    double mad = 0.0;
    int n = 0;
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x) {
            mad += std::abs(back.at(0, y, x) - big.at(0, y, x));
            ++n;
        }
    if (mad / n > 0.2) ok = false, why = "rotation round trip out of tolerance";

    // compose example and px/m conversion
    Pose2 c = compose({1, 0, 90}, {1, 0, 0});
    if (std::abs(c.x - 1) > 1e-12 || std::abs(c.y - 1) > 1e-12 || std::abs(c.theta - 90) > 1e-12)
        ok = false, why = "compose example failed";
    if (std::abs(px_to_m(3.97, 0.8665) - 3.44) > 0.005) ok = false, why = "px-to-m example failed";

    const double secs = seconds_since(t0);
    report(3, ok && secs < 60.0, why + " (" + std::to_string(static_cast<int>(secs)) + " s)");
}

void criterion4() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937 rng(44);
    bool ok = true;
    std::string why = "architecture tables conform at 256x256";

    auto rand_f = [&](int n, int c, int h, int w) {
        Tensor<float> t(n, c, h, w);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        for (auto& v : t.v) v = u(rng);
        return nn::constant(std::move(t));
    };

    {
        nn::Sequential<float> enc(nn::encoder_spec(2, 1.0), "E", rng);
        auto z = enc.forward(rand_f(1, 2, 256, 256), false, nullptr);
        if (z->value.c != 256 || z->value.h != 16 || z->value.w != 16)
            ok = false, why = "encoder latent is not 256x16x16";
    }
    {
        nn::Sequential<float> dec(nn::decoder_spec(1.0), "D", rng);
        auto y = dec.forward(rand_f(1, 512, 16, 16), false, nullptr);
        if (y->value.c != 1 || y->value.h != 256 || y->value.w != 256)
            ok = false, why = "decoder does not map 512x16x16 to 1x256x256";
    }
    {
        nn::Sequential<float> trunk(nn::rot_trunk_spec(2, 1.0), "f", rng);
        auto z = trunk.forward(rand_f(1, 2, 256, 256), false, nullptr);
        if (z->value.c != 256 || z->value.h != 16 || z->value.w != 16)
            ok = false, why = "rotation trunk output is not 256x16x16";
    }
    {
        nn::UNet<float> u("H", nn::unet_levels_for(256), 1.0, rng);
        if (u.levels() != 6) ok = false, why = "unet depth at 256 is not 6";
        auto y = u.forward(rand_f(1, 1, 256, 256));
        if (y->value.c != 1 || y->value.h != 256 || y->value.w != 256)
            ok = false, why = "unet does not preserve 256x256";
    }

    const double secs = seconds_since(t0);
    report(4, ok && secs < 60.0, why + " (" + std::to_string(static_cast<int>(secs)) + " s)");
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    return g_failures == 0 ? 0 : 1;
}
