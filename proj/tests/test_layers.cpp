#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "crossloc/gradcheck.hpp"
#include "crossloc/layers.hpp"

using namespace crossloc;
using nn::LayerSpec;

namespace {

Tensor<double> rand_tensor(int n, int c, int h, int w, unsigned seed) {
    Tensor<double> t(n, c, h, w);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.v) v = u(rng);
    return t;
}

}  // namespace

TEST_CASE("parameter naming follows the layer index") {
    std::mt19937 rng(1);
    nn::Sequential<double> net(
        {LayerSpec::Conv(1, 2, 3, 2, 1), LayerSpec::IN(), LayerSpec::ReLU(),
         LayerSpec::ResBlock(2, false)},
        "net", rng);
    const auto& ps = net.params();
    REQUIRE(ps.size() == 6);
    CHECK(ps[0].name == "net.l0.w");
    CHECK(ps[1].name == "net.l0.b");
    CHECK(ps[2].name == "net.l3.w1");
    CHECK(ps[3].name == "net.l3.b1");
    CHECK(ps[4].name == "net.l3.w2");
    CHECK(ps[5].name == "net.l3.b2");
}

TEST_CASE("spec param counts match the allocated tensors") {
    std::mt19937 rng(2);
    std::vector<LayerSpec> specs = {LayerSpec::Conv(3, 8, 3, 2, 1), LayerSpec::IN(),
                                    LayerSpec::ReLU(), LayerSpec::ResBlock(8, true),
                                    LayerSpec::ConvT(8, 4, 3, 2, 1, 1), LayerSpec::Sigmoid()};
    nn::Sequential<double> net(specs, "n", rng);
    std::size_t expect = 0;
    for (const auto& s : specs) expect += s.param_count();
    std::size_t got = 0;
    for (const auto& p : net.params()) got += p.var->value.size();
    CHECK(got == expect);
}

TEST_CASE("stride-2 stages halve and ConvT stages double the resolution") {
    std::mt19937 rng(3);
    nn::Sequential<double> down({LayerSpec::Conv(1, 4, 3, 2, 1)}, "d", rng);
    nn::Sequential<double> up({LayerSpec::ConvT(4, 2, 3, 2, 1, 1)}, "u", rng);
    auto x = nn::constant(rand_tensor(1, 1, 16, 16, 4));
    auto mid = down.forward(x, false, nullptr);
    CHECK(mid->value.c == 4);
    CHECK(mid->value.h == 8);
    auto out = up.forward(mid, false, nullptr);
    CHECK(out->value.c == 2);
    CHECK(out->value.h == 16);
    CHECK(out->value.w == 16);
}

TEST_CASE("residual block preserves shape") {
    std::mt19937 rng(5);
    nn::Sequential<double> net({LayerSpec::ResBlock(3, false)}, "r", rng);
    auto x = nn::constant(rand_tensor(2, 3, 7, 7, 6));
    auto y = net.forward(x, false, nullptr);
    CHECK(y->value.same_shape(x->value));
}

TEST_CASE("sequential gradients match finite differences") {
    std::mt19937 rng(7);
    nn::Sequential<double> net(
        {LayerSpec::Conv(1, 2, 3, 2, 1), LayerSpec::IN(), LayerSpec::ReLU(),
         LayerSpec::ResBlock(2, false), LayerSpec::ConvT(2, 1, 3, 2, 1, 1),
         LayerSpec::Sigmoid()},
        "net", rng);
    Tensor<double> x = rand_tensor(1, 1, 6, 6, 8);
    Tensor<double> tgt = rand_tensor(1, 1, 6, 6, 9);
    auto make_loss = [&]() {
        return nn::l1_loss(net.forward(nn::constant(x), false, nullptr), nn::constant(tgt));
    };
    auto rep = nn::gradient_check(make_loss, net.params(), 12, 1e-5);
    INFO("worst " << rep.worst);
    CHECK(rep.max_rel_err < 1e-5);
}

TEST_CASE("set_trainable gates gradient flow") {
    std::mt19937 rng(10);
    nn::Sequential<double> net({LayerSpec::Conv(1, 1, 3, 1, 1)}, "net", rng);
    net.set_trainable(false);
    auto loss = nn::l1_loss(net.forward(nn::constant(rand_tensor(1, 1, 4, 4, 11)), false, nullptr),
                            nn::constant(Tensor<double>(1, 1, 4, 4)));
    CHECK_FALSE(loss->requires_grad);
    net.set_trainable(true);
    auto loss2 = nn::l1_loss(net.forward(nn::constant(rand_tensor(1, 1, 4, 4, 11)), false, nullptr),
                             nn::constant(Tensor<double>(1, 1, 4, 4)));
    CHECK(loss2->requires_grad);
    nn::backward(loss2);
    CHECK(net.params()[0].var->grad.size() == net.params()[0].var->value.size());
}

TEST_CASE("block dropout is active only in training mode") {
    std::mt19937 rng(12);
    nn::Sequential<double> net({LayerSpec::ResBlock(2, true)}, "net", rng);
    Tensor<double> x = rand_tensor(1, 2, 8, 8, 13);
    auto e1 = net.forward(nn::constant(x), false, nullptr);
    auto e2 = net.forward(nn::constant(x), false, nullptr);
    for (std::size_t i = 0; i < e1->value.v.size(); ++i) CHECK(e1->value.v[i] == e2->value.v[i]);

    std::mt19937 d1(1), d2(2);
    auto t1 = net.forward(nn::constant(x), true, &d1);
    auto t2 = net.forward(nn::constant(x), true, &d2);
    double diff = 0.0;
    for (std::size_t i = 0; i < t1->value.v.size(); ++i)
        diff += std::abs(t1->value.v[i] - t2->value.v[i]);
    CHECK(diff > 0.0);
}
