#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crossloc/simd.hpp"

using namespace crossloc;

namespace {

std::vector<float> rand_vec(std::size_t n, std::mt19937& rng) {
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("gemm variants agree on awkward shapes") {
    if (!simd::avx2::supported()) return;
    std::mt19937 rng(1);
    // deliberately off the 4x16 tile grid
    const std::size_t shapes[][3] = {{1, 1, 1},  {3, 5, 7},   {4, 16, 8},
                                     {5, 17, 9}, {13, 33, 21}, {64, 64, 64}};
    for (auto [m, n, k] : shapes) {
        auto a = rand_vec(m * k, rng);
        auto b = rand_vec(k * n, rng);
        auto c0 = rand_vec(m * n, rng);
        auto c1 = c0;
        simd::scalar::gemm_f32(m, n, k, a.data(), b.data(), c0.data());
        simd::avx2::gemm_f32(m, n, k, a.data(), b.data(), c1.data());
        for (std::size_t i = 0; i < m * n; ++i)
            CHECK(std::abs(c0[i] - c1[i]) <= 1e-4 * (1.0 + std::abs(c0[i])));
    }
}

TEST_CASE("axpy and dot variants agree") {
    if (!simd::avx2::supported()) return;
    std::mt19937 rng(2);
    for (std::size_t n : {1u, 7u, 8u, 9u, 31u, 256u, 1000u}) {
        auto x = rand_vec(n, rng);
        auto y0 = rand_vec(n, rng);
        auto y1 = y0;
        simd::scalar::axpy_f32(n, 0.37f, x.data(), y0.data());
        simd::avx2::axpy_f32(n, 0.37f, x.data(), y1.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(y0[i] == doctest::Approx(y1[i]).epsilon(1e-5));

        const float d0 = simd::scalar::dot_f32(n, x.data(), y0.data());
        const float d1 = simd::avx2::dot_f32(n, x.data(), y1.data());
        CHECK(std::abs(d0 - d1) <= 1e-4 * (1.0 + std::abs(d0)));
    }
}

TEST_CASE("gemm matches a hand example") {
    // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
    const float a[] = {1, 2, 3, 4};
    const float b[] = {5, 6, 7, 8};
    float c[] = {0, 0, 0, 0};
    simd::gemm_f32(2, 2, 2, a, b, c);
    CHECK(c[0] == 19);
    CHECK(c[1] == 22);
    CHECK(c[2] == 43);
    CHECK(c[3] == 50);
}

TEST_CASE("active kernel table is dispatched") {
    const auto& k = simd::active();
    CHECK(k.name != nullptr);
    CHECK((std::string(k.name) == "scalar" || std::string(k.name) == "avx2"));
    if (simd::avx2::supported() && !std::getenv("CROSSLOC_SIMD"))
        CHECK(std::string(k.name) == "avx2");
}
