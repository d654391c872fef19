#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "crossloc/geometry.hpp"

using namespace crossloc;

namespace {

ImagePatch ramp3() {
    ImagePatch img(1, 3, 3, 1.0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) img.at(0, y, x) = static_cast<float>(y * 3 + x + 1) / 10.0f;
    return img;
}

ImagePatch smooth(int size, unsigned seed) {
    ImagePatch img(1, size, size, 1.0);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * 3.14159265358979);
    double p1 = u(rng), p2 = u(rng);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(0, y, x) = static_cast<float>(
                0.5 + 0.25 * std::sin(2.0 * 3.14159265358979 * x / size + p1) +
                0.25 * std::cos(2.0 * 3.14159265358979 * y / size + p2));
    return img;
}

}  // namespace

TEST_CASE("angle normalisation") {
    CHECK(normalize_deg(190.0) == doctest::Approx(-170.0));
    CHECK(normalize_deg(-180.0) == doctest::Approx(180.0));
    CHECK(normalize_deg(180.0) == doctest::Approx(180.0));
    CHECK(normalize_deg(360.0) == doctest::Approx(0.0));
    CHECK(normalize_deg(-540.0) == doctest::Approx(180.0));
}

TEST_CASE("pose composition") {
    Pose2 r = compose({1, 0, 90}, {1, 0, 0});
    CHECK(r.x == doctest::Approx(1.0));
    CHECK(r.y == doctest::Approx(1.0));
    CHECK(r.theta == doctest::Approx(90.0));

    Pose2 t = compose({2, 3, 0}, {-1, 4, 30});
    CHECK(t.x == doctest::Approx(1.0));
    CHECK(t.y == doctest::Approx(7.0));
    CHECK(t.theta == doctest::Approx(30.0));
}

TEST_CASE("pose group properties") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    std::uniform_real_distribution<double> a(-179.0, 179.0);
    for (int i = 0; i < 50; ++i) {
        Pose2 p(u(rng), u(rng), a(rng)), q(u(rng), u(rng), a(rng)), r(u(rng), u(rng), a(rng));
        Pose2 lhs = compose(compose(p, q), r);
        Pose2 rhs = compose(p, compose(q, r));
        CHECK(lhs.x == doctest::Approx(rhs.x).epsilon(1e-9));
        CHECK(lhs.y == doctest::Approx(rhs.y).epsilon(1e-9));
        CHECK(std::abs(normalize_deg(lhs.theta - rhs.theta)) < 1e-9);

        Pose2 id = compose(p, inverse(p));
        CHECK(id.x == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(id.y == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(std::abs(normalize_deg(id.theta)) < 1e-9);
    }
}

TEST_CASE("90 degree rotation of a 3x3 patch") {
    ImagePatch img = ramp3();
    ImagePatch out = rotate(img, 90.0, Interp::nearest);
    // columns of the input become rows: content from +x moves towards +y
    const float expect[3][3] = {{0.7f, 0.4f, 0.1f}, {0.8f, 0.5f, 0.2f}, {0.9f, 0.6f, 0.3f}};
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) CHECK(out.at(0, y, x) == doctest::Approx(expect[y][x]));
}

TEST_CASE("integer shift is exact") {
    ImagePatch img = ramp3();
    ImagePatch out = shift(img, 1.0, 0.0, Interp::nearest);
    CHECK(out.at(0, 0, 1) == doctest::Approx(0.1f));
    CHECK(out.at(0, 0, 2) == doctest::Approx(0.2f));
    CHECK(out.at(0, 0, 0) == doctest::Approx(0.0f));  // vacated border is zero
    CHECK(out.at(0, 2, 1) == doctest::Approx(0.7f));
}

TEST_CASE("circular shift wraps and inverts exactly") {
    ImagePatch img = smooth(16, 3);
    ImagePatch s = circular_shift(img, 5, -3);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            CHECK(s.at(0, (y - 3 + 16) % 16, (x + 5) % 16) == img.at(0, y, x));
    ImagePatch back = circular_shift(s, -5, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);
}

TEST_CASE("rotation round trip on the interior") {
    ImagePatch img = smooth(32, 9);
    ImagePatch back = rotate(rotate(img, 17.0), -17.0);
    double mad = 0.0;
    int n = 0;
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x) {
            mad += std::abs(back.at(0, y, x) - img.at(0, y, x));
            ++n;
        }
    CHECK(mad / n < 0.02);
}

TEST_CASE("warp composes rotation then shift") {
    ImagePatch img = smooth(32, 11);
    ImagePatch direct = warp(img, {30.0, 4.0, -2.0, Interp::bilinear});
    ImagePatch chained = shift(rotate(img, 30.0), 4.0, -2.0);
    double mad = 0.0;
    int n = 0;
    for (int y = 10; y < 22; ++y)
        for (int x = 10; x < 22; ++x) {
            mad += std::abs(direct.at(0, y, x) - chained.at(0, y, x));
            ++n;
        }
    // single resampling vs double resampling: small interior disagreement only
    CHECK(mad / n < 0.02);
}

TEST_CASE("pixel / metre conversions") {
    CHECK(px_to_m(3.97, 0.8665) == doctest::Approx(3.44).epsilon(1e-3));
    CHECK(m_to_px(px_to_m(12.5, 0.5), 0.5) == doctest::Approx(12.5));
    CHECK(px_to_m(10.0, 0.5) == doctest::Approx(5.0));
}
