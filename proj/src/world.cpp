#include "crossloc/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace crossloc {

namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

// distance from a point to the trajectory circle of radius r
double ring_distance(double x, double y, double r) {
    return std::abs(std::hypot(x, y) - r);
}

struct Hit {
    double t;       // entry distance along the ray
    double t_exit;  // exit distance (== t for point scatterers)
    double reflect;
};

// slab intersection of the ray p + t*d with an oriented rect, done in the
// rect's own frame; fills [t_in, t_out] and returns false when there is no
// forward hit
bool ray_rect_span(double px, double py, double dx, double dy, const WorldRect& r,
                   double& t_in, double& t_out) {
    const double ca = std::cos(r.angle_deg * kDegToRad);
    const double sa = std::sin(r.angle_deg * kDegToRad);
    const double rx = px - r.cx, ry = py - r.cy;
    double tmin = -1e300, tmax = 1e300;
    const double lo[2] = {-r.hw, -r.hh};
    const double hi[2] = {r.hw, r.hh};
    const double p[2] = {ca * rx + sa * ry, -sa * rx + ca * ry};
    const double d[2] = {ca * dx + sa * dy, -sa * dx + ca * dy};
    for (int i = 0; i < 2; ++i) {
        if (std::abs(d[i]) < 1e-12) {
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
            continue;
        }
        double t0 = (lo[i] - p[i]) / d[i];
        double t1 = (hi[i] - p[i]) / d[i];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
    }
    if (tmax < tmin || tmax < 0.0 || tmin <= 0.0) return false;  // inside: no return
    t_in = tmin;
    t_out = tmax;
    return true;
}

}  // namespace

World World::build(const WorldSpec& spec) {
    World w;
    w.spec_ = spec;
    std::mt19937 rng(spec.seed);
    const double half = spec.extent_m * 0.45;
    std::uniform_real_distribution<double> pos(-half, half);
    std::uniform_real_distribution<double> rect_half(2.0, 9.0);
    std::uniform_real_distribution<double> rect_ang(0.0, 180.0);
    std::uniform_real_distribution<double> refl(0.4, 1.0);
    for (int i = 0; i < spec.n_rects; ++i) {
        for (int tries = 0; tries < 200; ++tries) {
            WorldRect r{pos(rng), pos(rng), rect_half(rng), rect_half(rng),
                        rect_ang(rng), refl(rng)};
            const double clearance = spec.keepout_band_m + std::hypot(r.hw, r.hh);
            if (ring_distance(r.cx, r.cy, spec.keepout_radius_m) > clearance) {
                w.rects_.push_back(r);
                break;
            }
        }
    }
    std::uniform_real_distribution<double> srefl(0.3, 1.0);
    for (int i = 0; i < spec.n_scatter; ++i)
        w.scats_.push_back({pos(rng), pos(rng), srefl(rng)});
    return w;
}

ImagePatch render_overhead(const World& world, double cx_m, double cy_m,
                           double resolution, int size) {
    if (resolution <= 0) throw std::invalid_argument("render_overhead: resolution");
    const double half_span = size * 0.5 * resolution;
    const double limit = world.spec().extent_m * 0.5;
    if (std::abs(cx_m) + half_span > limit || std::abs(cy_m) + half_span > limit)
        throw std::out_of_range("render_overhead: query outside world extent");

    // snap the centre to the global pixel lattice for bit-exact re-query
    const long long gx0 = std::llround(cx_m / resolution);
    const long long gy0 = std::llround(cy_m / resolution);

    ImagePatch img(1, size, size, resolution);

    std::vector<std::array<double, 2>> rect_cs;
    for (const auto& rect : world.rects())
        rect_cs.push_back({std::cos(rect.angle_deg * kDegToRad),
                           std::sin(rect.angle_deg * kDegToRad)});

    // scatterers rasterise to a single lattice cell each
    std::unordered_map<long long, float> cells;
    for (const auto& s : world.scatterers()) {
        const long long gx = std::llround(s.x / resolution);
        const long long gy = std::llround(s.y / resolution);
        const long long key = gy * 4000003LL + gx;
        float& v = cells[key];
        v = std::max(v, static_cast<float>(s.reflect));
    }

    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const long long gx = gx0 + c - size / 2;
            const long long gy = gy0 + r - size / 2;
            const double wx = gx * resolution;
            const double wy = gy * resolution;
            float v = 0.0f;
            for (std::size_t ri = 0; ri < world.rects().size(); ++ri) {
                const auto& rect = world.rects()[ri];
                const double ca = rect_cs[ri][0], sa = rect_cs[ri][1];
                const double rx = wx - rect.cx, ry = wy - rect.cy;
                if (std::abs(ca * rx + sa * ry) <= rect.hw &&
                    std::abs(-sa * rx + ca * ry) <= rect.hh)
                    v = std::max(v, static_cast<float>(rect.reflect));
            }
            auto it = cells.find(gy * 4000003LL + gx);
            if (it != cells.end()) v = std::max(v, it->second);
            img.at(0, r, c) = v;
        }
    return img;
}

ImagePatch render_range(const World& world, double x_m, double y_m,
                        double heading_deg, const SensorModel& sensor,
                        double resolution, int size, unsigned noise_seed) {
    if (resolution <= 0) throw std::invalid_argument("render_range: resolution");
    const double limit = world.spec().extent_m * 0.5;
    if (std::abs(x_m) > limit || std::abs(y_m) > limit)
        throw std::out_of_range("render_range: pose outside world extent");

    ImagePatch img(1, size, size, resolution);
    std::mt19937 rng(noise_seed);
    std::normal_distribution<double> jitter(0.0, sensor.noise_sigma_m);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const bool noisy = noise_seed != 0;

    std::vector<Hit> hits;
    for (int ai = 0; ai < sensor.azimuths; ++ai) {
        const double phi = ai * 360.0 / sensor.azimuths;       // relative azimuth
        const double psi = (heading_deg + phi) * kDegToRad;    // world direction
        const double dx = std::sin(psi), dy = -std::cos(psi);

        // heading-up splat: forward is up, right is +x; a 3x3 footprint
        // approximates the sensor's beam width so returns are not lone
        // pixels that vanish under resampling
        auto splat = [&](double t, double amp) {
            if (noisy) {
                if (u01(rng) < sensor.dropout_prob) return;
                t += jitter(rng);
            }
            const double prad = phi * kDegToRad;
            const int px = static_cast<int>(std::lround(size / 2 + t * std::sin(prad) / resolution));
            const int py = static_cast<int>(std::lround(size / 2 - t * std::cos(prad) / resolution));
            const double a0 = std::clamp(amp, 0.0, 1.0);
            for (int oy = -1; oy <= 1; ++oy)
                for (int ox = -1; ox <= 1; ++ox) {
                    const int qx = px + ox, qy = py + oy;
                    if (qx < 0 || qx >= size || qy < 0 || qy >= size) continue;
                    const double k = ox == 0 && oy == 0 ? 1.0 : (ox == 0 || oy == 0 ? 0.6 : 0.35);
                    float& v = img.at(0, qy, qx);
                    v = std::max(v, static_cast<float>(a0 * k));
                }
        };

        hits.clear();
        for (const auto& rect : world.rects()) {
            double t_in = 0.0, t_out = 0.0;
            if (ray_rect_span(x_m, y_m, dx, dy, rect, t_in, t_out) &&
                t_in <= sensor.max_range_m)
                hits.push_back({t_in, std::min(t_out, sensor.max_range_m), rect.reflect});
        }
        for (const auto& s : world.scatterers()) {
            const double rx = s.x - x_m, ry = s.y - y_m;
            const double t = rx * dx + ry * dy;
            if (t <= 0.0 || t > sensor.max_range_m) continue;
            const double perp = std::abs(rx * dy - ry * dx);
            if (perp <= resolution * 0.6) hits.push_back({t, t, s.reflect});
        }
        if (hits.empty()) continue;
        std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.t < b.t; });
        if (sensor.kind == SensorModel::Kind::lidar) {
            splat(hits[0].t, hits[0].reflect);
            continue;
        }
        // radar: every structure along the ray returns power, attenuated by
        // the number of structures already penetrated; blocks additionally
        // scatter through their interior with a per-metre decay, so visible
        // structure appears extended rather than edge-only
        for (std::size_t hi = 0; hi < hits.size(); ++hi) {
            const double base = hits[hi].reflect *
                                std::pow(sensor.attenuation, static_cast<double>(hi));
            for (double t = hits[hi].t; t <= hits[hi].t_exit + 1e-9; t += resolution * 0.9)
                splat(t, base * std::pow(0.93, t - hits[hi].t));
        }
    }
    return img;
}

ImagePatch pointcloud_to_image(const std::vector<std::array<double, 3>>& points,
                               double resolution, int size) {
    if (resolution <= 0) throw std::invalid_argument("pointcloud_to_image: resolution");
    ImagePatch img(1, size, size, resolution);
    for (const auto& p : points) {
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]))
            throw std::invalid_argument("pointcloud_to_image: non-finite point");
        if (p[2] < 0.0) continue;  // below the ground plane
        const int px = static_cast<int>(std::lround(size / 2 + p[0] / resolution));
        const int py = static_cast<int>(std::lround(size / 2 + p[1] / resolution));
        if (px >= 0 && px < size && py >= 0 && py < size) img.at(0, py, px) = 1.0f;
    }
    return img;
}

}  // namespace crossloc
