#include "crossloc/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace crossloc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double normalize_deg(double deg) {
    double d = std::fmod(deg, 360.0);
    if (d <= -180.0) d += 360.0;
    if (d > 180.0) d -= 360.0;
    return d;
}

Pose2::Pose2(double px, double py, double th) : x(px), y(py), theta(normalize_deg(th)) {}

Pose2 compose(const Pose2& p, const Pose2& q) {
    const double r = p.theta * kPi / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    return Pose2(p.x + c * q.x - s * q.y,
                 p.y + s * q.x + c * q.y,
                 p.theta + q.theta);
}

Pose2 inverse(const Pose2& p) {
    const double r = p.theta * kPi / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    // R(-theta) * (-t)
    return Pose2(-(c * p.x + s * p.y), -(-s * p.x + c * p.y), -p.theta);
}

ImagePatch warp(const ImagePatch& img, const WarpSpec& spec) {
    if (img.height != img.width)
        throw std::invalid_argument("warp expects a square patch");
    const int h = img.height, w = img.width;
    ImagePatch out(img.channels, h, w, img.resolution);
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    const double r = spec.theta * kPi / 180.0;
    const double c = std::cos(r), s = std::sin(r);
    // inverse map: undo the shift, then rotate by -theta about the centre
    for (int ch = 0; ch < img.channels; ++ch) {
        for (int oy = 0; oy < h; ++oy) {
            for (int ox = 0; ox < w; ++ox) {
                const double ux = ox - spec.dx - cx;
                const double uy = oy - spec.dy - cy;
                const double sx = c * ux + s * uy + cx;
                const double sy = -s * ux + c * uy + cy;
                float v = 0.0f;
                if (spec.interp == Interp::nearest) {
                    const int ix = static_cast<int>(std::lround(sx));
                    const int iy = static_cast<int>(std::lround(sy));
                    if (ix >= 0 && ix < w && iy >= 0 && iy < h) v = img.at(ch, iy, ix);
                } else {
                    const int x0 = static_cast<int>(std::floor(sx));
                    const int y0 = static_cast<int>(std::floor(sy));
                    const double fx = sx - x0, fy = sy - y0;
                    auto sample = [&](int yy, int xx) -> double {
                        if (xx < 0 || xx >= w || yy < 0 || yy >= h) return 0.0;
                        return img.at(ch, yy, xx);
                    };
                    v = static_cast<float>(
                        (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
                        fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1)));
                }
                out.at(ch, oy, ox) = v;
            }
        }
    }
    return out;
}

ImagePatch rotate(const ImagePatch& img, double theta_deg, Interp interp) {
    return warp(img, {theta_deg, 0.0, 0.0, interp});
}

ImagePatch shift(const ImagePatch& img, double dx, double dy, Interp interp) {
    return warp(img, {0.0, dx, dy, interp});
}

ImagePatch circular_shift(const ImagePatch& img, int dx, int dy) {
    const int h = img.height, w = img.width;
    ImagePatch out(img.channels, h, w, img.resolution);
    auto wrap = [](int v, int n) { return ((v % n) + n) % n; };
    for (int ch = 0; ch < img.channels; ++ch)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(ch, wrap(y + dy, h), wrap(x + dx, w)) = img.at(ch, y, x);
    return out;
}

double px_to_m(double v_px, double res_m_per_px) {
    if (res_m_per_px <= 0.0) throw std::invalid_argument("resolution must be positive");
    return v_px * res_m_per_px;
}

double m_to_px(double v_m, double res_m_per_px) {
    if (res_m_per_px <= 0.0) throw std::invalid_argument("resolution must be positive");
    return v_m / res_m_per_px;
}

}  // namespace crossloc
