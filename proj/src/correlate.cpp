#include "crossloc/correlate.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "crossloc/fft.hpp"

namespace crossloc {

namespace {

constexpr double kPi = 3.14159265358979323846;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// iterative radix-2, in place
void fft1d(std::complex<double>* a, int n, bool inverse) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / len * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0);
            for (int j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (int i = 0; i < n; ++i) a[i] /= n;
}

void fft2d(std::vector<std::complex<double>>& a, int h, int w, bool inverse) {
    for (int y = 0; y < h; ++y) fft1d(&a[static_cast<std::size_t>(y) * w], w, inverse);
    std::vector<std::complex<double>> col(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col[y] = a[static_cast<std::size_t>(y) * w + x];
        fft1d(col.data(), h, inverse);
        for (int y = 0; y < h; ++y) a[static_cast<std::size_t>(y) * w + x] = col[y];
    }
}

enum class Mode { correlate, convolve };

// requires power-of-two h and w
void spectral(int h, int w, const double* a, const double* b, double* out, Mode mode) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<std::complex<double>> fa(n), fb(n);
    for (std::size_t i = 0; i < n; ++i) {
        fa[i] = a[i];
        fb[i] = b[i];
    }
    fft2d(fa, h, w, false);
    fft2d(fb, h, w, false);
    for (std::size_t i = 0; i < n; ++i)
        fa[i] = (mode == Mode::correlate) ? std::conj(fa[i]) * fb[i] : fa[i] * fb[i];
    fft2d(fa, h, w, true);
    for (std::size_t i = 0; i < n; ++i) out[i] = fa[i].real();
}

}  // namespace

namespace fftutil {

void cross_correlate(int h, int w, const double* a, const double* b, double* out) {
    if (is_pow2(h) && is_pow2(w)) {
        spectral(h, w, a, b, out, Mode::correlate);
        return;
    }
    for (int sy = 0; sy < h; ++sy)
        for (int sx = 0; sx < w; ++sx) {
            double s = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    s += a[y * w + x] * b[((y + sy) % h) * w + (x + sx) % w];
            out[sy * w + sx] = s;
        }
}

void convolve(int h, int w, const double* a, const double* b, double* out) {
    if (is_pow2(h) && is_pow2(w)) {
        spectral(h, w, a, b, out, Mode::convolve);
        return;
    }
    for (int qy = 0; qy < h; ++qy)
        for (int qx = 0; qx < w; ++qx) {
            double s = 0;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    s += a[y * w + x] * b[(((qy - y) % h + h) % h) * w + (((qx - x) % w + w) % w)];
            out[qy * w + qx] = s;
        }
}

}  // namespace fftutil

namespace {

std::vector<double> zero_mean(const ImagePatch& img) {
    if (img.channels != 1) throw std::invalid_argument("correlate: single-channel only");
    std::vector<double> v(img.data.size());
    double m = 0;
    for (float f : img.data) m += f;
    m /= static_cast<double>(img.data.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.data[i] - m;
    return v;
}

void find_peak(CorrelationSurface& s) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.scores.size(); ++i)
        if (s.scores[i] > s.scores[best]) best = i;
    const int iy = static_cast<int>(best) / s.width;
    const int ix = static_cast<int>(best) % s.width;
    s.peak_dx = ix < (s.width + 1) / 2 ? ix : ix - s.width;
    s.peak_dy = iy < (s.height + 1) / 2 ? iy : iy - s.height;
    s.peak_value = s.scores[best];
}

}  // namespace

CorrelationSurface correlate_images(const ImagePatch& a, const ImagePatch& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("correlate: shape mismatch");
    CorrelationSurface s;
    s.height = a.height;
    s.width = a.width;
    s.scores.resize(static_cast<std::size_t>(a.height) * a.width);
    const auto va = zero_mean(a), vb = zero_mean(b);
    fftutil::cross_correlate(a.height, a.width, va.data(), vb.data(), s.scores.data());
    find_peak(s);
    return s;
}

CorrelationSurface correlate_images_padded(const ImagePatch& a, const ImagePatch& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("correlate: shape mismatch");
    const int h = a.height, w = a.width;
    const int h2 = 2 * h, w2 = 2 * w;
    const auto va = zero_mean(a), vb = zero_mean(b);
    std::vector<double> pa(static_cast<std::size_t>(h2) * w2, 0.0), pb(pa.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            pa[static_cast<std::size_t>(y) * w2 + x] = va[static_cast<std::size_t>(y) * w + x];
            pb[static_cast<std::size_t>(y) * w2 + x] = vb[static_cast<std::size_t>(y) * w + x];
        }
    std::vector<double> big(pa.size());
    fftutil::cross_correlate(h2, w2, pa.data(), pb.data(), big.data());
    CorrelationSurface s;
    s.height = h;
    s.width = w;
    s.scores.resize(static_cast<std::size_t>(h) * w);
    // keep shifts in [-H/2, H/2); the padded grid holds them alias-free
    for (int dy = -h / 2; dy < (h + 1) / 2; ++dy)
        for (int dx = -w / 2; dx < (w + 1) / 2; ++dx) {
            const int sy = (dy % h2 + h2) % h2;
            const int sx = (dx % w2 + w2) % w2;
            s.scores[static_cast<std::size_t>((dy % h + h) % h) * w + (dx % w + w) % w] =
                big[static_cast<std::size_t>(sy) * w2 + sx];
        }
    find_peak(s);
    return s;
}

std::pair<double, double> peak(const CorrelationSurface& s, PeakMode mode, double tau) {
    if (mode == PeakMode::hard) {
        return {static_cast<double>(s.peak_dx), static_cast<double>(s.peak_dy)};
    }
    double mx = s.scores[0];
    for (double v : s.scores) mx = std::max(mx, v);
    double sum = 0, ex = 0, ey = 0;
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const double wv = std::exp(tau * (s.at(y, x) - mx));
            sum += wv;
            ex += wv * (x < (s.width + 1) / 2 ? x : x - s.width);
            ey += wv * (y < (s.height + 1) / 2 ? y : y - s.height);
        }
    return {ex / sum, ey / sum};
}

}  // namespace crossloc
