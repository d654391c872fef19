#pragma once

#include <utility>

#include "crossloc/image.hpp"
#include "crossloc/tensor.hpp"

namespace crossloc {

// Dense translation-score grid. scores(dy mod H, dx mod W) holds the score
// for the candidate shift (dx, dy) that carries the first image's content
// onto the second.
struct CorrelationSurface {
    int height = 0;
    int width = 0;
    std::vector<double> scores;  // row-major
    int peak_dx = 0;
    int peak_dy = 0;
    double peak_value = 0.0;

    double at(int y, int x) const { return scores[static_cast<std::size_t>(y) * width + x]; }
};

enum class PeakMode { hard, soft };

// Circular correlation of zero-meaned single-channel images.
CorrelationSurface correlate_images(const ImagePatch& a, const ImagePatch& b);

// 2x zero-padded variant used at inference; returned surface has the same
// H x W indexing as the circular one but without wrap-around aliasing.
CorrelationSurface correlate_images_padded(const ImagePatch& a, const ImagePatch& b);

// Hard: integer argmax decoded as signed shifts in [-H/2, H/2).
// Soft: expectation of the signed shift under softmax(tau * scores).
std::pair<double, double> peak(const CorrelationSurface& s, PeakMode mode, double tau = 10.0);

}  // namespace crossloc
