#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crossloc {

// Square raster patch, intensities in [0,1], row-major [channel][row][col].
// resolution is metres per pixel.
struct ImagePatch {
    int channels = 0;
    int height = 0;
    int width = 0;
    double resolution = 1.0;
    std::vector<float> data;

    ImagePatch() = default;
    ImagePatch(int c, int h, int w, double res = 1.0)
        : channels(c), height(h), width(w), resolution(res),
          data(static_cast<std::size_t>(c) * h * w, 0.0f) {}

    float& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    std::size_t size() const { return data.size(); }

    // true iff all intensities are finite and in [0,1]
    bool valid() const;
};

// 16-bit binary PGM (P5, maxval 65535). Multi-channel patches are stored as
// channels stacked vertically.
void write_pgm(const ImagePatch& img, const std::string& path);
ImagePatch read_pgm(const std::string& path, int channels = 1, double resolution = 1.0);

}  // namespace crossloc
