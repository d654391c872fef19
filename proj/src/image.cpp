#include "crossloc/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace crossloc {

bool ImagePatch::valid() const {
    for (float v : data) {
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f) return false;
    }
    return true;
}

void write_pgm(const ImagePatch& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    const int rows = img.height * img.channels;
    f << "P5\n" << img.width << " " << rows << "\n65535\n";
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * img.width * 2);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        float v = img.data[i];
        if (v < 0.0f) v = 0.0f;
        if (v > 1.0f) v = 1.0f;
        const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0f));
        buf[2 * i] = static_cast<unsigned char>(q >> 8);  // big-endian per PGM spec
        buf[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

ImagePatch read_pgm(const std::string& path, int channels, double resolution) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    int w = 0, rows = 0, maxval = 0;
    f >> magic >> w >> rows >> maxval;
    if (magic != "P5" || maxval != 65535) throw std::runtime_error("unsupported pgm: " + path);
    f.get();  // single whitespace after header
    if (rows % channels != 0) throw std::runtime_error("channel count mismatch: " + path);
    ImagePatch img(channels, rows / channels, w, resolution);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * w * 2);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("truncated pgm: " + path);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const std::uint16_t q = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        img.data[i] = static_cast<float>(q) / 65535.0f;
    }
    return img;
}

}  // namespace crossloc
