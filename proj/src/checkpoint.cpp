#include "crossloc/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace crossloc {

namespace {

constexpr std::uint32_t kMagic = 0x584c434b;  // "XLCK"
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put_u32(os, u);
}

float get_f32(std::istream& is) {
    const std::uint32_t u = get_u32(is);
    float f;
    std::memcpy(&f, &u, 4);
    return f;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
    put_u32(f, kMagic);
    put_u32(f, kVersion);
    put_u32(f, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u32(f, static_cast<std::uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(f, static_cast<std::uint32_t>(t.n));
        put_u32(f, static_cast<std::uint32_t>(t.c));
        put_u32(f, static_cast<std::uint32_t>(t.h));
        put_u32(f, static_cast<std::uint32_t>(t.w));
        for (float v : t.v) put_f32(f, v);
    }
    if (!f) throw std::runtime_error("checkpoint: write failed " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot read " + path);
    if (get_u32(f) != kMagic) throw std::runtime_error("checkpoint: bad magic in " + path);
    if (get_u32(f) != kVersion) throw std::runtime_error("checkpoint: unsupported version in " + path);
    const std::uint32_t count = get_u32(f);
    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = get_u32(f);
        std::string name(len, '\0');
        f.read(name.data(), len);
        const int n = static_cast<int>(get_u32(f));
        const int c = static_cast<int>(get_u32(f));
        const int h = static_cast<int>(get_u32(f));
        const int w = static_cast<int>(get_u32(f));
        Tensor<float> t(n, c, h, w);
        for (auto& v : t.v) v = get_f32(f);
        if (!f) throw std::runtime_error("checkpoint: truncated " + path);
        ck.tensors.emplace(std::move(name), std::move(t));
    }
    return ck;
}

}  // namespace crossloc
