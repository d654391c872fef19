#include "crossloc/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace crossloc::simd {

namespace {

Kernels make_scalar() {
    return {&scalar::gemm_f32, &scalar::axpy_f32, &scalar::dot_f32, "scalar"};
}

Kernels make_avx2() {
    return {&avx2::gemm_f32, &avx2::axpy_f32, &avx2::dot_f32, "avx2"};
}

Kernels pick() {
    const char* force = std::getenv("CROSSLOC_SIMD");
    if (force) {
        if (std::strcmp(force, "scalar") == 0) return make_scalar();
        if (std::strcmp(force, "avx2") == 0) return make_avx2();
    }
    return avx2::supported() ? make_avx2() : make_scalar();
}

}  // namespace

const Kernels& active() {
    static const Kernels k = pick();
    return k;
}

}  // namespace crossloc::simd
