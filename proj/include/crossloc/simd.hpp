#pragma once

#include <cstddef>

// Small data-parallel kernels used by the conv/correlation inner loops.
// Every kernel has a scalar reference implementation and (on x86 with AVX2)
// a vectorised variant; the active set is picked once at startup and can be
// forced with CROSSLOC_SIMD=scalar|avx2.

namespace crossloc::simd {

struct Kernels {
    // C[M,N] += A[M,K] * B[K,N], all row-major, contiguous.
    void (*gemm_f32)(std::size_t m, std::size_t n, std::size_t k,
                     const float* a, const float* b, float* c);
    // y += alpha * x
    void (*axpy_f32)(std::size_t n, float alpha, const float* x, float* y);
    float (*dot_f32)(std::size_t n, const float* x, const float* y);
    const char* name;
};

namespace scalar {
void gemm_f32(std::size_t m, std::size_t n, std::size_t k,
              const float* a, const float* b, float* c);
void axpy_f32(std::size_t n, float alpha, const float* x, float* y);
float dot_f32(std::size_t n, const float* x, const float* y);
}  // namespace scalar

namespace avx2 {
void gemm_f32(std::size_t m, std::size_t n, std::size_t k,
              const float* a, const float* b, float* c);
void axpy_f32(std::size_t n, float alpha, const float* x, float* y);
float dot_f32(std::size_t n, const float* x, const float* y);
bool supported();
}  // namespace avx2

// Active kernel table (runtime-dispatched, cached after first call).
const Kernels& active();

inline void gemm_f32(std::size_t m, std::size_t n, std::size_t k,
                     const float* a, const float* b, float* c) {
    active().gemm_f32(m, n, k, a, b, c);
}
inline void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
    active().axpy_f32(n, alpha, x, y);
}
inline float dot_f32(std::size_t n, const float* x, const float* y) {
    return active().dot_f32(n, x, y);
}

}  // namespace crossloc::simd
