#include "crossloc/simd.hpp"

namespace crossloc::simd::scalar {

void gemm_f32(std::size_t m, std::size_t n, std::size_t k,
              const float* a, const float* b, float* c) {
    for (std::size_t i = 0; i < m; ++i) {
        float* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const float av = a[i * k + p];
            if (av == 0.0f) continue;
            const float* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

float dot_f32(std::size_t n, const float* x, const float* y) {
    float s = 0.0f;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace crossloc::simd::scalar
