#include "crossloc/simd.hpp"

#include <immintrin.h>

namespace crossloc::simd::avx2 {

bool supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

// 4x16 register tile: 8 accumulators, broadcasts of A, streaming loads of B.
inline void tile4x16(std::size_t k, std::size_t lda, std::size_t ldb, std::size_t ldc,
                     const float* a, const float* b, float* c) {
    __m256 c00 = _mm256_loadu_ps(c + 0 * ldc);
    __m256 c01 = _mm256_loadu_ps(c + 0 * ldc + 8);
    __m256 c10 = _mm256_loadu_ps(c + 1 * ldc);
    __m256 c11 = _mm256_loadu_ps(c + 1 * ldc + 8);
    __m256 c20 = _mm256_loadu_ps(c + 2 * ldc);
    __m256 c21 = _mm256_loadu_ps(c + 2 * ldc + 8);
    __m256 c30 = _mm256_loadu_ps(c + 3 * ldc);
    __m256 c31 = _mm256_loadu_ps(c + 3 * ldc + 8);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
        const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
        __m256 av;
        av = _mm256_broadcast_ss(a + 0 * lda + p);
        c00 = _mm256_fmadd_ps(av, b0, c00);
        c01 = _mm256_fmadd_ps(av, b1, c01);
        av = _mm256_broadcast_ss(a + 1 * lda + p);
        c10 = _mm256_fmadd_ps(av, b0, c10);
        c11 = _mm256_fmadd_ps(av, b1, c11);
        av = _mm256_broadcast_ss(a + 2 * lda + p);
        c20 = _mm256_fmadd_ps(av, b0, c20);
        c21 = _mm256_fmadd_ps(av, b1, c21);
        av = _mm256_broadcast_ss(a + 3 * lda + p);
        c30 = _mm256_fmadd_ps(av, b0, c30);
        c31 = _mm256_fmadd_ps(av, b1, c31);
    }
    _mm256_storeu_ps(c + 0 * ldc, c00);
    _mm256_storeu_ps(c + 0 * ldc + 8, c01);
    _mm256_storeu_ps(c + 1 * ldc, c10);
    _mm256_storeu_ps(c + 1 * ldc + 8, c11);
    _mm256_storeu_ps(c + 2 * ldc, c20);
    _mm256_storeu_ps(c + 2 * ldc + 8, c21);
    _mm256_storeu_ps(c + 3 * ldc, c30);
    _mm256_storeu_ps(c + 3 * ldc + 8, c31);
}

inline void edge(std::size_t mm, std::size_t nn, std::size_t k,
                 std::size_t lda, std::size_t ldb, std::size_t ldc,
                 const float* a, const float* b, float* c) {
    for (std::size_t i = 0; i < mm; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const float av = a[i * lda + p];
            if (av == 0.0f) continue;
            const float* brow = b + p * ldb;
            float* crow = c + i * ldc;
            for (std::size_t j = 0; j < nn; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

void gemm_f32(std::size_t m, std::size_t n, std::size_t k,
              const float* a, const float* b, float* c) {
    const std::size_t mb = m / 4 * 4;
    const std::size_t nb = n / 16 * 16;
    // K blocking keeps the B panel in L2 for the typical im2col shapes.
    constexpr std::size_t KC = 256;
    for (std::size_t p0 = 0; p0 < k; p0 += KC) {
        const std::size_t kc = (p0 + KC <= k) ? KC : (k - p0);
        for (std::size_t i = 0; i < mb; i += 4) {
            for (std::size_t j = 0; j < nb; j += 16)
                tile4x16(kc, k, n, n, a + i * k + p0, b + p0 * n + j, c + i * n + j);
            if (nb < n)
                edge(4, n - nb, kc, k, n, n, a + i * k + p0, b + p0 * n + nb, c + i * n + nb);
        }
        if (mb < m)
            edge(m - mb, n, kc, k, n, n, a + mb * k + p0, b + p0 * n, c + mb * n);
    }
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
    const __m256 av = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

float dot_f32(std::size_t n, const float* x, const float* y) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
    alignas(32) float buf[8];
    _mm256_store_ps(buf, acc);
    float s = buf[0] + buf[1] + buf[2] + buf[3] + buf[4] + buf[5] + buf[6] + buf[7];
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace crossloc::simd::avx2
