#pragma once

namespace crossloc::fftutil {

// Circular cross-correlation: out(s) = sum_p a(p) * b(p+s), indices wrap.
// Uses radix-2 FFTs when h and w are powers of two, direct sums otherwise.
void cross_correlate(int h, int w, const double* a, const double* b, double* out);

// Circular convolution: out(q) = sum_s a(s) * b(q-s).
void convolve(int h, int w, const double* a, const double* b, double* out);

}  // namespace crossloc::fftutil
