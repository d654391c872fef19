#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "crossloc/fft.hpp"
#include "crossloc/simd.hpp"
#include "crossloc/tensor.hpp"

// Reverse-mode tape over NCHW tensors. Only the operators the architecture
// tables need, each with an analytic backward that is finite-difference
// checked in the test suite.

namespace crossloc::nn {

template <typename T>
struct Node;

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    std::vector<Var<T>> parents;
    std::function<void(Node&)> backprop;
};

template <typename T>
Var<T> constant(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    return n;
}

template <typename T>
Var<T> make_param(Tensor<T> v) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    return n;
}

template <typename T>
Var<T> detach(const Var<T>& x) {
    return constant(x->value);
}

namespace detail {

template <typename T>
void gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            if (av == T(0)) continue;
            const T* brow = b + p * n;
            T* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
}
template <>
inline void gemm<float>(std::size_t m, std::size_t n, std::size_t k,
                        const float* a, const float* b, float* c) {
    simd::gemm_f32(m, n, k, a, b, c);
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
template <>
inline void axpy<float>(std::size_t n, float alpha, const float* x, float* y) {
    simd::axpy_f32(n, alpha, x, y);
}

template <typename T>
T dot(std::size_t n, const T* x, const T* y) {
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}
template <>
inline float dot<float>(std::size_t n, const float* x, const float* y) {
    return simd::dot_f32(n, x, y);
}

template <typename T>
void transpose(std::size_t rows, std::size_t cols, const T* a, T* at) {
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) at[j * rows + i] = a[i * cols + j];
}

// col[(c*k+ky)*k+kx][oy*Wo+ox] = x[c][oy*s-p+ky][ox*s-p+kx], zero outside
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int s, int p, int Ho, int Wo, T* col) {
    const std::size_t N = static_cast<std::size_t>(Ho) * Wo;
    std::size_t row = 0;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx, ++row) {
                T* dst = col + row * N;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) {
                        for (int ox = 0; ox < Wo; ++ox) dst[oy * Wo + ox] = T(0);
                        continue;
                    }
                    const T* src = x + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * s - p + kx;
                        dst[oy * Wo + ox] = (ix >= 0 && ix < W) ? src[ix] : T(0);
                    }
                }
            }
}

// scatter-add adjoint of im2col
template <typename T>
void col2im(const T* col, int C, int H, int W, int k, int s, int p, int Ho, int Wo, T* x) {
    const std::size_t N = static_cast<std::size_t>(Ho) * Wo;
    std::size_t row = 0;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx, ++row) {
                const T* src = col + row * N;
                for (int oy = 0; oy < Ho; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= H) continue;
                    T* dst = x + (static_cast<std::size_t>(c) * H + iy) * W;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < W) dst[ix] += src[oy * Wo + ox];
                    }
                }
            }
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

}  // namespace detail

// ---- operators ----

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& wt, const Var<T>& b, int stride, int pad) {
    const Tensor<T>& X = x->value;
    const Tensor<T>& W = wt->value;
    const int k = W.h;
    if (W.c != X.c) throw std::invalid_argument("conv2d: channel mismatch");
    if (b->value.c != W.n) throw std::invalid_argument("conv2d: bias mismatch");
    const int Ho = (X.h + 2 * pad - k) / stride + 1;
    const int Wo = (X.w + 2 * pad - k) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: empty output");
    const int Cout = W.n, Cin = X.c;
    const std::size_t K = static_cast<std::size_t>(Cin) * k * k;
    const std::size_t N = static_cast<std::size_t>(Ho) * Wo;

    Tensor<T> out(X.n, Cout, Ho, Wo);
    std::vector<T> col(K * N);
    for (int ni = 0; ni < X.n; ++ni) {
        detail::im2col(&X.v[static_cast<std::size_t>(ni) * Cin * X.h * X.w],
                       Cin, X.h, X.w, k, stride, pad, Ho, Wo, col.data());
        T* o = &out.v[static_cast<std::size_t>(ni) * Cout * N];
        detail::gemm<T>(Cout, N, K, W.v.data(), col.data(), o);
        for (int co = 0; co < Cout; ++co) {
            const T bias = b->value.v[co];
            for (std::size_t j = 0; j < N; ++j) o[co * N + j] += bias;
        }
    }

    auto xc = x;  // keep inputs alive for recompute in backward
    const int H = X.h, Wd = X.w, S = stride, P = pad;
    return detail::make_op<T>(
        std::move(out), {x, wt, b}, [xc, k, S, P, Ho, Wo, Cout, Cin, H, Wd, K, N](Node<T>& self) {
            Var<T> px = self.parents[0], pw = self.parents[1], pb = self.parents[2];
            const Tensor<T>& X2 = px->value;
            std::vector<T> col(K * N), colT(N * K), wT;
            if (px->requires_grad) {
                wT.resize(K * Cout);
                detail::transpose<T>(Cout, K, pw->value.v.data(), wT.data());
            }
            std::vector<T> dcol(K * N);
            for (int ni = 0; ni < X2.n; ++ni) {
                const T* dout = &self.grad.v[static_cast<std::size_t>(ni) * Cout * N];
                if (pw->requires_grad) {
                    detail::im2col(&X2.v[static_cast<std::size_t>(ni) * Cin * H * Wd],
                                   Cin, H, Wd, k, S, P, Ho, Wo, col.data());
                    detail::transpose<T>(K, N, col.data(), colT.data());
                    detail::gemm<T>(Cout, K, N, dout, colT.data(), pw->grad.v.data());
                }
                if (pb->requires_grad) {
                    for (int co = 0; co < Cout; ++co) {
                        T s = 0;
                        for (std::size_t j = 0; j < N; ++j) s += dout[co * N + j];
                        pb->grad.v[co] += s;
                    }
                }
                if (px->requires_grad) {
                    std::fill(dcol.begin(), dcol.end(), T(0));
                    detail::gemm<T>(K, N, Cout, wT.data(), dout, dcol.data());
                    detail::col2im(dcol.data(), Cin, H, Wd, k, S, P, Ho, Wo,
                                   &px->grad.v[static_cast<std::size_t>(ni) * Cin * H * Wd]);
                }
            }
        });
}

template <typename T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& wt, const Var<T>& b,
                        int stride, int pad, int out_pad) {
    const Tensor<T>& X = x->value;
    const Tensor<T>& W = wt->value;  // (Cin, Cout, k, k)
    const int k = W.h;
    if (W.n != X.c) throw std::invalid_argument("conv_transpose2d: channel mismatch");
    if (out_pad < 0 || out_pad >= stride)
        throw std::invalid_argument("conv_transpose2d: out_pad must be in [0, stride)");
    const int Ho = (X.h - 1) * stride - 2 * pad + k + out_pad;
    const int Wo = (X.w - 1) * stride - 2 * pad + k + out_pad;
    const int Cin = X.c, Cout = W.c;
    if (b->value.c != Cout) throw std::invalid_argument("conv_transpose2d: bias mismatch");
    const std::size_t K = static_cast<std::size_t>(Cout) * k * k;
    const std::size_t N = static_cast<std::size_t>(X.h) * X.w;
    // the adjoint im2col over the output must reproduce the input grid
    if ((Ho + 2 * pad - k) / stride + 1 != X.h)
        throw std::invalid_argument("conv_transpose2d: inconsistent geometry");

    std::vector<T> wT(K * Cin);
    detail::transpose<T>(Cin, K, W.v.data(), wT.data());
    Tensor<T> out(X.n, Cout, Ho, Wo);
    std::vector<T> tmp(K * N);
    for (int ni = 0; ni < X.n; ++ni) {
        std::fill(tmp.begin(), tmp.end(), T(0));
        detail::gemm<T>(K, N, Cin, wT.data(), &X.v[static_cast<std::size_t>(ni) * Cin * N],
                        tmp.data());
        T* o = &out.v[static_cast<std::size_t>(ni) * Cout * Ho * Wo];
        detail::col2im(tmp.data(), Cout, Ho, Wo, k, stride, pad, X.h, X.w, o);
        for (int co = 0; co < Cout; ++co) {
            const T bias = b->value.v[co];
            T* oc = o + static_cast<std::size_t>(co) * Ho * Wo;
            for (int j = 0; j < Ho * Wo; ++j) oc[j] += bias;
        }
    }

    const int Hi = X.h, Wi = X.w, S = stride, P = pad;
    return detail::make_op<T>(
        std::move(out), {x, wt, b}, [k, S, P, Ho, Wo, Cin, Cout, Hi, Wi, K, N](Node<T>& self) {
            Var<T> px = self.parents[0], pw = self.parents[1], pb = self.parents[2];
            std::vector<T> dtmp(K * N), dtmpT(N * K);
            for (int ni = 0; ni < px->value.n; ++ni) {
                const T* dout = &self.grad.v[static_cast<std::size_t>(ni) * Cout * Ho * Wo];
                detail::im2col(dout, Cout, Ho, Wo, k, S, P, Hi, Wi, dtmp.data());
                if (px->requires_grad)
                    detail::gemm<T>(Cin, N, K, pw->value.v.data(), dtmp.data(),
                                    &px->grad.v[static_cast<std::size_t>(ni) * Cin * N]);
                if (pw->requires_grad) {
                    detail::transpose<T>(K, N, dtmp.data(), dtmpT.data());
                    detail::gemm<T>(Cin, K, N,
                                    &px->value.v[static_cast<std::size_t>(ni) * Cin * N],
                                    dtmpT.data(), pw->grad.v.data());
                }
                if (pb->requires_grad) {
                    for (int co = 0; co < Cout; ++co) {
                        T s = 0;
                        for (int j = 0; j < Ho * Wo; ++j)
                            s += dout[static_cast<std::size_t>(co) * Ho * Wo + j];
                        pb->grad.v[co] += s;
                    }
                }
            }
        });
}

template <typename T>
Var<T> instance_norm2d(const Var<T>& x, T eps = T(1e-5)) {
    const Tensor<T>& X = x->value;
    const int HW = X.h * X.w;
    if (HW < 2) throw std::invalid_argument("instance_norm2d: needs H*W >= 2");
    Tensor<T> out(X.n, X.c, X.h, X.w);
    auto xhat = std::make_shared<std::vector<T>>(X.size());
    auto istd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(X.n) * X.c);
    for (int ni = 0; ni < X.n; ++ni)
        for (int ci = 0; ci < X.c; ++ci) {
            const std::size_t off = (static_cast<std::size_t>(ni) * X.c + ci) * HW;
            T mean = 0;
            for (int j = 0; j < HW; ++j) mean += X.v[off + j];
            mean /= HW;
            T var = 0;
            for (int j = 0; j < HW; ++j) {
                const T d = X.v[off + j] - mean;
                var += d * d;
            }
            var /= HW;
            const T is = T(1) / std::sqrt(var + eps);
            (*istd)[static_cast<std::size_t>(ni) * X.c + ci] = is;
            for (int j = 0; j < HW; ++j) {
                const T xh = (X.v[off + j] - mean) * is;
                (*xhat)[off + j] = xh;
                out.v[off + j] = xh;
            }
        }
    const int C = X.c;
    return detail::make_op<T>(std::move(out), {x}, [xhat, istd, HW, C](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (int ni = 0; ni < px->value.n; ++ni)
            for (int ci = 0; ci < C; ++ci) {
                const std::size_t off = (static_cast<std::size_t>(ni) * C + ci) * HW;
                const T is = (*istd)[static_cast<std::size_t>(ni) * C + ci];
                T gsum = 0, gxsum = 0;
                for (int j = 0; j < HW; ++j) {
                    gsum += self.grad.v[off + j];
                    gxsum += self.grad.v[off + j] * (*xhat)[off + j];
                }
                gsum /= HW;
                gxsum /= HW;
                for (int j = 0; j < HW; ++j)
                    px->grad.v[off + j] +=
                        is * (self.grad.v[off + j] - gsum - (*xhat)[off + j] * gxsum);
            }
    });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
    Tensor<T> out = x->value;
    for (T& v : out.v) v = v > T(0) ? v : T(0);
    return detail::make_op<T>(std::move(out), {x}, [](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (std::size_t i = 0; i < self.grad.v.size(); ++i)
            if (px->value.v[i] > T(0)) px->grad.v[i] += self.grad.v[i];
    });
}

template <typename T>
Var<T> lrelu(const Var<T>& x, T ns = T(0.2)) {
    Tensor<T> out = x->value;
    for (T& v : out.v) v = v > T(0) ? v : ns * v;
    return detail::make_op<T>(std::move(out), {x}, [ns](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (std::size_t i = 0; i < self.grad.v.size(); ++i)
            px->grad.v[i] += self.grad.v[i] * (px->value.v[i] > T(0) ? T(1) : ns);
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    Tensor<T> out = x->value;
    for (T& v : out.v) v = T(1) / (T(1) + std::exp(-v));
    auto saved = std::make_shared<Tensor<T>>(out);
    return detail::make_op<T>(std::move(out), {x}, [saved](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (std::size_t i = 0; i < self.grad.v.size(); ++i) {
            const T s = saved->v[i];
            px->grad.v[i] += self.grad.v[i] * s * (T(1) - s);
        }
    });
}

namespace detail {
inline int reflect_index(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}
}  // namespace detail

template <typename T>
Var<T> reflection_pad2d(const Var<T>& x, int p) {
    const Tensor<T>& X = x->value;
    if (p < 0 || p >= std::min(X.h, X.w))
        throw std::invalid_argument("reflection_pad2d: pad too large");
    if (p == 0) return x;
    Tensor<T> out(X.n, X.c, X.h + 2 * p, X.w + 2 * p);
    for (int ni = 0; ni < X.n; ++ni)
        for (int ci = 0; ci < X.c; ++ci)
            for (int y = 0; y < out.h; ++y) {
                const int sy = detail::reflect_index(y - p, X.h);
                for (int xx = 0; xx < out.w; ++xx)
                    out.at(ni, ci, y, xx) = X.at(ni, ci, sy, detail::reflect_index(xx - p, X.w));
            }
    const int H = X.h, W = X.w;
    return detail::make_op<T>(std::move(out), {x}, [p, H, W](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (int ni = 0; ni < px->value.n; ++ni)
            for (int ci = 0; ci < px->value.c; ++ci)
                for (int y = 0; y < self.value.h; ++y) {
                    const int sy = detail::reflect_index(y - p, H);
                    for (int xx = 0; xx < self.value.w; ++xx)
                        px->grad.at(ni, ci, sy, detail::reflect_index(xx - p, W)) +=
                            self.grad.at(ni, ci, y, xx);
                }
    });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double d, bool train, std::mt19937* rng) {
    if (d < 0.0 || d >= 1.0) throw std::invalid_argument("dropout: ratio out of range");
    if (!train || d == 0.0) return x;
    auto mask = std::make_shared<std::vector<T>>(x->value.size());
    std::bernoulli_distribution keep(1.0 - d);
    const T scale = T(1.0 / (1.0 - d));
    Tensor<T> out = x->value;
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        const T m = keep(*rng) ? scale : T(0);
        (*mask)[i] = m;
        out.v[i] *= m;
    }
    return detail::make_op<T>(std::move(out), {x}, [mask](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (std::size_t i = 0; i < self.grad.v.size(); ++i)
            px->grad.v[i] += self.grad.v[i] * (*mask)[i];
    });
}

// (n,c,h,w) -> (n,1,1,1), summing each sample
template <typename T>
Var<T> sum_per_sample(const Var<T>& x) {
    const Tensor<T>& X = x->value;
    Tensor<T> out(X.n, 1, 1, 1);
    const std::size_t per = X.size() / X.n;
    for (int ni = 0; ni < X.n; ++ni) {
        T s = 0;
        for (std::size_t j = 0; j < per; ++j) s += X.v[ni * per + j];
        out.v[ni] = s;
    }
    return detail::make_op<T>(std::move(out), {x}, [per](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (int ni = 0; ni < px->value.n; ++ni) {
            const T g = self.grad.v[ni];
            for (std::size_t j = 0; j < per; ++j) px->grad.v[ni * per + j] += g;
        }
    });
}

// softmax across the batch dimension of an (n,1,1,1) logit vector
template <typename T>
Var<T> softmax_batch(const Var<T>& logits) {
    const Tensor<T>& L = logits->value;
    if (L.c != 1 || L.h != 1 || L.w != 1)
        throw std::invalid_argument("softmax_batch: expects (n,1,1,1)");
    Tensor<T> out(L.n, 1, 1, 1);
    T mx = L.v[0];
    for (T v : L.v) mx = std::max(mx, v);
    T sum = 0;
    for (int i = 0; i < L.n; ++i) {
        out.v[i] = std::exp(L.v[i] - mx);
        sum += out.v[i];
    }
    for (int i = 0; i < L.n; ++i) out.v[i] /= sum;
    auto saved = std::make_shared<Tensor<T>>(out);
    return detail::make_op<T>(std::move(out), {logits}, [saved](Node<T>& self) {
        Var<T> px = self.parents[0];
        T wg = 0;
        for (int i = 0; i < saved->n; ++i) wg += saved->v[i] * self.grad.v[i];
        for (int i = 0; i < saved->n; ++i)
            px->grad.v[i] += saved->v[i] * (self.grad.v[i] - wg);
    });
}

// picked = sum_i weights[i] * stack[i]; stack (n,C,H,W), weights (n,1,1,1) -> (1,C,H,W)
template <typename T>
Var<T> stack_weighted_sum(const Var<T>& stack, const Var<T>& weights) {
    const Tensor<T>& X = stack->value;
    const Tensor<T>& Wt = weights->value;
    if (Wt.n != X.n || Wt.c != 1) throw std::invalid_argument("stack_weighted_sum: shape");
    Tensor<T> out(1, X.c, X.h, X.w);
    const std::size_t per = X.size() / X.n;
    for (int i = 0; i < X.n; ++i)
        detail::axpy<T>(per, Wt.v[i], &X.v[i * per], out.v.data());
    return detail::make_op<T>(std::move(out), {stack, weights}, [per](Node<T>& self) {
        Var<T> ps = self.parents[0], pw = self.parents[1];
        for (int i = 0; i < ps->value.n; ++i) {
            if (pw->requires_grad)
                pw->grad.v[i] += detail::dot<T>(per, self.grad.v.data(), &ps->value.v[i * per]);
            if (ps->requires_grad)
                detail::axpy<T>(per, pw->value.v[i], self.grad.v.data(), &ps->grad.v[i * per]);
        }
    });
}

// (1,C,H,W) -> (n,C,H,W); backward sums over the copies
template <typename T>
Var<T> repeat_n(const Var<T>& x, int n) {
    const Tensor<T>& X = x->value;
    if (X.n != 1) throw std::invalid_argument("repeat_n: expects batch of 1");
    Tensor<T> out(n, X.c, X.h, X.w);
    const std::size_t per = X.size();
    for (int i = 0; i < n; ++i) std::copy_n(X.v.data(), per, &out.v[i * per]);
    return detail::make_op<T>(std::move(out), {x}, [per, n](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (int i = 0; i < n; ++i)
            detail::axpy<T>(per, T(1), &self.grad.v[i * per], px->grad.v.data());
    });
}

template <typename T>
Var<T> concat_c(const Var<T>& a, const Var<T>& b) {
    const Tensor<T>& A = a->value;
    const Tensor<T>& B = b->value;
    if (A.n != B.n || A.h != B.h || A.w != B.w)
        throw std::invalid_argument("concat_c: shape mismatch");
    Tensor<T> out(A.n, A.c + B.c, A.h, A.w);
    const std::size_t hw = static_cast<std::size_t>(A.h) * A.w;
    for (int ni = 0; ni < A.n; ++ni) {
        std::copy_n(&A.v[ni * A.c * hw], A.c * hw, &out.v[ni * (A.c + B.c) * hw]);
        std::copy_n(&B.v[ni * B.c * hw], B.c * hw, &out.v[(ni * (A.c + B.c) + A.c) * hw]);
    }
    const int ca = A.c, cb = B.c;
    return detail::make_op<T>(std::move(out), {a, b}, [ca, cb, hw](Node<T>& self) {
        Var<T> pa = self.parents[0], pb = self.parents[1];
        for (int ni = 0; ni < pa->value.n; ++ni) {
            if (pa->requires_grad)
                detail::axpy<T>(ca * hw, T(1), &self.grad.v[ni * (ca + cb) * hw],
                                &pa->grad.v[ni * ca * hw]);
            if (pb->requires_grad)
                detail::axpy<T>(cb * hw, T(1), &self.grad.v[(ni * (ca + cb) + ca) * hw],
                                &pb->grad.v[ni * cb * hw]);
        }
    });
}

template <typename T>
Var<T> slice_c(const Var<T>& x, int from, int count) {
    const Tensor<T>& X = x->value;
    if (from < 0 || from + count > X.c) throw std::invalid_argument("slice_c: range");
    Tensor<T> out(X.n, count, X.h, X.w);
    const std::size_t hw = static_cast<std::size_t>(X.h) * X.w;
    for (int ni = 0; ni < X.n; ++ni)
        std::copy_n(&X.v[(ni * X.c + from) * hw], count * hw, &out.v[ni * count * hw]);
    const int C = X.c;
    return detail::make_op<T>(std::move(out), {x}, [from, count, hw, C](Node<T>& self) {
        Var<T> px = self.parents[0];
        for (int ni = 0; ni < px->value.n; ++ni)
            detail::axpy<T>(count * hw, T(1), &self.grad.v[ni * count * hw],
                            &px->grad.v[(ni * C + from) * hw]);
    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shape mismatch");
    Tensor<T> out = a->value;
    detail::axpy<T>(out.size(), T(1), b->value.v.data(), out.v.data());
    return detail::make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        for (auto& p : self.parents)
            if (p->requires_grad)
                detail::axpy<T>(self.grad.size(), T(1), self.grad.v.data(), p->grad.v.data());
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("sub: shape mismatch");
    Tensor<T> out = a->value;
    detail::axpy<T>(out.size(), T(-1), b->value.v.data(), out.v.data());
    return detail::make_op<T>(std::move(out), {a, b}, [](Node<T>& self) {
        if (self.parents[0]->requires_grad)
            detail::axpy<T>(self.grad.size(), T(1), self.grad.v.data(),
                            self.parents[0]->grad.v.data());
        if (self.parents[1]->requires_grad)
            detail::axpy<T>(self.grad.size(), T(-1), self.grad.v.data(),
                            self.parents[1]->grad.v.data());
    });
}

// mean absolute difference -> scalar
template <typename T>
Var<T> l1_loss(const Var<T>& a, const Var<T>& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("l1_loss: shape mismatch");
    const std::size_t n = a->value.size();
    T s = 0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a->value.v[i] - b->value.v[i]);
    return detail::make_op<T>(Tensor<T>::scalar(s / T(n)), {a, b}, [n](Node<T>& self) {
        Var<T> pa = self.parents[0], pb = self.parents[1];
        const T g = self.grad.v[0] / T(n);
        for (std::size_t i = 0; i < n; ++i) {
            const T d = pa->value.v[i] - pb->value.v[i];
            const T sg = d > T(0) ? g : (d < T(0) ? -g : T(0));
            if (pa->requires_grad) pa->grad.v[i] += sg;
            if (pb->requires_grad) pb->grad.v[i] -= sg;
        }
    });
}

// Circular cross-correlation of zero-meaned single-channel images.
// surface(s) = sum_p e1hat(p) * e2hat(p+s); peak at t when e2 is e1's
// content moved by t.
template <typename T>
Var<T> correlate(const Var<T>& e1, const Var<T>& e2) {
    const Tensor<T>& A = e1->value;
    const Tensor<T>& B = e2->value;
    if (!A.same_shape(B) || A.c != 1) throw std::invalid_argument("correlate: shape mismatch");
    const int H = A.h, W = A.w, HW = H * W;
    Tensor<T> out(A.n, 1, H, W);
    auto a0 = std::make_shared<std::vector<double>>(A.size());
    auto b0 = std::make_shared<std::vector<double>>(A.size());
    std::vector<double> s(HW);
    for (int ni = 0; ni < A.n; ++ni) {
        double ma = 0, mb = 0;
        for (int j = 0; j < HW; ++j) {
            ma += A.v[ni * HW + j];
            mb += B.v[ni * HW + j];
        }
        ma /= HW;
        mb /= HW;
        for (int j = 0; j < HW; ++j) {
            (*a0)[ni * HW + j] = A.v[ni * HW + j] - ma;
            (*b0)[ni * HW + j] = B.v[ni * HW + j] - mb;
        }
        fftutil::cross_correlate(H, W, &(*a0)[ni * HW], &(*b0)[ni * HW], s.data());
        for (int j = 0; j < HW; ++j) out.v[ni * HW + j] = static_cast<T>(s[j]);
    }
    return detail::make_op<T>(std::move(out), {e1, e2}, [a0, b0, H, W, HW](Node<T>& self) {
        Var<T> p1 = self.parents[0], p2 = self.parents[1];
        std::vector<double> g(HW), d(HW);
        for (int ni = 0; ni < p1->value.n; ++ni) {
            for (int j = 0; j < HW; ++j) g[j] = self.grad.v[ni * HW + j];
            if (p1->requires_grad) {
                // d/de1hat(p) = sum_s g(s) e2hat(p+s)
                fftutil::cross_correlate(H, W, g.data(), &(*b0)[ni * HW], d.data());
                double m = 0;
                for (int j = 0; j < HW; ++j) m += d[j];
                m /= HW;
                for (int j = 0; j < HW; ++j)
                    p1->grad.v[ni * HW + j] += static_cast<T>(d[j] - m);
            }
            if (p2->requires_grad) {
                // d/de2hat(q) = sum_s g(s) e1hat(q-s)
                fftutil::convolve(H, W, g.data(), &(*a0)[ni * HW], d.data());
                double m = 0;
                for (int j = 0; j < HW; ++j) m += d[j];
                m /= HW;
                for (int j = 0; j < HW; ++j)
                    p2->grad.v[ni * HW + j] += static_cast<T>(d[j] - m);
            }
        }
    });
}

// signed decode of a surface index into a shift in [-H/2, H/2)
inline int signed_shift(int idx, int extent) {
    return idx < (extent + 1) / 2 ? idx : idx - extent;
}

// Differentiable peak: expectation of the signed shift under
// softmax(tau * scores). surface (n,1,H,W) -> (n,2,1,1) as (dx, dy).
template <typename T>
Var<T> soft_peak(const Var<T>& surface, T tau) {
    const Tensor<T>& S = surface->value;
    const int H = S.h, W = S.w, HW = H * W;
    Tensor<T> out(S.n, 2, 1, 1);
    auto wts = std::make_shared<std::vector<T>>(S.size());
    for (int ni = 0; ni < S.n; ++ni) {
        const T* s = &S.v[ni * HW];
        T mx = s[0];
        for (int j = 0; j < HW; ++j) mx = std::max(mx, s[j]);
        T sum = 0;
        for (int j = 0; j < HW; ++j) {
            (*wts)[ni * HW + j] = std::exp(tau * (s[j] - mx));
            sum += (*wts)[ni * HW + j];
        }
        T ex = 0, ey = 0;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const T wv = (*wts)[ni * HW + y * W + x] / sum;
                (*wts)[ni * HW + y * W + x] = wv;
                ex += wv * signed_shift(x, W);
                ey += wv * signed_shift(y, H);
            }
        out.v[ni * 2] = ex;
        out.v[ni * 2 + 1] = ey;
    }
    return detail::make_op<T>(std::move(out), {surface}, [wts, tau, H, W, HW](Node<T>& self) {
        Var<T> ps = self.parents[0];
        for (int ni = 0; ni < ps->value.n; ++ni) {
            const T gx = self.grad.v[ni * 2], gy = self.grad.v[ni * 2 + 1];
            const T ex = self.value.v[ni * 2], ey = self.value.v[ni * 2 + 1];
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const T wv = (*wts)[ni * HW + y * W + x];
                    ps->grad.at(ni, 0, y, x) +=
                        tau * wv *
                        ((signed_shift(x, W) - ex) * gx + (signed_shift(y, H) - ey) * gy);
                }
        }
    });
}

// ---- backward driver ----

template <typename T>
void backward(const Var<T>& root) {
    if (root->value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    std::vector<Node<T>*> topo;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, bool>> st{{root.get(), false}};
    while (!st.empty()) {
        auto [node, done] = st.back();
        st.pop_back();
        if (done) {
            topo.push_back(node);
            continue;
        }
        if (!visited.insert(node).second) continue;
        st.emplace_back(node, true);
        for (const auto& p : node->parents)
            if (p->requires_grad && !visited.count(p.get())) st.emplace_back(p.get(), false);
    }
    for (Node<T>* n : topo) {
        n->grad = Tensor<T>(n->value.n, n->value.c, n->value.h, n->value.w);
        // non-required parents still receive writes from unguarded backprops
        for (const auto& p : n->parents)
            if (!p->requires_grad && p->grad.size() != p->value.size())
                p->grad = Tensor<T>(p->value.n, p->value.c, p->value.h, p->value.w);
    }
    root->grad.v[0] = T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

}  // namespace crossloc::nn
