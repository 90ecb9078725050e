#pragma once

#include <complex>
#include <cstdint>
#include <vector>

// data-parallel inner loops of the codec. every kernel exists in two forms:
//   kern::ref::*  - serial reference, the correctness oracle
//   kern::par::*  - OpenMP over independent outputs, bit-identical to ref
//                   for any thread count (no cross-thread reductions)
// all floating-point accumulation orders are fixed (8-lane unrolled dots,
// ascending-index sums) and shared between batch and streaming paths.

namespace omnicodec::kern {

// fixed-association dot product: lane l accumulates indices i with i%8 == l,
// lanes combined pairwise. identical result for every caller.
inline float dot(const float * a, const float * b, int64_t n) {
    float acc0 = 0, acc1 = 0, acc2 = 0, acc3 = 0, acc4 = 0, acc5 = 0, acc6 = 0, acc7 = 0;
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 += a[i + 0] * b[i + 0];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
        acc4 += a[i + 4] * b[i + 4];
        acc5 += a[i + 5] * b[i + 5];
        acc6 += a[i + 6] * b[i + 6];
        acc7 += a[i + 7] * b[i + 7];
    }
    for (int l = 0; i < n; ++i, ++l) {
        switch (l) {
            case 0: acc0 += a[i] * b[i]; break;
            case 1: acc1 += a[i] * b[i]; break;
            case 2: acc2 += a[i] * b[i]; break;
            case 3: acc3 += a[i] * b[i]; break;
            case 4: acc4 += a[i] * b[i]; break;
            case 5: acc5 += a[i] * b[i]; break;
            case 6: acc6 += a[i] * b[i]; break;
            default: acc7 += a[i] * b[i]; break;
        }
    }
    return ((acc0 + acc1) + (acc2 + acc3)) + ((acc4 + acc5) + (acc6 + acc7));
}

inline void axpy(float * y, float a, const float * x, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// weight layouts:
//   conv1d    w[cout][k][cin], input xp already left-padded by pad rows
//   convtr1d  w[cin][k][cout]
struct conv_dims {
    int64_t t_out  = 0; // output frames (conv) / input frames (convtr)
    int     stride = 1;
    int     k      = 1;
    int     cin    = 1;
    int     cout   = 1;
};

namespace detail {
void conv1d_fwd(float * y, const float * xp, const float * w, const float * b,
                const conv_dims & d, bool parallel);
void conv1d_bwd_input(float * dxp, int64_t xp_rows, const float * dy, const float * w,
                      const conv_dims & d, bool parallel);
void conv1d_bwd_weight(float * dw, float * db, const float * dy, const float * xp,
                       const conv_dims & d, bool parallel);
void convtr1d_fwd(float * y, const float * x, const float * w, const float * b,
                  const conv_dims & d, bool parallel);
void convtr1d_bwd_input(float * dx, const float * dy, const float * w,
                        const conv_dims & d, bool parallel);
void convtr1d_bwd_weight(float * dw, float * db, const float * dy, const float * x,
                         const conv_dims & d, bool parallel);
// C[m x n] = op(A) . op(B); transposed A is [k x m], transposed B is [n x k]
void matmul(float * c, const float * a, const float * b, int64_t m, int64_t k, int64_t n,
            bool trans_a, bool trans_b, bool parallel);
void vq_nearest_scan(int32_t * idx, const float * x, const double * cb,
                     int64_t frames, int64_t kk, int64_t dim, bool parallel);
} // namespace detail

namespace ref {
inline void conv1d_fwd(float * y, const float * xp, const float * w, const float * b, const conv_dims & d) { detail::conv1d_fwd(y, xp, w, b, d, false); }
inline void conv1d_bwd_input(float * dxp, int64_t xp_rows, const float * dy, const float * w, const conv_dims & d) { detail::conv1d_bwd_input(dxp, xp_rows, dy, w, d, false); }
inline void conv1d_bwd_weight(float * dw, float * db, const float * dy, const float * xp, const conv_dims & d) { detail::conv1d_bwd_weight(dw, db, dy, xp, d, false); }
inline void convtr1d_fwd(float * y, const float * x, const float * w, const float * b, const conv_dims & d) { detail::convtr1d_fwd(y, x, w, b, d, false); }
inline void convtr1d_bwd_input(float * dx, const float * dy, const float * w, const conv_dims & d) { detail::convtr1d_bwd_input(dx, dy, w, d, false); }
inline void convtr1d_bwd_weight(float * dw, float * db, const float * dy, const float * x, const conv_dims & d) { detail::convtr1d_bwd_weight(dw, db, dy, x, d, false); }
inline void matmul(float * c, const float * a, const float * b, int64_t m, int64_t k, int64_t n, bool ta, bool tb) { detail::matmul(c, a, b, m, k, n, ta, tb, false); }
inline void vq_nearest_scan(int32_t * idx, const float * x, const double * cb, int64_t frames, int64_t kk, int64_t dim) { detail::vq_nearest_scan(idx, x, cb, frames, kk, dim, false); }
// naive O(n^2) DFT of a real frame; oracle for the radix-2 path
void dft_real(const float * x, int n, std::vector<std::complex<double>> & out);
} // namespace ref

namespace par {
inline void conv1d_fwd(float * y, const float * xp, const float * w, const float * b, const conv_dims & d) { detail::conv1d_fwd(y, xp, w, b, d, true); }
inline void conv1d_bwd_input(float * dxp, int64_t xp_rows, const float * dy, const float * w, const conv_dims & d) { detail::conv1d_bwd_input(dxp, xp_rows, dy, w, d, true); }
inline void conv1d_bwd_weight(float * dw, float * db, const float * dy, const float * xp, const conv_dims & d) { detail::conv1d_bwd_weight(dw, db, dy, xp, d, true); }
inline void convtr1d_fwd(float * y, const float * x, const float * w, const float * b, const conv_dims & d) { detail::convtr1d_fwd(y, x, w, b, d, true); }
inline void convtr1d_bwd_input(float * dx, const float * dy, const float * w, const conv_dims & d) { detail::convtr1d_bwd_input(dx, dy, w, d, true); }
inline void convtr1d_bwd_weight(float * dw, float * db, const float * dy, const float * x, const conv_dims & d) { detail::convtr1d_bwd_weight(dw, db, dy, x, d, true); }
inline void matmul(float * c, const float * a, const float * b, int64_t m, int64_t k, int64_t n, bool ta, bool tb) { detail::matmul(c, a, b, m, k, n, ta, tb, true); }
inline void vq_nearest_scan(int32_t * idx, const float * x, const double * cb, int64_t frames, int64_t kk, int64_t dim) { detail::vq_nearest_scan(idx, x, cb, frames, kk, dim, true); }
} // namespace par

// ---- fft (radix-2, complex double, power-of-two sizes) ----

struct fft_plan {
    int n = 0;
    std::vector<int> rev;
    std::vector<std::complex<double>> tw; // per-stage twiddles, packed
    explicit fft_plan(int n);
};

void fft_execute(const fft_plan & plan, std::complex<double> * buf, bool inverse);

// one attention row: out[dh] = softmax(q . K_u / sqrt(dh), u <= t) . V
// probs (when non-null) receives the t+1 softmax weights
void attend_row(float * out, const float * q, const float * keys, const float * vals,
                int64_t t, int64_t dh, int64_t row_stride, float * probs);

// ---- mel filterbank (HTK mel scale, triangular filters) ----
// rows = n_mels, cols = nfft/2+1
std::vector<double> mel_filterbank(int n_mels, int nfft, double sample_rate_hz);

// shared scalar/row math so the training and streaming paths agree bit-exactly
inline float elu_scalar(float x) { return x > 0 ? x : std::expm1(x); }

inline float gelu_scalar(float x) {
    return 0.5f * x * (1.0f + std::erf(x * 0.70710678118654752440f));
}

inline void layernorm_row(const float * x, int64_t d, const float * gamma, const float * beta,
                          float eps, float * out, float * mean_out = nullptr,
                          float * inv_std_out = nullptr) {
    double mean = 0.0;
    for (int64_t i = 0; i < d; ++i) mean += x[i];
    mean /= double(d);
    double varr = 0.0;
    for (int64_t i = 0; i < d; ++i) { const double c = x[i] - mean; varr += c * c; }
    varr /= double(d);
    const float inv_std = float(1.0 / std::sqrt(varr + double(eps)));
    for (int64_t i = 0; i < d; ++i)
        out[i] = (x[i] - float(mean)) * inv_std * gamma[i] + beta[i];
    if (mean_out) *mean_out = float(mean);
    if (inv_std_out) *inv_std_out = inv_std;
}

// sinusoidal position row: pe[2i] = sin(pos/10000^(2i/d)), pe[2i+1] = cos(...)
inline void positional_row(int64_t pos, int64_t d, float * out) {
    for (int64_t i = 0; i + 1 < d; i += 2) {
        const double angle = double(pos) / std::pow(10000.0, double(i) / double(d));
        out[i] = float(std::sin(angle));
        out[i + 1] = float(std::cos(angle));
    }
    if (d % 2 != 0) {
        const double angle = double(pos) / std::pow(10000.0, double(d - 1) / double(d));
        out[d - 1] = float(std::sin(angle));
    }
}

} // namespace omnicodec::kern
