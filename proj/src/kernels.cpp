#include "omnicodec/kernels.hpp"

#include <cmath>
#include <cstring>

namespace omnicodec::kern {

namespace detail {

void conv1d_fwd(float * y, const float * xp, const float * w, const float * b,
                const conv_dims & d, bool parallel) {
    const int64_t kc = int64_t(d.k) * d.cin;
#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t t = 0; t < d.t_out; ++t) {
        const float * win = xp + int64_t(t) * d.stride * d.cin;
        float * yrow = y + t * d.cout;
        for (int co = 0; co < d.cout; ++co)
            yrow[co] = dot(win, w + int64_t(co) * kc, kc) + (b ? b[co] : 0.0f);
    }
}

void conv1d_bwd_input(float * dxp, int64_t xp_rows, const float * dy, const float * w,
                      const conv_dims & d, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t u = 0; u < xp_rows; ++u) {
        float * drow = dxp + u * d.cin;
        int64_t t_lo = (u - d.k) / d.stride + 1;
        if (u - d.k < 0) t_lo = 0;
        int64_t t_hi = u / d.stride;
        if (t_hi > d.t_out - 1) t_hi = d.t_out - 1;
        for (int64_t t = t_lo; t <= t_hi; ++t) {
            const int64_t tau = u - t * d.stride;
            const float * dyrow = dy + t * d.cout;
            for (int co = 0; co < d.cout; ++co)
                axpy(drow, dyrow[co], w + (int64_t(co) * d.k + tau) * d.cin, d.cin);
        }
    }
}

void conv1d_bwd_weight(float * dw, float * db, const float * dy, const float * xp,
                       const conv_dims & d, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int co = 0; co < d.cout; ++co) {
        float * dwc = dw + int64_t(co) * d.k * d.cin;
        float acc_b = 0.0f;
        for (int64_t t = 0; t < d.t_out; ++t) {
            const float g = dy[t * d.cout + co];
            acc_b += g;
            const float * win = xp + int64_t(t) * d.stride * d.cin;
            axpy(dwc, g, win, int64_t(d.k) * d.cin);
        }
        if (db) db[co] += acc_b;
    }
}

void convtr1d_fwd(float * y, const float * x, const float * w, const float * b,
                  const conv_dims & d, bool parallel) {
    const int64_t t_in = d.t_out; // convtr dims carry input frames here
    const int64_t n_out = t_in * d.stride;
#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t u = 0; u < n_out; ++u) {
        float * yrow = y + u * d.cout;
        for (int co = 0; co < d.cout; ++co) yrow[co] = b ? b[co] : 0.0f;
        int64_t j_lo = (u - d.k) / d.stride + 1;
        if (u - d.k < 0) j_lo = 0;
        const int64_t j_hi = u / d.stride; // < t_in since u < t_in*stride
        for (int64_t j = j_lo; j <= j_hi; ++j) {
            const int64_t r = u - j * d.stride;
            const float * xrow = x + j * d.cin;
            for (int ci = 0; ci < d.cin; ++ci)
                axpy(yrow, xrow[ci], w + (int64_t(ci) * d.k + r) * d.cout, d.cout);
        }
    }
}

void convtr1d_bwd_input(float * dx, const float * dy, const float * w,
                        const conv_dims & d, bool parallel) {
    const int64_t t_in = d.t_out;
    const int64_t n_out = t_in * d.stride;
#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t j = 0; j < t_in; ++j) {
        float * drow = dx + j * d.cin;
        for (int ci = 0; ci < d.cin; ++ci) {
            float acc = 0.0f;
            const float * wc = w + int64_t(ci) * d.k * d.cout;
            for (int r = 0; r < d.k; ++r) {
                const int64_t u = j * d.stride + r;
                if (u >= n_out) break;
                acc += dot(dy + u * d.cout, wc + int64_t(r) * d.cout, d.cout);
            }
            drow[ci] += acc;
        }
    }
}

void convtr1d_bwd_weight(float * dw, float * db, const float * dy, const float * x,
                         const conv_dims & d, bool parallel) {
    const int64_t t_in = d.t_out;
    const int64_t n_out = t_in * d.stride;
#pragma omp parallel for schedule(static) if (parallel)
    for (int ci = 0; ci < d.cin; ++ci) {
        float * dwc = dw + int64_t(ci) * d.k * d.cout;
        for (int64_t j = 0; j < t_in; ++j) {
            const float xv = x[j * d.cin + ci];
            for (int r = 0; r < d.k; ++r) {
                const int64_t u = j * d.stride + r;
                if (u >= n_out) break;
                axpy(dwc + int64_t(r) * d.cout, xv, dy + u * d.cout, d.cout);
            }
        }
    }
    if (db) {
        for (int64_t u = 0; u < n_out; ++u)
            for (int co = 0; co < d.cout; ++co) db[co] += dy[u * d.cout + co];
    }
}

void matmul(float * c, const float * a, const float * b, int64_t m, int64_t k, int64_t n,
            bool trans_a, bool trans_b, bool parallel) {
    if (!trans_a && trans_b) {
#pragma omp parallel for schedule(static) if (parallel)
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j)
                c[i * n + j] = dot(a + i * k, b + j * k, k);
        return;
    }
#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t i = 0; i < m; ++i) {
        float * crow = c + i * n;
        std::memset(crow, 0, size_t(n) * sizeof(float));
        for (int64_t l = 0; l < k; ++l) {
            const float av = trans_a ? a[l * m + i] : a[i * k + l];
            axpy(crow, av, b + l * n, n); // trans_b handled above; TT unsupported
        }
    }
}

void vq_nearest_scan(int32_t * idx, const float * x, const double * cb,
                     int64_t frames, int64_t kk, int64_t dim, bool parallel) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int64_t f = 0; f < frames; ++f) {
        const float * xf = x + f * dim;
        double best = 0.0;
        int32_t best_k = 0;
        for (int64_t k = 0; k < kk; ++k) {
            const double * v = cb + k * dim;
            double dist = 0.0;
            for (int64_t d = 0; d < dim; ++d) {
                const double diff = double(xf[d]) - v[d];
                dist += diff * diff;
            }
            if (k == 0 || dist < best) { best = dist; best_k = int32_t(k); }
        }
        idx[f] = best_k;
    }
}

} // namespace detail

namespace ref {

void dft_real(const float * x, int n, std::vector<std::complex<double>> & out) {
    out.assign(size_t(n), {0.0, 0.0});
    for (int k = 0; k < n; ++k) {
        double re = 0.0, im = 0.0;
        for (int i = 0; i < n; ++i) {
            const double ang = -2.0 * M_PI * double(k) * double(i) / double(n);
            re += double(x[i]) * std::cos(ang);
            im += double(x[i]) * std::sin(ang);
        }
        out[size_t(k)] = {re, im};
    }
}

} // namespace ref

fft_plan::fft_plan(int n_) : n(n_) {
    rev.resize(size_t(n));
    int log2n = 0;
    while ((1 << log2n) < n) ++log2n;
    for (int i = 0; i < n; ++i) {
        int r = 0;
        for (int b = 0; b < log2n; ++b)
            if (i & (1 << b)) r |= 1 << (log2n - 1 - b);
        rev[size_t(i)] = r;
    }
    // twiddles for stage length len: e^{-2 pi i j / len}, j < len/2
    for (int len = 2; len <= n; len <<= 1)
        for (int j = 0; j < len / 2; ++j) {
            const double ang = -2.0 * M_PI * double(j) / double(len);
            tw.emplace_back(std::cos(ang), std::sin(ang));
        }
}

void fft_execute(const fft_plan & plan, std::complex<double> * buf, bool inverse) {
    const int n = plan.n;
    for (int i = 0; i < n; ++i) {
        const int r = plan.rev[size_t(i)];
        if (i < r) std::swap(buf[i], buf[r]);
    }
    size_t tw_off = 0;
    for (int len = 2; len <= n; len <<= 1) {
        const int half = len / 2;
        for (int start = 0; start < n; start += len) {
            for (int j = 0; j < half; ++j) {
                std::complex<double> w = plan.tw[tw_off + size_t(j)];
                if (inverse) w = std::conj(w);
                const std::complex<double> u = buf[start + j];
                const std::complex<double> v = buf[start + j + half] * w;
                buf[start + j] = u + v;
                buf[start + j + half] = u - v;
            }
        }
        tw_off += size_t(half);
    }
    // unnormalized in both directions; callers scale when needed
}

void attend_row(float * out, const float * q, const float * keys, const float * vals,
                int64_t t, int64_t dh, int64_t row_stride, float * probs) {
    const float scale = 1.0f / std::sqrt(float(dh));
    float max_s = -INFINITY;
    // scores scan, then exp/sum, then weighted value sum; all ascending in u
    std::vector<float> s(size_t(t) + 1);
    for (int64_t u = 0; u <= t; ++u) {
        s[size_t(u)] = dot(q, keys + u * row_stride, dh) * scale;
        if (s[size_t(u)] > max_s) max_s = s[size_t(u)];
    }
    float denom = 0.0f;
    for (int64_t u = 0; u <= t; ++u) {
        s[size_t(u)] = std::exp(s[size_t(u)] - max_s);
        denom += s[size_t(u)];
    }
    const float inv = 1.0f / denom;
    for (int64_t d = 0; d < dh; ++d) out[d] = 0.0f;
    for (int64_t u = 0; u <= t; ++u) {
        const float p = s[size_t(u)] * inv;
        if (probs) probs[u] = p;
        axpy(out, p, vals + u * row_stride, dh);
    }
}

std::vector<double> mel_filterbank(int n_mels, int nfft, double sample_rate_hz) {
    const int nbins = nfft / 2 + 1;
    auto hz_to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
    auto mel_to_hz = [](double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); };
    const double mel_lo = hz_to_mel(0.0);
    const double mel_hi = hz_to_mel(sample_rate_hz / 2.0);
    std::vector<double> edges(size_t(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i)
        edges[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(n_mels + 1));
    std::vector<double> bank(size_t(n_mels) * size_t(nbins), 0.0);
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[size_t(m)], cc = edges[size_t(m) + 1], hi = edges[size_t(m) + 2];
        for (int b = 0; b < nbins; ++b) {
            const double f = double(b) * sample_rate_hz / double(nfft);
            double wgt = 0.0;
            if (f > lo && f < cc) wgt = (f - lo) / (cc - lo);
            else if (f >= cc && f < hi) wgt = (hi - f) / (hi - cc);
            bank[size_t(m) * size_t(nbins) + size_t(b)] = wgt;
        }
    }
    return bank;
}

} // namespace omnicodec::kern
