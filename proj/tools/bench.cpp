// compares the serial reference kernels against the OpenMP versions:
// identical results (bit-exact for same-algorithm pairs), wall-time speedup

#include "omnicodec/kernels.hpp"
#include "omnicodec/rng.hpp"

#include <omp.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

using namespace omnicodec;

namespace {

std::vector<float> random_vec(int64_t n, rng & r) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto & x : v) x = float(r.next_uniform(-1.0, 1.0));
    return v;
}

double max_abs_diff(const std::vector<float> & a, const std::vector<float> & b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

template <typename F>
double time_best_of(int reps, F && f) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const double t0 = omp_get_wtime();
        f();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best * 1000.0;
}

void report(const char * name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-22s serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   max|diff| %.3g\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

} // namespace

int main(int argc, char ** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--quick") == 0) quick = true;
    const int scale = quick ? 1 : 8;
    rng r(42);

    std::printf("threads: %d\n", omp_get_max_threads());

    { // causal conv1d, encoder-like shapes
        kern::conv_dims d{int64_t(3000) * scale, 1, 16, 32, 64};
        const int64_t xp_rows = (d.t_out - 1) * d.stride + d.k;
        auto xp = random_vec(xp_rows * d.cin, r);
        auto w = random_vec(int64_t(d.cout) * d.k * d.cin, r);
        auto b = random_vec(d.cout, r);
        std::vector<float> y1(static_cast<size_t>(d.t_out * d.cout)), y2 = y1;
        const double ts = time_best_of(3, [&] { kern::ref::conv1d_fwd(y1.data(), xp.data(), w.data(), b.data(), d); });
        const double tp = time_best_of(3, [&] { kern::par::conv1d_fwd(y2.data(), xp.data(), w.data(), b.data(), d); });
        report("conv1d_fwd", ts, tp, max_abs_diff(y1, y2));
    }
    { // transposed conv, decoder-like shapes
        kern::conv_dims d{int64_t(400) * scale, 8, 16, 64, 32};
        auto x = random_vec(d.t_out * d.cin, r);
        auto w = random_vec(int64_t(d.cin) * d.k * d.cout, r);
        auto b = random_vec(d.cout, r);
        std::vector<float> y1(static_cast<size_t>(d.t_out * d.stride * d.cout)), y2 = y1;
        const double ts = time_best_of(3, [&] { kern::ref::convtr1d_fwd(y1.data(), x.data(), w.data(), b.data(), d); });
        const double tp = time_best_of(3, [&] { kern::par::convtr1d_fwd(y2.data(), x.data(), w.data(), b.data(), d); });
        report("convtr1d_fwd", ts, tp, max_abs_diff(y1, y2));
    }
    { // matmul, transformer ff shapes
        const int64_t m = 64 * scale, k = 512, n = 2048;
        auto a = random_vec(m * k, r);
        auto b = random_vec(k * n, r);
        std::vector<float> c1(static_cast<size_t>(m * n)), c2 = c1;
        const double ts = time_best_of(3, [&] { kern::ref::matmul(c1.data(), a.data(), b.data(), m, k, n, false, false); });
        const double tp = time_best_of(3, [&] { kern::par::matmul(c2.data(), a.data(), b.data(), m, k, n, false, false); });
        report("matmul", ts, tp, max_abs_diff(c1, c2));
    }
    { // vq nearest-neighbour scan
        const int64_t frames = 64 * scale, kk = 2048, dim = 256;
        auto x = random_vec(frames * dim, r);
        std::vector<double> cb(static_cast<size_t>(kk * dim));
        for (auto & v : cb) v = r.next_uniform(-1.0, 1.0);
        std::vector<int32_t> i1(static_cast<size_t>(frames)), i2 = i1;
        const double ts = time_best_of(3, [&] { kern::ref::vq_nearest_scan(i1.data(), x.data(), cb.data(), frames, kk, dim); });
        const double tp = time_best_of(3, [&] { kern::par::vq_nearest_scan(i2.data(), x.data(), cb.data(), frames, kk, dim); });
        int mism = 0;
        for (size_t i = 0; i < i1.size(); ++i) mism += i1[i] != i2[i];
        report("vq_nearest", ts, tp, double(mism));
    }
    { // radix-2 fft vs naive dft (different algorithms: approximate match)
        const int wlen = 1024;
        auto x = random_vec(wlen, r);
        kern::fft_plan plan(wlen);
        std::vector<std::complex<double>> o1, o2(static_cast<size_t>(wlen));
        const double ts = time_best_of(3, [&] { kern::ref::dft_real(x.data(), wlen, o1); });
        const double tp = time_best_of(3, [&] {
            for (int i = 0; i < wlen; ++i) o2[size_t(i)] = {double(x[size_t(i)]), 0.0};
            kern::fft_execute(plan, o2.data(), false);
        });
        double diff = 0.0;
        for (int i = 0; i < wlen; ++i) diff = std::max(diff, std::abs(o1[size_t(i)] - o2[size_t(i)]));
        report("dft_ref vs fft", ts, tp, diff);
    }
    return 0;
}
