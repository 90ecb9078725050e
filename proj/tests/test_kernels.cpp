#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "omnicodec/kernels.hpp"
#include "omnicodec/rng.hpp"

#include <cmath>
#include <cstring>

using namespace omnicodec;

namespace {

std::vector<float> rand_vec(int64_t n, rng & r) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto & x : v) x = float(r.next_uniform(-1.0, 1.0));
    return v;
}

} // namespace

TEST_CASE("serial reference and OpenMP conv kernels are bit-identical") {
    rng r(3);
    for (int trial = 0; trial < 5; ++trial) {
        kern::conv_dims d;
        d.stride = int(r.next_int(1, 4));
        d.k = d.stride + int(r.next_int(0, 6));
        d.cin = int(r.next_int(1, 9));
        d.cout = int(r.next_int(1, 9));
        d.t_out = r.next_int(1, 40);
        const int64_t xp_rows = (d.t_out - 1) * d.stride + d.k;
        auto xp = rand_vec(xp_rows * d.cin, r);
        auto w = rand_vec(int64_t(d.cout) * d.k * d.cin, r);
        auto b = rand_vec(d.cout, r);
        std::vector<float> y1(static_cast<size_t>(d.t_out * d.cout)), y2 = y1;
        kern::ref::conv1d_fwd(y1.data(), xp.data(), w.data(), b.data(), d);
        kern::par::conv1d_fwd(y2.data(), xp.data(), w.data(), b.data(), d);
        CHECK(std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(float)) == 0);

        auto dy = rand_vec(d.t_out * d.cout, r);
        std::vector<float> dx1(static_cast<size_t>(xp_rows * d.cin)), dx2 = dx1;
        kern::ref::conv1d_bwd_input(dx1.data(), xp_rows, dy.data(), w.data(), d);
        kern::par::conv1d_bwd_input(dx2.data(), xp_rows, dy.data(), w.data(), d);
        CHECK(std::memcmp(dx1.data(), dx2.data(), dx1.size() * sizeof(float)) == 0);

        std::vector<float> dw1(w.size(), 0.0f), dw2 = dw1, db1(b.size(), 0.0f), db2 = db1;
        kern::ref::conv1d_bwd_weight(dw1.data(), db1.data(), dy.data(), xp.data(), d);
        kern::par::conv1d_bwd_weight(dw2.data(), db2.data(), dy.data(), xp.data(), d);
        CHECK(std::memcmp(dw1.data(), dw2.data(), dw1.size() * sizeof(float)) == 0);
        CHECK(std::memcmp(db1.data(), db2.data(), db1.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("serial reference and OpenMP convtr kernels are bit-identical") {
    rng r(4);
    for (int trial = 0; trial < 5; ++trial) {
        kern::conv_dims d;
        d.stride = int(r.next_int(1, 4));
        d.k = int(r.next_int(1, 10));
        d.cin = int(r.next_int(1, 9));
        d.cout = int(r.next_int(1, 9));
        d.t_out = r.next_int(1, 30); // input frames
        auto x = rand_vec(d.t_out * d.cin, r);
        auto w = rand_vec(int64_t(d.cin) * d.k * d.cout, r);
        auto b = rand_vec(d.cout, r);
        std::vector<float> y1(static_cast<size_t>(d.t_out * d.stride * d.cout)), y2 = y1;
        kern::ref::convtr1d_fwd(y1.data(), x.data(), w.data(), b.data(), d);
        kern::par::convtr1d_fwd(y2.data(), x.data(), w.data(), b.data(), d);
        CHECK(std::memcmp(y1.data(), y2.data(), y1.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("matmul variants agree with a naive loop") {
    rng r(5);
    const int64_t m = 7, k = 13, n = 9;
    auto a = rand_vec(m * k, r);
    auto b = rand_vec(k * n, r);
    std::vector<float> c(static_cast<size_t>(m * n)), cpar = c;
    kern::ref::matmul(c.data(), a.data(), b.data(), m, k, n, false, false);
    kern::par::matmul(cpar.data(), a.data(), b.data(), m, k, n, false, false);
    CHECK(std::memcmp(c.data(), cpar.data(), c.size() * sizeof(float)) == 0);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double want = 0.0;
            for (int64_t l = 0; l < k; ++l) want += double(a[size_t(i * k + l)]) * double(b[size_t(l * n + j)]);
            CHECK(double(c[size_t(i * n + j)]) == doctest::Approx(want).epsilon(1e-5));
        }

    // NT: b2 is [n x k]
    auto b2 = rand_vec(n * k, r);
    std::vector<float> cnt(static_cast<size_t>(m * n));
    kern::par::matmul(cnt.data(), a.data(), b2.data(), m, k, n, false, true);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double want = 0.0;
            for (int64_t l = 0; l < k; ++l) want += double(a[size_t(i * k + l)]) * double(b2[size_t(j * k + l)]);
            CHECK(double(cnt[size_t(i * n + j)]) == doctest::Approx(want).epsilon(1e-5));
        }

    // TN: a2 is [k x m]
    auto a2 = rand_vec(k * m, r);
    std::vector<float> ctn(static_cast<size_t>(m * n));
    kern::par::matmul(ctn.data(), a2.data(), b.data(), m, k, n, true, false);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double want = 0.0;
            for (int64_t l = 0; l < k; ++l) want += double(a2[size_t(l * m + i)]) * double(b[size_t(l * n + j)]);
            CHECK(double(ctn[size_t(i * n + j)]) == doctest::Approx(want).epsilon(1e-5));
        }
}

TEST_CASE("radix-2 fft matches the naive dft oracle") {
    rng r(6);
    for (int n : {2, 8, 64, 512}) {
        auto x = rand_vec(n, r);
        std::vector<std::complex<double>> naive;
        kern::ref::dft_real(x.data(), n, naive);
        std::vector<std::complex<double>> fast(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) fast[size_t(i)] = {double(x[size_t(i)]), 0.0};
        kern::fft_plan plan(n);
        kern::fft_execute(plan, fast.data(), false);
        for (int i = 0; i < n; ++i)
            CHECK(std::abs(naive[size_t(i)] - fast[size_t(i)]) < 1e-9 * n);
    }
}

TEST_CASE("inverse fft undoes forward up to n scaling") {
    rng r(7);
    const int n = 256;
    auto x = rand_vec(n, r);
    std::vector<std::complex<double>> buf(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) buf[size_t(i)] = {double(x[size_t(i)]), 0.0};
    kern::fft_plan plan(n);
    kern::fft_execute(plan, buf.data(), false);
    kern::fft_execute(plan, buf.data(), true);
    for (int i = 0; i < n; ++i)
        CHECK(buf[size_t(i)].real() / n == doctest::Approx(double(x[size_t(i)])).epsilon(1e-9));
}

TEST_CASE("vq scan ref/par agree and honor the tie-break") {
    rng r(8);
    const int64_t frames = 33, kk = 17, dim = 5;
    auto x = rand_vec(frames * dim, r);
    std::vector<double> cb(static_cast<size_t>(kk * dim));
    for (auto & v : cb) v = r.next_uniform(-1.0, 1.0);
    // duplicate codeword 11 into 3 -> ties must resolve to 3
    for (int64_t j = 0; j < dim; ++j) cb[size_t(11 * dim + j)] = cb[size_t(3 * dim + j)];
    std::vector<int32_t> i1(static_cast<size_t>(frames)), i2 = i1;
    kern::ref::vq_nearest_scan(i1.data(), x.data(), cb.data(), frames, kk, dim);
    kern::par::vq_nearest_scan(i2.data(), x.data(), cb.data(), frames, kk, dim);
    for (int64_t f = 0; f < frames; ++f) {
        CHECK(i1[size_t(f)] == i2[size_t(f)]);
        CHECK(i1[size_t(f)] != 11);
    }
}

TEST_CASE("attend_row at t=0 returns the single value row") {
    const int64_t dh = 4;
    std::vector<float> q{1, 2, 3, 4}, k{0.5f, 0.5f, 0.5f, 0.5f}, v{9, 8, 7, 6};
    std::vector<float> out(4), probs(1);
    kern::attend_row(out.data(), q.data(), k.data(), v.data(), 0, dh, dh, probs.data());
    CHECK(probs[0] == doctest::Approx(1.0));
    for (int i = 0; i < 4; ++i) CHECK(out[size_t(i)] == doctest::Approx(double(v[size_t(i)])));
}

TEST_CASE("mel filterbank covers the band with non-negative weights") {
    auto bank = kern::mel_filterbank(64, 1024, 24000.0);
    CHECK(bank.size() == 64u * 513u);
    double total = 0.0;
    for (double v : bank) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(total > 0.0);
}
