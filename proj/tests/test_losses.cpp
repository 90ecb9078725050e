#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/losses.hpp"

#include <cmath>

using namespace omnicodec;

namespace {

var signal_var(const std::vector<float> & s) {
    return ad::constant(tensor({int64_t(s.size())}, s));
}

// independent oracle: naive DFT, double precision throughout
double mel_loss_oracle(const std::vector<float> & x, const std::vector<float> & y, int sr) {
    double total = 0.0;
    int n_scales = 0;
    for (int p = 6; p <= 11; ++p) {
        const int win = 1 << p;
        const int hop = win / 4;
        const int bins = win / 2 + 1;
        ++n_scales;
        const int64_t len = int64_t(x.size());
        if (len < win) continue;
        const int64_t frames = (len - win) / hop + 1;
        const auto bank = kern::mel_filterbank(64, win, double(sr));
        auto mel_frame = [&](const std::vector<float> & s, int64_t f, std::vector<double> & mel) {
            std::vector<float> frame(static_cast<size_t>(win));
            for (int i = 0; i < win; ++i) {
                const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win));
                frame[size_t(i)] = float(double(s[size_t(f * hop + i)]) * w);
            }
            std::vector<std::complex<double>> spec;
            kern::ref::dft_real(frame.data(), win, spec);
            mel.assign(64, 0.0);
            for (int m = 0; m < 64; ++m)
                for (int b = 0; b < bins; ++b)
                    mel[size_t(m)] += bank[size_t(m) * size_t(bins) + size_t(b)] *
                                      std::norm(spec[size_t(b)]);
        };
        double l1 = 0.0, l2 = 0.0;
        std::vector<double> ma, mb;
        for (int64_t f = 0; f < frames; ++f) {
            mel_frame(x, f, ma);
            mel_frame(y, f, mb);
            for (int m = 0; m < 64; ++m) {
                l1 += std::abs(ma[size_t(m)] - mb[size_t(m)]);
                const double d = std::log(ma[size_t(m)] + 1e-5) - std::log(mb[size_t(m)] + 1e-5);
                l2 += d * d;
            }
        }
        const double cells = double(frames) * 64.0;
        total += l1 / cells + l2 / cells;
    }
    return total / double(n_scales);
}

} // namespace

TEST_CASE("multiscale mel loss is zero on identical inputs") {
    pcm_buffer x = testutil::noise_clip(24000, 0.2, 61);
    var vx = signal_var(x.samples);
    var loss = multiscale_mel_loss(vx, vx, 24000, 1920);
    CHECK(double(loss->scalar()) == doctest::Approx(0.0));
}

TEST_CASE("impulse vs silence matches the naive-DFT oracle") {
    std::vector<float> x(4096, 0.0f), y(4096, 0.0f);
    x[100] = 1.0f;
    var loss = multiscale_mel_loss(signal_var(x), signal_var(y), 24000, 1920);
    const double want = mel_loss_oracle(x, y, 24000);
    CHECK(double(loss->scalar()) > 0.0);
    CHECK(double(loss->scalar()) == doctest::Approx(want).epsilon(2e-3));
}

TEST_CASE("random pairs match the oracle and stay non-negative") {
    rng r(62);
    for (int trial = 0; trial < 3; ++trial) {
        pcm_buffer a = testutil::noise_clip(24000, 0.18, 100 + uint64_t(trial));
        pcm_buffer b = testutil::noise_clip(24000, 0.18, 200 + uint64_t(trial));
        var loss = multiscale_mel_loss(signal_var(a.samples), signal_var(b.samples), 24000, 1920);
        CHECK(double(loss->scalar()) >= 0.0);
        CHECK(double(loss->scalar()) ==
              doctest::Approx(mel_loss_oracle(a.samples, b.samples, 24000)).epsilon(2e-3));
    }
}

TEST_CASE("mel loss truncates small gaps and rejects large ones") {
    pcm_buffer a = testutil::noise_clip(24000, 0.2, 3);
    std::vector<float> shorter(a.samples.begin(), a.samples.end() - 100);
    CHECK_NOTHROW(multiscale_mel_loss(signal_var(a.samples), signal_var(shorter), 24000, 1920));
    std::vector<float> way_short(a.samples.begin(), a.samples.begin() + 1000);
    CHECK_THROWS_WITH_AS(multiscale_mel_loss(signal_var(a.samples), signal_var(way_short), 24000, 1920),
                         doctest::Contains("LengthMismatch"), error);
}

TEST_CASE("self-guidance value convention") {
    tensor he({1, 2});
    he.v = {1.0f, 0.0f};
    tensor hq({1, 2});
    var loss = self_guidance_loss(ad::constant(he), ad::constant(hq));
    CHECK(double(loss->scalar()) == doctest::Approx(1.0)); // sum dims, mean frames
    var zero = self_guidance_loss(ad::constant(hq), ad::constant(hq));
    CHECK(double(zero->scalar()) == doctest::Approx(0.0));
    tensor bad({2, 2});
    CHECK_THROWS_WITH_AS(self_guidance_loss(ad::constant(bad), ad::constant(hq)),
                         doctest::Contains("ShapeMismatch"), error);
}

TEST_CASE("self-guidance gradient contract on a toy dual-path graph") {
    rng r(63);
    tensor xt({4, 3});
    for (auto & v : xt.v) v = float(r.next_uniform(-1.0, 1.0));
    var x = ad::constant(xt);
    tensor wet({3, 3}), wqt({3, 3});
    for (auto & v : wet.v) v = float(r.next_uniform(-1.0, 1.0));
    for (auto & v : wqt.v) v = float(r.next_uniform(-1.0, 1.0));
    var we = ad::leaf(wet, true); // exclusive to the h_e path
    var wq = ad::leaf(wqt, true); // exclusive to the h_q path

    auto build = [&] {
        var h_e = ad::tanh_act(ad::linear(x, we, nullptr));
        var h_q = ad::tanh_act(ad::linear(x, wq, nullptr));
        return self_guidance_loss(h_e, h_q);
    };
    var loss = build();
    ad::backward(loss);

    // stop-gradient: h_e-exclusive parameters receive exactly zero
    bool we_zero = we->grad.v.empty();
    if (!we_zero) {
        we_zero = true;
        for (float g : we->grad.v) we_zero = we_zero && g == 0.0f;
    }
    CHECK(we_zero);

    // h_q path matches finite differences to 1e-4 relative
    for (int64_t i = 0; i < 9; ++i) {
        auto eval = [&](double v) {
            const float keep = wq->val.v[size_t(i)];
            wq->val.v[size_t(i)] = float(v);
            const double out = double(build()->scalar());
            wq->val.v[size_t(i)] = keep;
            return out;
        };
        const double fd = testutil::fd_slope_rich(eval, double(wq->val.v[size_t(i)]), 4e-2);
        CHECK(testutil::rel_err(fd, double(wq->grad.v[size_t(i)]), 1e-2) < 1e-4);
    }
}

TEST_CASE("untrained discriminator scores: l_gen 0, l_dis 2") {
    discriminator_bank bank = init_discriminator(9);
    pcm_buffer x = testutil::noise_clip(24000, 0.2, 71);
    pcm_buffer y = testutil::noise_clip(24000, 0.2, 72);
    adv_losses adv = adversarial_losses(bank, signal_var(x.samples), signal_var(y.samples));
    CHECK(double(adv.gen->scalar()) == doctest::Approx(0.0));
    CHECK(double(adv.dis->scalar()) == doctest::Approx(2.0));
    // identical signals: feature maps match exactly
    adv_losses same = adversarial_losses(bank, signal_var(x.samples), signal_var(x.samples));
    CHECK(double(same.fm->scalar()) == doctest::Approx(0.0));
}

TEST_CASE("length mismatch in adversarial losses errors") {
    discriminator_bank bank = init_discriminator(9);
    pcm_buffer x = testutil::noise_clip(24000, 0.1, 1);
    std::vector<float> y(x.samples.begin(), x.samples.end() - 5);
    CHECK_THROWS_WITH_AS(adversarial_losses(bank, signal_var(x.samples), signal_var(y)),
                         doctest::Contains("LengthMismatch"), error);
}

TEST_CASE("gradient reach: l_dis to disc params only, l_gen/l_fm to the generator only") {
    discriminator_bank bank = init_discriminator(10);
    // train the final layers slightly off zero so l_gen has signal
    for (auto & [name, p] : bank.params.p)
        if (name.find("c3.w") != std::string::npos)
            for (auto & v : p->val.v) v = 0.01f;

    rng r(64);
    tensor gt({600, 1});
    for (auto & v : gt.v) v = float(r.next_uniform(-0.1, 0.1));
    var gen_param = ad::leaf(gt, true);
    pcm_buffer x = testutil::noise_clip(24000, 0.025, 73); // 600 samples
    x.samples.resize(600);

    var x_hat = ad::reshape(ad::tanh_act(gen_param), {600});
    adv_losses adv = adversarial_losses(bank, signal_var(x.samples), x_hat);

    ad::backward(adv.gen);
    ad::backward(adv.fm);
    bool disc_zero = true;
    for (const auto & [name, p] : bank.params.p)
        if (!p->grad.v.empty())
            for (float g : p->grad.v) disc_zero = disc_zero && g == 0.0f;
    CHECK(disc_zero);
    bool gen_touched = false;
    for (float g : gen_param->grad.v) gen_touched = gen_touched || g != 0.0f;
    CHECK(gen_touched);

    gen_param->zero_grad();
    bank.params.zero_grads();
    ad::backward(adv.dis);
    bool gen_zero = true;
    for (float g : gen_param->grad.v) gen_zero = gen_zero && g == 0.0f;
    CHECK(gen_zero);
    bool disc_touched = false;
    for (const auto & [name, p] : bank.params.p)
        if (!p->grad.v.empty())
            for (float g : p->grad.v) disc_touched = disc_touched || g != 0.0f;
    CHECK(disc_touched);
}

TEST_CASE("total loss composition with published weights") {
    tensor one({1});
    one.v[0] = 1.0f;
    loss_parts parts;
    parts.ac_recon = ad::constant(one);
    parts.se_recon = ad::constant(one);
    parts.commit = ad::constant(one);
    parts.self_guidance = ad::constant(one);
    parts.gen = ad::constant(one);
    parts.fm = ad::constant(one);
    parts.dis = ad::constant(one);
    loss_weights w;
    loss_totals t = total_loss(parts, w);
    CHECK(double(t.generator_total->scalar()) == doctest::Approx(19.1).epsilon(1e-6));
    CHECK(double(t.discriminator_total->scalar()) == doctest::Approx(1.0).epsilon(1e-9));

    // all zeros
    tensor zero({1});
    loss_parts zp;
    zp.ac_recon = ad::constant(zero);
    zp.se_recon = ad::constant(zero);
    zp.commit = ad::constant(zero);
    zp.self_guidance = ad::constant(zero);
    zp.gen = ad::constant(zero);
    zp.fm = ad::constant(zero);
    zp.dis = ad::constant(zero);
    loss_totals tz = total_loss(zp, w);
    CHECK(double(tz.generator_total->scalar()) == 0.0);
    CHECK(double(tz.discriminator_total->scalar()) == 0.0);

    // only ac_recon weighted
    loss_weights only;
    only.se_recon = only.commit = only.dis = only.gen = only.fm = only.self_guidance = 0.0f;
    tensor v({1});
    v.v[0] = 0.37f;
    loss_parts pp;
    pp.ac_recon = ad::constant(v);
    loss_totals to = total_loss(pp, only);
    CHECK(double(to.generator_total->scalar()) == doctest::Approx(15.0 * 0.37).epsilon(1e-6));
}

TEST_CASE("total loss is exactly linear in each part (basis probes)") {
    loss_weights w;
    const double weights[6] = {15.0, 1.0, 1.0, 0.1, 1.0, 1.0};
    for (int i = 0; i < 6; ++i) {
        tensor t({1});
        t.v[0] = 2.5f;
        tensor zero({1});
        loss_parts parts;
        parts.ac_recon = ad::constant(i == 0 ? t : zero);
        parts.se_recon = ad::constant(i == 1 ? t : zero);
        parts.commit = ad::constant(i == 2 ? t : zero);
        parts.self_guidance = ad::constant(i == 3 ? t : zero);
        parts.gen = ad::constant(i == 4 ? t : zero);
        parts.fm = ad::constant(i == 5 ? t : zero);
        loss_totals lt = total_loss(parts, w);
        CHECK(double(lt.generator_total->scalar()) ==
              doctest::Approx(weights[i] * 2.5).epsilon(1e-6));
    }
}

TEST_CASE("non-finite losses are rejected with the term named") {
    tensor bad({1});
    bad.v[0] = std::numeric_limits<float>::infinity();
    loss_parts parts;
    parts.ac_recon = ad::constant(bad);
    loss_weights w;
    CHECK_THROWS_WITH_AS(total_loss(parts, w), doctest::Contains("ac_recon"), error);
}
