#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "omnicodec/errors.hpp"
#include "omnicodec/eval.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/train.hpp"
#include "omnicodec/wav.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace omnicodec;

namespace {

// independent two-line oracle: naive DFT log-mel, plain L1 mean
double mel_distance_oracle(const pcm_buffer & x, const pcm_buffer & y) {
    const int win = 1024, hop = 256;
    const int64_t len = std::min(x.size(), y.size());
    const int64_t frames = len >= win ? (len - win) / hop + 1 : 0;
    if (frames == 0) return 0.0;
    const auto bank = kern::mel_filterbank(80, win, double(x.sample_rate_hz));
    auto logmel = [&](const pcm_buffer & s, int64_t f, std::vector<double> & out) {
        std::vector<float> frame(win);
        for (int i = 0; i < win; ++i) {
            const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win));
            frame[size_t(i)] = float(double(s.samples[size_t(f * hop + i)]) * w);
        }
        std::vector<std::complex<double>> spec;
        kern::ref::dft_real(frame.data(), win, spec);
        out.assign(80, 0.0);
        for (int m = 0; m < 80; ++m) {
            double acc = 0.0;
            for (int b = 0; b <= win / 2; ++b)
                acc += bank[size_t(m) * size_t(win / 2 + 1) + size_t(b)] * std::norm(spec[size_t(b)]);
            out[size_t(m)] = std::log(acc + 1e-5);
        }
    };
    double total = 0.0;
    std::vector<double> ma, mb;
    for (int64_t f = 0; f < frames; ++f) {
        logmel(x, f, ma);
        logmel(y, f, mb);
        for (int m = 0; m < 80; ++m) total += std::abs(ma[size_t(m)] - mb[size_t(m)]);
    }
    return total / (double(frames) * 80.0);
}

} // namespace

TEST_CASE("mel distance: zero on identity, matches the oracle on a 2x gain") {
    pcm_buffer x = testutil::sine_clip(24000, 0.25, 880.0, 0.4);
    CHECK(mel_distance(x, x) == doctest::Approx(0.0));
    pcm_buffer y = x;
    for (auto & v : y.samples) v *= 2.0f;
    const double got = mel_distance(x, y);
    CHECK(got > 0.0);
    CHECK(got == doctest::Approx(mel_distance_oracle(x, y)).epsilon(1e-7));
    CHECK(mel_distance(y, x) == doctest::Approx(got).epsilon(1e-12)); // symmetry
    pcm_buffer z = x;
    z.sample_rate_hz = 16000;
    CHECK_THROWS_WITH_AS(mel_distance(x, z), doctest::Contains("SampleRateMismatch"), error);
}

TEST_CASE("mcd closed form: unit offset in c1 gives (10/ln10)*sqrt(2) dB") {
    const int64_t bins = 80, frames = 5;
    // delta chosen so DCT-II(delta) = e_1 exactly
    std::vector<double> a(size_t(frames * bins)), b(size_t(frames * bins));
    rng r(81);
    for (int64_t f = 0; f < frames; ++f)
        for (int64_t m = 0; m < bins; ++m) {
            const double base = r.next_uniform(-1.0, 1.0);
            a[size_t(f * bins + m)] = base;
            b[size_t(f * bins + m)] =
                base + (2.0 / double(bins)) * std::cos(M_PI * 1.0 * (double(m) + 0.5) / double(bins));
        }
    const double got = mcd_from_logmel(a, b, frames, bins);
    const double want = 10.0 / std::log(10.0) * std::sqrt(2.0);
    CHECK(std::abs(got - want) < 1e-6);
    CHECK(want == doctest::Approx(6.1418).epsilon(1e-4));
}

TEST_CASE("mcd via audio matches an independent scalar oracle") {
    pcm_buffer x = testutil::noise_clip(24000, 0.25, 82, 0.4);
    pcm_buffer y = x;
    for (auto & v : y.samples) v = -v * 0.5f;
    CHECK(mcd_db(x, x) == doctest::Approx(0.0));

    // scalar oracle: naive per-frame log-mel + dct + formula
    int64_t frames = 0;
    const auto ma = eval_log_mel(x, frames);
    int64_t fb = 0;
    const auto mb = eval_log_mel(y, fb);
    double want = 0.0;
    for (int64_t f = 0; f < frames; ++f) {
        double ss = 0.0;
        for (int64_t k = 1; k <= 13; ++k) {
            double ca = 0.0, cb = 0.0;
            for (int64_t m = 0; m < 80; ++m) {
                const double cosv = std::cos(M_PI * double(k) * (double(m) + 0.5) / 80.0);
                ca += ma[size_t(f * 80 + m)] * cosv;
                cb += mb[size_t(f * 80 + m)] * cosv;
            }
            ss += (ca - cb) * (ca - cb);
        }
        want += 10.0 / std::log(10.0) * std::sqrt(2.0) * std::sqrt(ss);
    }
    want /= double(frames);
    CHECK(mcd_db(x, y) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("utilization equals a brute-force membership count") {
    rng r(83);
    token_matrix m(64, 3, false);
    for (auto & v : m.v) v = int32_t(r.next_int(0, 15));
    utilization_report rep = codebook_utilization(m, 16);
    for (int64_t s = 0; s < 3; ++s) {
        bool seen[16] = {};
        for (int64_t f = 0; f < 64; ++f) seen[m.at(f, s)] = true;
        int64_t count = 0;
        for (bool b : seen) count += b;
        CHECK(rep.used_per_stream[size_t(s)] == count);
    }
}

TEST_CASE("token ppl: constant stream trains to ppl <= 1.05") {
    token_lm_config cfg;
    cfg.layers = 1;
    cfg.dim = 32;
    cfg.heads = 2;
    cfg.ff_dim = 64;
    cfg.context = 32;
    cfg.train_steps = 120;
    cfg.lr = 5e-3;
    cfg.seed = 5;
    std::vector<int32_t> train_tokens(2000, 7), eval_tokens(400, 7);
    const double ppl = token_stream_ppl(train_tokens, eval_tokens, 64, cfg);
    CHECK(ppl <= 1.05);
    CHECK(ppl >= 1.0);
}

TEST_CASE("token ppl: iid uniform source lands near the vocabulary size") {
    token_lm_config cfg;
    cfg.layers = 1;
    cfg.dim = 32;
    cfg.heads = 2;
    cfg.ff_dim = 64;
    cfg.context = 32;
    cfg.train_steps = 40;
    cfg.lr = 1e-3;
    cfg.seed = 6;
    rng r(84);
    const int64_t k = 64;
    std::vector<int32_t> train_tokens(4000), eval_tokens(1000);
    for (auto & t : train_tokens) t = int32_t(r.next_int(0, k - 1));
    for (auto & t : eval_tokens) t = int32_t(r.next_int(0, k - 1));
    const double ppl = token_stream_ppl(train_tokens, eval_tokens, k, cfg);
    CHECK(ppl > double(k) * 0.9);
    CHECK(ppl < double(k) * 1.1);
}

TEST_CASE("ppl_mean_8 over identical streams equals the single-stream ppl") {
    token_lm_config cfg;
    cfg.layers = 1;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.ff_dim = 32;
    cfg.context = 16;
    cfg.train_steps = 10;
    cfg.seed = 7;
    rng r(85);
    token_matrix train_m(256, 9, true), eval_m(64, 9, true);
    for (int64_t f = 0; f < train_m.frames; ++f) {
        const int32_t tok = int32_t(r.next_int(0, 15));
        for (int64_t s = 0; s < 9; ++s) train_m.at(f, s) = tok;
    }
    for (int64_t f = 0; f < eval_m.frames; ++f) {
        const int32_t tok = int32_t(r.next_int(0, 15));
        for (int64_t s = 0; s < 9; ++s) eval_m.at(f, s) = tok;
    }
    const double mean8 = token_ppl({train_m}, {eval_m}, 16, ppl_mode::ppl_mean_8, cfg);
    const double one = token_ppl({train_m}, {eval_m}, 16, ppl_mode::ppl0, cfg);
    CHECK(mean8 == doctest::Approx(one).epsilon(1e-9));
}

TEST_CASE("ppl input validation") {
    token_lm_config cfg;
    CHECK_THROWS_WITH_AS(token_ppl({}, {}, 16, ppl_mode::ppl0, cfg),
                         doctest::Contains("EmptyCorpus"), error);
    token_matrix small(4, 3, true); // only 2 acoustic streams
    for (auto & v : small.v) v = 0;
    CHECK_THROWS_WITH_AS(token_ppl({small}, {small}, 16, ppl_mode::ppl_mean_8, cfg),
                         doctest::Contains("InsufficientStreams"), error);
}

TEST_CASE("eval_recon: empty dir succeeds, aggregates equal per-file means") {
    validated_config cfg = validate(testutil::tiny_codec(13));
    codec_model model = codec_model::init(cfg);

    const std::string empty_dir = testutil::temp_path("empty_wavs");
    std::filesystem::create_directories(empty_dir);
    eval_recon_report rep0 = eval_recon(model, empty_dir);
    CHECK(rep0.files.empty());
    CHECK(rep0.mean_mel_distance == 0.0);

    const std::string dir = testutil::temp_path("wavs");
    std::filesystem::create_directories(dir);
    wav_write(dir + "/a.wav", synth_clip(cfg.sample_rate_hz, 1, 0, 0.6));
    wav_write(dir + "/b.wav", synth_clip(cfg.sample_rate_hz, 1, 1, 0.6));
    {
        std::FILE * f = std::fopen((dir + "/broken.wav").c_str(), "wb");
        std::fwrite("nope", 1, 4, f);
        std::fclose(f);
    }
    eval_recon_report rep = eval_recon(model, dir);
    REQUIRE(rep.files.size() == 2);
    CHECK(rep.skipped.size() == 1);
    CHECK(rep.mean_mel_distance ==
          doctest::Approx((rep.files[0].mel_distance + rep.files[1].mel_distance) / 2.0));
    CHECK(rep.mean_mcd == doctest::Approx((rep.files[0].mcd + rep.files[1].mcd) / 2.0));
    CHECK(rep.nominal_bitrate_bps ==
          bitrate_bps(cfg.frame_rate_hz, cfg.total_streams(), cfg.acoustic_bits));
    CHECK(!rep.summary().empty());
    CHECK(!rep.text().empty());
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(empty_dir);
}

TEST_CASE("ppl error against vocab shrinks as training data grows") {
    token_lm_config cfg;
    cfg.layers = 1;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.ff_dim = 32;
    cfg.context = 32;
    cfg.train_steps = 60;
    cfg.lr = 2e-3;
    cfg.seed = 8;
    rng r(86);
    const int64_t k = 32;
    std::vector<int32_t> eval_tokens(600);
    for (auto & t : eval_tokens) t = int32_t(r.next_int(0, k - 1));
    double prev_err = 1e18;
    for (int64_t n : {400, 1600, 6400}) {
        std::vector<int32_t> train_tokens(static_cast<size_t>(n));
        for (auto & t : train_tokens) t = int32_t(r.next_int(0, k - 1));
        const double ppl = token_stream_ppl(train_tokens, eval_tokens, k, cfg);
        const double errv = std::abs(ppl - double(k));
        CHECK(errv <= prev_err * 1.10); // monotone trend with 10% slack
        prev_err = errv;
    }
}
