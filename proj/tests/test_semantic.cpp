#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "omnicodec/errors.hpp"
#include "omnicodec/semantic.hpp"

#include <cmath>
#include <cstdio>

using namespace omnicodec;

TEST_CASE("resampler output length follows ceil(2n/3) for 24k->16k") {
    polyphase_resampler rs(24000, 16000);
    CHECK(rs.expected_out(1920) == 1280);
    CHECK(rs.expected_out(0) == 0);
    CHECK(rs.expected_out(1) == 1);
    CHECK(rs.expected_out(3) == 2);
    pcm_buffer x = testutil::sine_clip(24000, 0.2, 440.0);
    auto y = rs.process(x.samples.data(), x.size());
    CHECK(int64_t(y.size()) == rs.expected_out(x.size()));
}

TEST_CASE("chunked resampling equals batch resampling bit-exactly") {
    pcm_buffer x = testutil::noise_clip(24000, 0.3, 5);
    polyphase_resampler a(24000, 16000);
    auto whole = a.process(x.samples.data(), x.size());
    polyphase_resampler b(24000, 16000);
    std::vector<float> got;
    rng r(3);
    int64_t off = 0;
    while (off < x.size()) {
        const int64_t n = std::min<int64_t>(r.next_int(1, 700), x.size() - off);
        auto part = b.process(x.samples.data() + off, n);
        got.insert(got.end(), part.begin(), part.end());
        off += n;
    }
    CHECK(got == whole);
}

TEST_CASE("resampler preserves a mid-band tone") {
    polyphase_resampler rs(24000, 16000);
    pcm_buffer x = testutil::sine_clip(24000, 0.5, 1000.0, 0.8);
    auto y = rs.process(x.samples.data(), x.size());
    // rms of the resampled tone should stay near 0.8/sqrt(2)
    double rms = 0.0;
    for (size_t i = y.size() / 2; i < y.size(); ++i) rms += double(y[i]) * double(y[i]);
    rms = std::sqrt(rms / double(y.size() / 2));
    CHECK(rms == doctest::Approx(0.8 / std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("desk teacher emits 12.5 Hz frames aligned with the encoder") {
    desk_teacher t(16000, 1024);
    for (double secs : {0.25, 0.5, 1.0, 2.3}) {
        t.reset();
        polyphase_resampler rs(24000, 16000);
        pcm_buffer x = testutil::noise_clip(24000, secs, 17);
        // pad to full hops like the encode pipeline does
        const int64_t hop = 1920;
        const int64_t padded = (x.size() + hop - 1) / hop * hop;
        x.samples.resize(size_t(padded), 0.0f);
        auto s16 = rs.process(x.samples.data(), x.size());
        auto rows = t.process(s16.data(), int64_t(s16.size()));
        const int64_t frames = int64_t(rows.size()) / 1024;
        CHECK(frames == padded / hop); // exact alignment on hop multiples
    }
}

TEST_CASE("desk teacher is deterministic and seed-fixed") {
    desk_teacher t1(16000, 64), t2(16000, 64);
    CHECK(t1.param_hash() == t2.param_hash());
    pcm_buffer x = testutil::sine_clip(16000, 0.4, 500.0);
    auto a = t1.process(x.samples.data(), x.size());
    auto b = t2.process(x.samples.data(), x.size());
    CHECK(a == b);
    CHECK(!a.empty());
}

TEST_CASE("teacher streaming equals batch processing") {
    desk_teacher t(16000, 32);
    pcm_buffer x = testutil::noise_clip(16000, 0.7, 23);
    auto whole = t.process(x.samples.data(), x.size());
    t.reset();
    std::vector<float> got;
    rng r(8);
    int64_t off = 0;
    while (off < x.size()) {
        const int64_t n = std::min<int64_t>(r.next_int(1, 900), x.size() - off);
        auto part = t.process(x.samples.data() + off, n);
        got.insert(got.end(), part.begin(), part.end());
        off += n;
    }
    CHECK(got == whole);
}

TEST_CASE("semantic quantize matches the brute-force oracle on 200 random frames") {
    rng r(51);
    codebook cb(16, 12);
    for (auto & v : cb.vectors) v = r.next_uniform(-1.0, 1.0);
    latent_sequence x(200, 12, 12.5);
    for (auto & v : x.data) v = float(r.next_uniform(-1.0, 1.0));
    semantic_quant sq = semantic_quantize(x, cb);
    REQUIRE(int64_t(sq.tokens.size()) == 200);
    for (int64_t f = 0; f < 200; ++f) {
        int32_t best = 0;
        double best_d = 0.0;
        for (int64_t k = 0; k < cb.k; ++k) {
            double d = 0.0;
            for (int64_t j = 0; j < 12; ++j) {
                const double c = double(x.row(f)[j]) - cb.vec(k)[j];
                d += c * c;
            }
            if (k == 0 || d < best_d) { best_d = d; best = int32_t(k); }
        }
        CHECK(sq.tokens[size_t(f)] == best);
        for (int64_t j = 0; j < 12; ++j)
            CHECK(sq.s_q.row(f)[j] == float(cb.vec(best)[j]));
    }
    // exact codeword hit and zero-frame input
    latent_sequence hit(1, 12, 12.5);
    for (int64_t j = 0; j < 12; ++j) hit.row(0)[j] = float(cb.vec(5)[j]);
    CHECK(semantic_quantize(hit, cb).tokens[0] == 5);
    latent_sequence empty(0, 12, 12.5);
    CHECK(semantic_quantize(empty, cb).tokens.empty());
    latent_sequence wrong(1, 7, 12.5);
    CHECK_THROWS_WITH_AS(semantic_quantize(wrong, cb), doctest::Contains("DimMismatch"), error);
}

TEST_CASE("semantic recon loss convention: mean over frames and dims") {
    latent_sequence a(1, 1024, 12.5), b(1, 1024, 12.5);
    a.row(0)[3] = 1.0f;
    CHECK(semantic_recon_loss(a, b) == doctest::Approx(1.0 / 1024));
    CHECK(semantic_recon_loss(b, b) == doctest::Approx(0.0));
}

TEST_CASE("decoupling algebra: subtract then recombine recovers the input") {
    rng r(52);
    validated_config cfg = validate(testutil::tiny_codec());
    param_store ps = init_graph_params(cfg, 4);
    adapter_map am = make_adapter(ps, cfg);
    for (int trial = 0; trial < 100; ++trial) {
        latent_sequence a(6, cfg.hidden_dim, 12.5);
        latent_sequence s_q(6, cfg.semantic_dim, 12.5);
        for (auto & v : a.data) v = float(r.next_uniform(-1.0, 1.0));
        for (auto & v : s_q.data) v = float(r.next_uniform(-1.0, 1.0));
        latent_sequence adapted = am.apply(s_q);
        latent_sequence d = decouple_subtract(a, adapted);
        // identity quantizer: a_q == d
        latent_sequence back = decouple_recombine(d, adapted);
        for (size_t i = 0; i < a.data.size(); ++i)
            CHECK(std::abs(double(back.data[i]) - double(a.data[i])) <= 1e-6);
    }
}

TEST_CASE("decoupling edge cases") {
    validated_config cfg = validate(testutil::tiny_codec());
    latent_sequence a(3, cfg.hidden_dim, 12.5);
    for (auto & v : a.data) v = 0.5f;
    latent_sequence zero(3, cfg.hidden_dim, 12.5);
    // zero adapter output leaves the acoustic hidden unchanged
    latent_sequence d = decouple_subtract(a, zero);
    CHECK(d.data == a.data);
    // a_q of zeros decodes the pure-semantic path
    latent_sequence rec = decouple_recombine(zero, d);
    CHECK(rec.data == d.data);
    // frame misalignment > 1 is an error
    latent_sequence off(5, cfg.hidden_dim, 12.5);
    CHECK_THROWS_WITH_AS(decouple_subtract(a, off), doctest::Contains("FrameMisalignment"), error);
    // 1-frame mismatch truncates to min
    latent_sequence one_off(4, cfg.hidden_dim, 12.5);
    CHECK(decouple_subtract(a, one_off).frames == 3);
}

TEST_CASE("no-adapter ablation uses the fixed slice embedding") {
    codec_config c = testutil::tiny_codec();
    c.use_adapter = false;
    validated_config cfg = validate(c);
    param_store ps = init_graph_params(cfg, 4);
    CHECK_FALSE(ps.has("adapter.w"));
    adapter_map am = make_adapter(ps, cfg);
    latent_sequence s_q(2, cfg.semantic_dim, 12.5);
    for (int64_t j = 0; j < cfg.semantic_dim; ++j) s_q.row(0)[j] = float(j);
    latent_sequence out = am.apply(s_q);
    CHECK(out.dim == cfg.hidden_dim);
    for (int64_t j = 0; j < std::min<int64_t>(cfg.hidden_dim, cfg.semantic_dim); ++j)
        CHECK(out.row(0)[j] == float(j)); // first dims copied verbatim
    // train-path matmul with the 0/1 slice matrix matches the plain path
    var s_var = ad::constant(tensor({2, cfg.semantic_dim},
                                    std::vector<float>(s_q.data.begin(), s_q.data.end())));
    var t_out = am.apply_train(s_var);
    for (int64_t j = 0; j < cfg.hidden_dim; ++j)
        CHECK(t_out->val.v[size_t(j)] == out.row(0)[j]);
}

TEST_CASE("teacher pooling halves the rate for 6.25 Hz configs") {
    latent_sequence x(6, 4, 12.5);
    for (int64_t f = 0; f < 6; ++f)
        for (int64_t j = 0; j < 4; ++j) x.row(f)[j] = float(f);
    latent_sequence p = pool_rows(x, 2);
    CHECK(p.frames == 3);
    CHECK(p.row(0)[0] == doctest::Approx(0.5));
    CHECK(p.row(2)[0] == doctest::Approx(4.5));
    CHECK(pool_rows(x, 1).frames == 6);
}

TEST_CASE("file teacher serves features at the declared frame spacing") {
    latent_sequence f(4, 8, 12.5);
    for (int64_t i = 0; i < 32; ++i) f.data[size_t(i)] = float(i);
    const std::string path = testutil::temp_path("teacher.omft");
    write_feature_file(path, f);
    file_teacher t(path, 1280);
    CHECK(t.dim() == 8);
    std::vector<float> silence(1280 * 2, 0.0f);
    auto rows = t.process(silence.data(), 1280);
    CHECK(int64_t(rows.size()) == 8);
    rows = t.process(silence.data(), 1280 * 2);
    CHECK(int64_t(rows.size()) == 16);
    std::remove(path.c_str());
}
