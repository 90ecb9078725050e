#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "omnicodec/errors.hpp"
#include "omnicodec/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

using namespace omnicodec;

namespace {

train_config fast_train() {
    train_config t;
    t.steps = 4;
    t.batch_size = 1;
    t.segment_seconds = 0.5;
    t.lr_peak = 1e-3;
    t.warmup_steps = 2;
    t.decay_steps = 10;
    t.adv_start_step = 1000000; // adversarial path off for speed
    t.checkpoint_every = 0;
    return t;
}

bool params_equal(const param_store & a, const param_store & b) {
    for (const auto & [name, v] : a.p)
        if (std::memcmp(v->val.data(), b.get(name)->val.data(),
                        size_t(v->val.numel()) * sizeof(float)) != 0)
            return false;
    return true;
}

} // namespace

TEST_CASE("lr schedule: warmup ramp, cosine decay, zero tail") {
    train_config t;
    t.lr_peak = 1e-4;
    t.warmup_steps = 2500;
    t.decay_steps = 500000;
    CHECK(lr_schedule(0, t) == 0.0);
    CHECK(lr_schedule(2500, t) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(lr_schedule(1250, t) == doctest::Approx(0.5e-4).epsilon(1e-9));
    CHECK(lr_schedule(2500 + 250000, t) == doctest::Approx(0.5e-4).epsilon(1e-9));
    CHECK(lr_schedule(2500 + 500000, t) == 0.0);
    CHECK(lr_schedule(2500 + 500001, t) == 0.0);
}

TEST_CASE("synthetic clips are deterministic, bounded, and varied") {
    pcm_buffer a = synth_clip(24000, 7, 3, 1.0);
    pcm_buffer b = synth_clip(24000, 7, 3, 1.0);
    CHECK(a.samples == b.samples);
    CHECK(a.size() == 24000);
    float peak = 0.0f;
    for (float v : a.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 0.95f);
    CHECK(peak > 0.1f);
    pcm_buffer c = synth_clip(24000, 7, 4, 1.0);
    CHECK(a.samples != c.samples);
}

TEST_CASE("two seeded runs produce identical loss reports and parameters") {
    validated_config cfg = validate(testutil::tiny_codec(5));
    train_config t = fast_train();
    train_state s1 = train_state::init(cfg, t);
    train_state s2 = train_state::init(cfg, t);
    for (int i = 0; i < 3; ++i) {
        std::vector<pcm_buffer> b1 = next_batch(s1);
        std::vector<pcm_buffer> b2 = next_batch(s2);
        loss_report r1 = train_step(s1, b1);
        loss_report r2 = train_step(s2, b2);
        CHECK(r1.line() == r2.line());
    }
    CHECK(params_equal(s1.model.gen, s2.model.gen));
    CHECK(s1.model.acoustic.stages[0].vectors == s2.model.acoustic.stages[0].vectors);
}

TEST_CASE("loss report terms recombine to the weighted totals") {
    validated_config cfg = validate(testutil::tiny_codec(6));
    train_state st = train_state::init(cfg, fast_train());
    std::vector<pcm_buffer> batch = next_batch(st);
    loss_report rep = train_step(st, batch);
    const auto & w = cfg.weights;
    const double want = double(w.ac_recon) * rep.term("ac_recon") +
                        double(w.se_recon) * rep.term("se_recon") +
                        double(w.commit) * rep.term("commit") +
                        double(w.self_guidance) * rep.term("self_guidance");
    CHECK(rep.generator_total == doctest::Approx(want).epsilon(1e-5));
    CHECK(rep.has_term("se_recon"));
    CHECK(rep.has_term("self_guidance"));
    CHECK_FALSE(rep.has_term("gen")); // adversarial warmup not reached
}

TEST_CASE("zero learning rate leaves parameters unchanged but EMA moves") {
    validated_config cfg = validate(testutil::tiny_codec(7));
    train_config t = fast_train();
    t.lr_peak = 0.0;
    train_state st = train_state::init(cfg, t);
    std::vector<pcm_buffer> batch = next_batch(st);
    train_step(st, batch); // seeds codebooks from the first batch
    codec_model before = st.model;
    batch = next_batch(st);
    train_step(st, batch);
    CHECK(params_equal(before.gen, st.model.gen));
    bool ema_moved = false;
    for (size_t i = 0; i < before.acoustic.stages[0].ema_cluster_size.size(); ++i)
        if (before.acoustic.stages[0].ema_cluster_size[i] !=
            st.model.acoustic.stages[0].ema_cluster_size[i])
            ema_moved = true;
    CHECK(ema_moved);
}

TEST_CASE("checkpoint resume continues bit-identically") {
    validated_config cfg = validate(testutil::tiny_codec(8));
    train_config t = fast_train();
    t.steps = 6;

    train_state cont = train_state::init(cfg, t);
    std::vector<std::string> lines;
    for (int i = 0; i < 6; ++i) lines.push_back(train_step(cont, next_batch(cont)).line());

    train_state part = train_state::init(cfg, t);
    for (int i = 0; i < 3; ++i) train_step(part, next_batch(part));
    const std::string path = testutil::temp_path("resume.omck");
    train_save(path, part);
    train_state resumed = train_load(path);
    CHECK(resumed.step == 3);
    for (int i = 3; i < 6; ++i)
        CHECK(train_step(resumed, next_batch(resumed)).line() == lines[size_t(i)]);
    CHECK(params_equal(cont.model.gen, resumed.model.gen));
    CHECK(cont.model.acoustic.stages[1].ema_vector_sum ==
          resumed.model.acoustic.stages[1].ema_vector_sum);
    std::remove(path.c_str());
}

TEST_CASE("teacher parameters never drift across training") {
    validated_config cfg = validate(testutil::tiny_codec(9));
    train_state st = train_state::init(cfg, fast_train());
    const uint64_t h0 = st.teacher->param_hash();
    CHECK(h0 == st.teacher_hash);
    for (int i = 0; i < 2; ++i) train_step(st, next_batch(st));
    CHECK(st.teacher->param_hash() == h0);
}

TEST_CASE("ablation switches change the report schema and still train") {
    SUBCASE("semantic branch off") {
        codec_config c = testutil::tiny_codec(10);
        c.semantic_branch = false;
        train_state st = train_state::init(validate(c), fast_train());
        loss_report rep = train_step(st, next_batch(st));
        CHECK_FALSE(rep.has_term("se_recon"));
        CHECK(rep.has_term("self_guidance"));
    }
    SUBCASE("self-guidance off") {
        codec_config c = testutil::tiny_codec(10);
        c.self_guidance = false;
        train_state st = train_state::init(validate(c), fast_train());
        loss_report rep = train_step(st, next_batch(st));
        CHECK_FALSE(rep.has_term("self_guidance"));
        CHECK(rep.has_term("se_recon"));
    }
    SUBCASE("adapter off") {
        codec_config c = testutil::tiny_codec(10);
        c.use_adapter = false;
        train_state st = train_state::init(validate(c), fast_train());
        loss_report rep = train_step(st, next_batch(st));
        CHECK(rep.has_term("se_recon"));
    }
    SUBCASE("quantizer dropout on") {
        codec_config c = testutil::tiny_codec(10);
        c.quantizer_dropout = true;
        train_state st = train_state::init(validate(c), fast_train());
        CHECK_NOTHROW(train_step(st, next_batch(st)));
    }
}

TEST_CASE("overfit harness edge cases") {
    validated_config cfg = validate(testutil::tiny_codec(11));
    train_state st = train_state::init(cfg, fast_train());
    pcm_buffer clip = synth_clip(cfg.sample_rate_hz, 3, 0, 1.0);

    CHECK(overfit_single_clip(st, clip, 0).empty());

    pcm_buffer shorty = synth_clip(cfg.sample_rate_hz, 3, 0, 0.2);
    CHECK_THROWS_WITH_AS(overfit_single_clip(st, shorty, 1), doctest::Contains("ClipTooShort"),
                         error);

    train_state a = train_state::init(cfg, fast_train());
    train_state b = train_state::init(cfg, fast_train());
    auto ca = overfit_single_clip(a, clip, 2);
    auto cb = overfit_single_clip(b, clip, 2);
    CHECK(ca == cb);
    CHECK(ca.size() == 2);
}

TEST_CASE("gradient accumulation multiplies the micro-batch count") {
    validated_config cfg = validate(testutil::tiny_codec(12));
    train_config t = fast_train();
    t.grad_accum = 3;
    train_state st = train_state::init(cfg, t);
    CHECK(next_batch(st).size() == 3);
}
