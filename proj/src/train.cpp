#include "omnicodec/train.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

namespace omnicodec {

double lr_schedule(int64_t step, const train_config & cfg) {
    if (step < cfg.warmup_steps)
        return cfg.lr_peak * double(step) / double(cfg.warmup_steps);
    const int64_t into = step - cfg.warmup_steps;
    if (into < cfg.decay_steps)
        return cfg.lr_peak * 0.5 * (1.0 + std::cos(M_PI * double(into) / double(cfg.decay_steps)));
    return 0.0;
}

// ---- optimizer ----

void adam_state::bind(const param_store & ps) {
    for (const auto & [name, v] : ps.p) {
        if (!m1.count(name)) m1[name] = tensor(v->val.shape);
        if (!m2.count(name)) m2[name] = tensor(v->val.shape);
    }
}

void adam_state::step(param_store & ps, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, double(t));
    const double c2 = 1.0 - std::pow(beta2, double(t));
    for (auto & [name, v] : ps.p) {
        if (v->grad.v.empty()) continue;
        tensor & m = m1[name];
        tensor & s = m2[name];
        float * pv = v->val.data();
        const float * g = v->grad.data();
        const int64_t n = v->val.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double gi = double(g[i]);
            const double mi = beta1 * double(m.v[size_t(i)]) + (1.0 - beta1) * gi;
            const double si = beta2 * double(s.v[size_t(i)]) + (1.0 - beta2) * gi * gi;
            m.v[size_t(i)] = float(mi);
            s.v[size_t(i)] = float(si);
            const double mhat = mi / c1;
            const double shat = si / c2;
            const double upd = mhat / (std::sqrt(shat) + eps) + weight_decay * double(pv[i]);
            pv[i] = float(double(pv[i]) - lr * upd);
        }
    }
}

void adam_state::to_checkpoint(checkpoint & ck, const std::string & prefix) const {
    ck.put_i64(prefix + "t", {t});
    for (const auto & [name, m] : m1) ck.put_f32(prefix + "m1." + name, m.shape, m.v);
    for (const auto & [name, m] : m2) ck.put_f32(prefix + "m2." + name, m.shape, m.v);
}

void adam_state::from_checkpoint(const checkpoint & ck, const std::string & prefix) {
    t = ck.get(prefix + "t").i64v.at(0);
    for (auto & [name, m] : m1) m.v = ck.get(prefix + "m1." + name).f32v;
    for (auto & [name, m] : m2) m.v = ck.get(prefix + "m2." + name).f32v;
}

// ---- loss report ----

double loss_report::term(const std::string & name) const {
    for (const auto & [k, v] : terms)
        if (k == name) return v;
    fail(err::shape_mismatch, "loss report has no term " + name);
}

bool loss_report::has_term(const std::string & name) const {
    for (const auto & [k, v] : terms)
        if (k == name) return true;
    return false;
}

std::string loss_report::line() const {
    std::ostringstream os;
    os.precision(10);
    os << "step=" << step << " lr=" << lr;
    for (const auto & [k, v] : terms) os << " " << k << "=" << v;
    os << " gen_total=" << generator_total << " dis_total=" << discriminator_total;
    return os.str();
}

// ---- synthetic data ----

pcm_buffer synth_clip(int sample_rate_hz, uint64_t seed, int64_t sample_index, double seconds) {
    rng r = rng::from_seed_and_tag(seed, "synth." + std::to_string(sample_index));
    const int64_t n = int64_t(seconds * sample_rate_hz);
    pcm_buffer out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.assign(size_t(n), 0.0f);
    const int family = int(r.next_int(0, 3));
    const double sr = double(sample_rate_hz);
    switch (family) {
        case 0: { // sinusoid sweep
            const double f0 = r.next_uniform(80.0, 2000.0);
            const double f1 = r.next_uniform(200.0, 6000.0);
            double phase = r.next_uniform(0.0, 2.0 * M_PI);
            for (int64_t i = 0; i < n; ++i) {
                const double a = double(i) / double(std::max<int64_t>(n - 1, 1));
                const double f = f0 * std::pow(f1 / f0, a);
                phase += 2.0 * M_PI * f / sr;
                out.samples[size_t(i)] = float(std::sin(phase));
            }
            break;
        }
        case 1: { // harmonic stack, f0 in 100..400
            const double f0 = r.next_uniform(100.0, 400.0);
            const int nh = int(r.next_int(3, 8));
            std::vector<double> phases(static_cast<size_t>(nh));
            for (auto & p : phases) p = r.next_uniform(0.0, 2.0 * M_PI);
            for (int64_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int h = 0; h < nh; ++h)
                    acc += std::sin(phases[size_t(h)] + 2.0 * M_PI * f0 * double(h + 1) * double(i) / sr) /
                           double(h + 1);
                out.samples[size_t(i)] = float(acc);
            }
            break;
        }
        case 2: { // band-limited noise bursts (moving-average smoothed)
            const int k = int(r.next_int(2, 16));
            std::vector<double> noise(static_cast<size_t>(n + k));
            for (auto & v : noise) v = r.next_uniform(-1.0, 1.0);
            const int64_t burst = std::max<int64_t>(n / 4, 1);
            for (int64_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j < k; ++j) acc += noise[size_t(i + j)];
                const double env = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i % burst) / double(burst));
                out.samples[size_t(i)] = float(acc / double(k) * env);
            }
            break;
        }
        default: { // amplitude-modulated chirp
            const double f0 = r.next_uniform(200.0, 1000.0);
            const double f1 = r.next_uniform(1000.0, 4000.0);
            const double fm = r.next_uniform(1.0, 8.0);
            double phase = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                const double a = double(i) / double(std::max<int64_t>(n - 1, 1));
                phase += 2.0 * M_PI * (f0 + (f1 - f0) * a) / sr;
                const double am = 0.5 + 0.5 * std::sin(2.0 * M_PI * fm * double(i) / sr);
                out.samples[size_t(i)] = float(std::sin(phase) * am);
            }
        }
    }
    float peak = 0.0f;
    for (float v : out.samples) peak = std::max(peak, std::abs(v));
    const float target = float(r.next_uniform(0.5, 0.95));
    if (peak > 0.0f)
        for (auto & v : out.samples) v *= target / peak;
    return out;
}

// ---- state ----

train_state train_state::init(const validated_config & cfg, const train_config & tcfg) {
    train_state st;
    st.model = codec_model::init(cfg);
    st.disc = init_discriminator(uint64_t(cfg.seed) ^ 0xd15cull);
    st.tcfg = tcfg;
    st.opt_gen.bind(st.model.gen);
    st.opt_disc.bind(st.disc.params);
    st.train_rng = rng(uint64_t(cfg.seed) ^ 0x7121a117ull);
    if (cfg.semantic_branch) {
        st.teacher = std::make_shared<desk_teacher>(cfg.teacher_sample_rate_hz, cfg.semantic_dim);
        st.teacher_hash = st.teacher->param_hash();
    }
    return st;
}

namespace {

// pad to a whole number of hops (the encoder's final-hop zero padding)
std::vector<float> pad_to_hop(const pcm_buffer & pcm, int hop) {
    std::vector<float> x = pcm.samples;
    const int64_t rem = int64_t(x.size()) % hop;
    if (rem != 0 || x.empty()) x.resize(x.size() + size_t(hop - rem), 0.0f);
    return x;
}

latent_sequence teacher_features_pooled(train_state & st, const std::vector<float> & x24,
                                        int64_t frames) {
    const auto & cfg = st.model.cfg;
    st.teacher->reset();
    polyphase_resampler rs(cfg.sample_rate_hz, cfg.teacher_sample_rate_hz);
    std::vector<float> s16 = rs.process(x24.data(), int64_t(x24.size()));
    std::vector<float> rows = st.teacher->process(s16.data(), int64_t(s16.size()));
    latent_sequence feats(int64_t(rows.size()) / cfg.semantic_dim, cfg.semantic_dim, 12.5);
    feats.data = std::move(rows);
    latent_sequence pooled = pool_rows(feats, cfg.teacher_pool);
    if (std::llabs(pooled.frames - frames) > 1)
        fail(err::frame_misalignment, "teacher frames " + std::to_string(pooled.frames) +
             " vs encoder frames " + std::to_string(frames));
    return pooled;
}

struct item_losses {
    var ac_recon, se_recon, commit, self_guidance, gen, fm, dis;
};

struct ema_batch {
    // per acoustic stage: indices and inputs gathered across the batch
    std::vector<std::vector<int32_t>> idx;
    std::vector<std::vector<float>> inputs;
    std::vector<int64_t> frames;
    // semantic
    std::vector<int32_t> sem_idx;
    std::vector<float> sem_inputs;
    int64_t sem_frames = 0;
};

item_losses forward_item(train_state & st, const pcm_buffer & pcm, bool adversarial,
                         ema_batch & ema) {
    const auto & cfg = st.model.cfg;
    param_store & ps = st.model.gen;
    std::vector<float> x24 = pad_to_hop(pcm, cfg.hop);
    const int64_t t_samples = int64_t(x24.size());

    var x = ad::constant(tensor({t_samples, 1}, x24));
    var lat = encoder_forward(ps, cfg, x);
    var h = transformer_forward(ps, cfg, lat, "tenc");
    int64_t frames = h->val.dim(0);

    item_losses out;
    var adapted; // [frames, hidden]
    latent_sequence pooled_t;
    if (cfg.semantic_branch) {
        pooled_t = teacher_features_pooled(st, x24, frames);
        const int64_t use = std::min(frames, pooled_t.frames);
        if (use < frames) { h = ad::slice_rows(h, 0, use); frames = use; }
        if (use < pooled_t.frames) {
            pooled_t.data.resize(size_t(use * pooled_t.dim));
            pooled_t.frames = use;
        }
        // codebooks are seeded from the first batch the model ever sees
        if (!st.model.data_seeded && pooled_t.frames > 0) {
            rng seed_rng = rng::from_seed_and_tag(uint64_t(cfg.seed), "sq.batch_seed");
            st.model.semantic_cb.seed_from_batch(pooled_t, seed_rng);
        }
        semantic_quant sq = semantic_quantize(pooled_t, st.model.semantic_cb);
        out.se_recon = ad::constant([&] {
            tensor t({1});
            t.v[0] = float(semantic_recon_loss(sq.s_q, pooled_t));
            return t;
        }());
        ema.sem_idx.insert(ema.sem_idx.end(), sq.tokens.begin(), sq.tokens.end());
        ema.sem_inputs.insert(ema.sem_inputs.end(), pooled_t.data.begin(), pooled_t.data.end());
        ema.sem_frames += pooled_t.frames;

        adapter_map am = make_adapter(ps, cfg);
        var s_q_var = ad::constant(tensor({sq.s_q.frames, sq.s_q.dim}, sq.s_q.data));
        adapted = am.apply_train(s_q_var);
        h = ad::sub(h, adapted);
    }

    var z_e = ad::linear(h, ps.get("proj.in.w"), ps.get("proj.in.b"));

    // residual quantization over plain values
    latent_sequence z_e_seq(frames, cfg.acoustic_code_dim, cfg.frame_rate_hz);
    z_e_seq.data = z_e->val.v;
    if (!st.model.data_seeded && frames > 0) {
        latent_sequence residual = z_e_seq;
        for (int s = 0; s < cfg.acoustic_stages; ++s) {
            rng seed_rng = rng::from_seed_and_tag(uint64_t(cfg.seed),
                                                  "rvq.s" + std::to_string(s) + ".batch_seed");
            st.model.acoustic.stages[size_t(s)].seed_from_batch(residual, seed_rng);
            std::vector<int32_t> idx(static_cast<size_t>(frames));
            kern::par::vq_nearest_scan(idx.data(), residual.data.data(),
                                       st.model.acoustic.stages[size_t(s)].vectors.data(), frames,
                                       st.model.acoustic.stages[size_t(s)].k, cfg.acoustic_code_dim);
            for (int64_t f = 0; f < frames; ++f) {
                const double * q = st.model.acoustic.stages[size_t(s)].vec(idx[size_t(f)]);
                for (int64_t j = 0; j < cfg.acoustic_code_dim; ++j)
                    residual.row(f)[j] -= float(q[j]);
            }
        }
        st.model.data_seeded = true;
    }
    int n_active = cfg.acoustic_stages;
    if (cfg.quantizer_dropout)
        n_active = quantizer_dropout_schedule(st.train_rng, cfg.acoustic_stages, true);
    quant_result qr = rvq_quantize(st.model.acoustic, z_e_seq, n_active, true);
    if (ema.idx.empty()) {
        ema.idx.resize(size_t(cfg.acoustic_stages));
        ema.inputs.resize(size_t(cfg.acoustic_stages));
        ema.frames.assign(size_t(cfg.acoustic_stages), 0);
    }
    for (int s = 0; s < n_active; ++s) {
        for (int64_t f = 0; f < frames; ++f)
            ema.idx[size_t(s)].push_back(qr.index(f, s));
        ema.inputs[size_t(s)].insert(ema.inputs[size_t(s)].end(), qr.stage_inputs[size_t(s)].begin(),
                                     qr.stage_inputs[size_t(s)].end());
        ema.frames[size_t(s)] += frames;
    }

    // commitment: acoustic straight-through input side, semantic is frozen
    var q_const = ad::constant(tensor({frames, cfg.acoustic_code_dim}, qr.quantized.data));
    out.commit = ad::mse_sumdim_meanframes(z_e, q_const);
    if (cfg.semantic_branch) {
        tensor sem_commit({1});
        sem_commit.v[0] = float(out.se_recon->scalar() * double(cfg.semantic_dim)); // sum-over-dims form
        out.commit = ad::add(out.commit, ad::constant(std::move(sem_commit)));
    }

    var z_q = ad::straight_through(z_e, q_const->val);
    var a_q = ad::linear(z_q, ps.get("proj.out.w"), ps.get("proj.out.b"));
    var rec_q = cfg.semantic_branch ? ad::add(a_q, adapted) : a_q;
    var h_q = transformer_forward(ps, cfg, rec_q, "tdec");

    if (cfg.self_guidance) {
        // continuous-latent pass shares parameters but receives no gradient
        tensor h_e_val;
        {
            ad::no_grad_guard ng;
            var a_e = ad::linear(ad::constant(z_e->val), ps.get("proj.out.w"), ps.get("proj.out.b"));
            var rec_e = cfg.semantic_branch ? ad::add(a_e, ad::constant(adapted->val)) : a_e;
            var h_e = transformer_forward(ps, cfg, rec_e, "tdec");
            h_e_val = h_e->val;
        }
        out.self_guidance = self_guidance_loss(ad::constant(std::move(h_e_val)), h_q);
    }

    var x_hat = decoder_forward(ps, cfg, h_q);
    var x_1d = ad::reshape(x, {t_samples});
    var y_1d = ad::reshape(x_hat, {x_hat->val.dim(0)});
    out.ac_recon = multiscale_mel_loss(x_1d, y_1d, cfg.sample_rate_hz, cfg.hop);

    if (adversarial) {
        adv_losses adv = adversarial_losses(st.disc, x_1d, y_1d);
        out.gen = adv.gen;
        out.fm = adv.fm;
        out.dis = adv.dis;
    }
    return out;
}

var average_items(std::vector<var> items) {
    if (items.empty()) return {};
    std::vector<std::pair<var, double>> terms;
    for (auto & v : items) terms.emplace_back(v, 1.0 / double(items.size()));
    return ad::weighted_sum(terms);
}

} // namespace

loss_report train_step(train_state & st, const std::vector<pcm_buffer> & batch) {
    const auto & cfg = st.model.cfg;
    if (batch.empty()) fail(err::empty_batch, "train_step needs at least one clip");
    const bool adv_weights = cfg.weights.dis > 0.0f || cfg.weights.gen > 0.0f || cfg.weights.fm > 0.0f;
    const bool adversarial = adv_weights && st.step >= st.tcfg.adv_start_step;

    ema_batch ema;
    std::vector<var> ac, se, cm, sg, gn, fm, ds;
    for (const auto & pcm : batch) {
        item_losses il = forward_item(st, pcm, adversarial, ema);
        ac.push_back(il.ac_recon);
        cm.push_back(il.commit);
        if (il.se_recon) se.push_back(il.se_recon);
        if (il.self_guidance) sg.push_back(il.self_guidance);
        if (il.gen) { gn.push_back(il.gen); fm.push_back(il.fm); ds.push_back(il.dis); }
    }
    loss_parts parts;
    parts.ac_recon = average_items(std::move(ac));
    parts.commit = average_items(std::move(cm));
    parts.se_recon = average_items(std::move(se));
    parts.self_guidance = average_items(std::move(sg));
    parts.gen = average_items(std::move(gn));
    parts.fm = average_items(std::move(fm));
    parts.dis = average_items(std::move(ds));

    loss_totals totals = total_loss(parts, cfg.weights);
    const double lr = lr_schedule(st.step, st.tcfg);

    ad::backward(totals.generator_total);
    st.opt_gen.step(st.model.gen, lr);
    if (parts.dis) {
        ad::backward(totals.discriminator_total);
        st.opt_disc.step(st.disc.params, lr);
    }
    st.model.gen.zero_grads();
    st.disc.params.zero_grads();

    // EMA codebook maintenance on this step's assignments
    if (st.model.cfg.semantic_branch && ema.sem_frames > 0) {
        vq_assignments a{ema.sem_idx, ema.sem_inputs.data(), ema.sem_frames};
        ema_update(st.model.semantic_cb, a, true);
        if (st.tcfg.ema_reseed) {
            latent_sequence b(ema.sem_frames, cfg.semantic_dim, cfg.frame_rate_hz);
            b.data = ema.sem_inputs;
            dead_code_reseed(st.model.semantic_cb, b, 0.1, st.train_rng, true);
        }
    }
    for (size_t s = 0; s < ema.idx.size(); ++s) {
        if (ema.frames[s] == 0) continue; // stage inactive this step
        vq_assignments a{ema.idx[s], ema.inputs[s].data(), ema.frames[s]};
        ema_update(st.model.acoustic.stages[s], a, true);
        if (st.tcfg.ema_reseed) {
            latent_sequence b(ema.frames[s], cfg.acoustic_code_dim, cfg.frame_rate_hz);
            b.data = ema.inputs[s];
            dead_code_reseed(st.model.acoustic.stages[s], b, 0.1, st.train_rng, true);
        }
    }

    loss_report rep;
    rep.step = st.step;
    rep.lr = lr;
    rep.terms.emplace_back("ac_recon", double(parts.ac_recon->scalar()));
    if (parts.se_recon) rep.terms.emplace_back("se_recon", double(parts.se_recon->scalar()));
    rep.terms.emplace_back("commit", double(parts.commit->scalar()));
    if (parts.self_guidance) rep.terms.emplace_back("self_guidance", double(parts.self_guidance->scalar()));
    if (parts.gen) {
        rep.terms.emplace_back("gen", double(parts.gen->scalar()));
        rep.terms.emplace_back("fm", double(parts.fm->scalar()));
        rep.terms.emplace_back("dis", double(parts.dis->scalar()));
    }
    rep.generator_total = double(totals.generator_total->scalar());
    rep.discriminator_total = double(totals.discriminator_total->scalar());
    ++st.step;
    return rep;
}

std::vector<pcm_buffer> next_batch(train_state & st) {
    const auto & cfg = st.model.cfg;
    const int64_t want = int64_t(st.tcfg.batch_size) * st.tcfg.grad_accum;
    const int64_t seg = int64_t(st.tcfg.segment_seconds * cfg.sample_rate_hz);
    std::vector<pcm_buffer> batch;
    for (int64_t i = 0; i < want; ++i) {
        if (st.tcfg.data_source == "synthetic") {
            batch.push_back(synth_clip(cfg.sample_rate_hz, uint64_t(cfg.seed), st.sample_cursor,
                                       st.tcfg.segment_seconds));
        } else if (st.tcfg.data_source == "single_clip") {
            batch.push_back(st.clip);
        } else {
            if (st.wav_files.empty()) fail(err::empty_corpus, "wav_dir data source has no files");
            pcm_buffer pcm = wav_read(st.wav_files[size_t(st.sample_cursor % int64_t(st.wav_files.size()))]);
            if (pcm.sample_rate_hz != cfg.sample_rate_hz) {
                polyphase_resampler rs(pcm.sample_rate_hz, cfg.sample_rate_hz);
                pcm.samples = rs.process(pcm.samples.data(), pcm.size());
                pcm.sample_rate_hz = cfg.sample_rate_hz;
            }
            if (pcm.size() > seg) pcm.samples.resize(size_t(seg)); // truncate, never split
            batch.push_back(std::move(pcm));
        }
        ++st.sample_cursor;
    }
    return batch;
}

std::vector<double> overfit_single_clip(train_state & st, const pcm_buffer & clip, int64_t steps) {
    const double secs = clip.seconds();
    if (secs < 0.5 || secs > 10.0)
        fail(err::clip_too_short, "clip is " + std::to_string(secs) + " s; need 0.5..10 s");
    std::vector<double> curve;
    std::vector<pcm_buffer> batch{clip};
    for (int64_t i = 0; i < steps; ++i) {
        loss_report rep = train_step(st, batch);
        curve.push_back(rep.term("ac_recon"));
    }
    return curve;
}

void train_save(const std::string & path, const train_state & st) {
    checkpoint ck;
    model_to_checkpoint(st.model, ck);
    ck.config_text += canonical_train_text(st.tcfg); // codec-only hash unaffected
    st.disc.params.to_checkpoint(ck, "disc.");
    st.opt_gen.to_checkpoint(ck, "optg.");
    st.opt_disc.to_checkpoint(ck, "optd.");
    ck.put_i64("train.step", {st.step});
    ck.put_i64("train.cursor", {st.sample_cursor});
    const auto r = st.train_rng.save();
    ck.put_u64("train.rng", std::vector<uint64_t>(r.begin(), r.end()));
    ck.put_u64("train.teacher_hash", {st.teacher_hash});
    checkpoint_save(path, ck);
}

train_state train_load(const std::string & path) {
    checkpoint ck = checkpoint_load(path);
    config_file cf = parse_config(ck.config_text, "<checkpoint>", false);
    train_state st = train_state::init(validate(cf.codec), cf.train);
    st.model = model_from_checkpoint(ck);
    st.disc.params.from_checkpoint(ck, "disc.");
    st.opt_gen.from_checkpoint(ck, "optg.");
    st.opt_disc.from_checkpoint(ck, "optd.");
    st.step = ck.get("train.step").i64v.at(0);
    st.sample_cursor = ck.get("train.cursor").i64v.at(0);
    const auto & rv = ck.get("train.rng").u64v;
    std::array<uint64_t, 6> arr{};
    std::copy_n(rv.begin(), 6, arr.begin());
    st.train_rng.load(arr);
    st.teacher_hash = ck.get("train.teacher_hash").u64v.at(0);
    return st;
}

void train_run(train_state & st, const std::string & out_dir,
               const std::function<void(const std::string &)> & log_line) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    while (st.step < st.tcfg.steps) {
        std::vector<pcm_buffer> batch = next_batch(st);
        loss_report rep = train_step(st, batch);
        log_line(rep.line());
        if (st.tcfg.checkpoint_every > 0 && st.step % st.tcfg.checkpoint_every == 0) {
            train_save(out_dir + "/train_step" + std::to_string(st.step) + ".omck", st);
            model_save(out_dir + "/model_step" + std::to_string(st.step) + ".omck", st.model);
        }
    }
    train_save(out_dir + "/train_final.omck", st);
    model_save(out_dir + "/model_final.omck", st.model);
}

} // namespace omnicodec
