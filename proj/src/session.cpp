#include "omnicodec/session.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"

#include <cmath>
#include <cstring>

namespace omnicodec {

codec_model codec_model::init(const validated_config & cfg) {
    codec_model m;
    m.cfg = cfg;
    m.gen = init_graph_params(cfg, uint64_t(cfg.seed));
    if (cfg.semantic_branch) {
        rng r = rng::from_seed_and_tag(uint64_t(cfg.seed), "sq.init");
        m.semantic_cb = codebook::random(cfg.semantic_codebook_size, cfg.semantic_dim, r, 0.1);
    }
    m.acoustic = rvq_stack(cfg.acoustic_stages, cfg.acoustic_codebook_size, cfg.acoustic_code_dim);
    for (int s = 0; s < cfg.acoustic_stages; ++s) {
        rng r = rng::from_seed_and_tag(uint64_t(cfg.seed), "rvq.s" + std::to_string(s) + ".init");
        m.acoustic.stages[size_t(s)] = codebook::random(cfg.acoustic_codebook_size,
                                                        cfg.acoustic_code_dim, r, 0.1);
    }
    return m;
}

namespace {

void codebook_to_ck(checkpoint & ck, const std::string & pre, const codebook & cb) {
    ck.put_f64(pre + "vectors", {cb.k, cb.d}, cb.vectors);
    ck.put_f64(pre + "cluster", {cb.k}, cb.ema_cluster_size);
    ck.put_f64(pre + "sum", {cb.k, cb.d}, cb.ema_vector_sum);
}

void codebook_from_ck(const checkpoint & ck, const std::string & pre, codebook & cb) {
    const auto & v = ck.get(pre + "vectors");
    if (v.shape != std::vector<int64_t>{cb.k, cb.d})
        fail(err::shape_mismatch, "checkpoint codebook " + pre + " has wrong shape");
    cb.vectors = v.f64v;
    cb.ema_cluster_size = ck.get(pre + "cluster").f64v;
    cb.ema_vector_sum = ck.get(pre + "sum").f64v;
    cb.seeded = true;
}

} // namespace

void model_to_checkpoint(const codec_model & m, checkpoint & ck) {
    ck.config_hash = m.cfg.config_hash;
    ck.config_text = canonical_config_text(m.cfg);
    m.gen.to_checkpoint(ck, "gen.");
    if (m.cfg.semantic_branch) codebook_to_ck(ck, "sq.", m.semantic_cb);
    for (int s = 0; s < m.cfg.acoustic_stages; ++s)
        codebook_to_ck(ck, "rvq.s" + std::to_string(s) + ".", m.acoustic.stages[size_t(s)]);
    ck.put_u64("meta.data_seeded", {m.data_seeded ? 1ull : 0ull});
    ck.put_u64("meta.init_seed", {uint64_t(m.cfg.seed)});
}

codec_model model_from_checkpoint(const checkpoint & ck) {
    config_file cf = parse_config(ck.config_text, "<checkpoint>", false);
    validated_config cfg = validate(cf.codec);
    if (cfg.config_hash != ck.config_hash)
        fail(err::config_hash_mismatch, "checkpoint config hash does not match its embedded config");
    codec_model m = codec_model::init(cfg);
    m.gen.from_checkpoint(ck, "gen.");
    if (cfg.semantic_branch) codebook_from_ck(ck, "sq.", m.semantic_cb);
    for (int s = 0; s < cfg.acoustic_stages; ++s)
        codebook_from_ck(ck, "rvq.s" + std::to_string(s) + ".", m.acoustic.stages[size_t(s)]);
    m.data_seeded = ck.get("meta.data_seeded").u64v.at(0) != 0;
    return m;
}

void model_save(const std::string & path, const codec_model & m) {
    checkpoint ck;
    model_to_checkpoint(m, ck);
    checkpoint_save(path, ck);
}

codec_model model_load(const std::string & path) {
    return model_from_checkpoint(checkpoint_load(path));
}

token_file_header make_token_header(const validated_config & cfg, int64_t frames) {
    token_file_header h;
    h.flags = cfg.semantic_branch ? 1 : 0;
    h.sample_rate = uint32_t(cfg.sample_rate_hz);
    h.hop = uint32_t(cfg.hop);
    h.streams = uint16_t(cfg.total_streams());
    h.bits_per_code = uint8_t(std::max(cfg.semantic_branch ? cfg.semantic_bits : 0, cfg.acoustic_bits));
    h.frame_count = uint64_t(frames);
    return h;
}

void check_token_header(const token_file_header & h, const validated_config & cfg) {
    const token_file_header want = make_token_header(cfg, 0);
    if (h.flags != want.flags || h.sample_rate != want.sample_rate || h.hop != want.hop ||
        h.streams != want.streams || h.bits_per_code != want.bits_per_code)
        fail(err::config_hash_mismatch,
             "token file header does not match the checkpoint configuration");
}

// ---- session ----

namespace {

void matvec(const float * x, const tensor & w, const tensor & b, float * y) {
    const int64_t in = w.dim(0), out = w.dim(1);
    for (int64_t j = 0; j < out; ++j) y[j] = 0.0f;
    for (int64_t i = 0; i < in; ++i) kern::axpy(y, x[i], w.data() + i * out, out);
    for (int64_t j = 0; j < out; ++j) y[j] += b.data()[j];
}

} // namespace

codec_session::codec_session(const codec_model & model, std::shared_ptr<semantic_teacher> teacher)
    : m_(model),
      teacher_(std::move(teacher)),
      resampler_(model.cfg.sample_rate_hz, model.cfg.teacher_sample_rate_hz) {
    if (m_.cfg.semantic_branch && !teacher_)
        teacher_ = std::make_shared<desk_teacher>(m_.cfg.teacher_sample_rate_hz, m_.cfg.semantic_dim);
    if (m_.cfg.semantic_branch && teacher_->dim() != m_.cfg.semantic_dim)
        fail(err::dim_mismatch, "teacher dim != semantic_dim");
    enc_.bind(m_.gen, m_.cfg);
    tenc_.bind(m_.gen, m_.cfg, "tenc");
    tdec_.bind(m_.gen, m_.cfg, "tdec");
    dec_.bind(m_.gen, m_.cfg);
    adapter_ = make_adapter(m_.gen, m_.cfg);
    reset();
}

void codec_session::reset() {
    enc_.reset();
    tenc_.reset();
    tdec_.reset();
    dec_.reset();
    resampler_.reset();
    if (teacher_) teacher_->reset();
    pending_.clear();
    teacher_rows_.clear();
    frames_emitted_ = 0;
    flushed_ = false;
}

token_matrix codec_session::process_hops(const float * samples, int64_t n) {
    const auto & cfg = m_.cfg;
    const int64_t frames = n / cfg.hop;
    token_matrix out(frames, cfg.total_streams(), cfg.semantic_branch);
    if (frames == 0) return out;

    // acoustic path: conv stack then encoder-side transformer
    std::vector<float> lat = enc_.process(samples, n);
    std::vector<float> hidden = tenc_.process(lat.data(), frames);

    // semantic path: resample, frozen teacher, pool to the codec frame rate
    latent_sequence adapted(0, cfg.hidden_dim, cfg.frame_rate_hz);
    if (cfg.semantic_branch) {
        std::vector<float> s16 = resampler_.process(samples, n);
        std::vector<float> rows = teacher_->process(s16.data(), int64_t(s16.size()));
        const int64_t n_rows = int64_t(rows.size()) / cfg.semantic_dim;
        for (int64_t r = 0; r < n_rows; ++r)
            teacher_rows_.emplace_back(rows.begin() + r * cfg.semantic_dim,
                                       rows.begin() + (r + 1) * cfg.semantic_dim);
        if (int64_t(teacher_rows_.size()) < frames * cfg.teacher_pool)
            fail(err::frame_misalignment, "teacher produced too few frames");
        latent_sequence pooled(frames, cfg.semantic_dim, cfg.frame_rate_hz);
        for (int64_t f = 0; f < frames; ++f) {
            for (int64_t j = 0; j < cfg.semantic_dim; ++j) {
                double acc = 0.0;
                for (int p = 0; p < cfg.teacher_pool; ++p)
                    acc += double(teacher_rows_[size_t(f * cfg.teacher_pool + p)][size_t(j)]);
                pooled.row(f)[j] = float(acc / double(cfg.teacher_pool));
            }
        }
        teacher_rows_.erase(teacher_rows_.begin(),
                            teacher_rows_.begin() + frames * cfg.teacher_pool);

        semantic_quant sq = semantic_quantize(pooled, m_.semantic_cb);
        for (int64_t f = 0; f < frames; ++f) out.at(f, 0) = sq.tokens[size_t(f)];
        adapted = adapter_.apply(sq.s_q);
    }

    // subtract, project, residual-quantize
    const int ac_base = cfg.semantic_branch ? 1 : 0;
    latent_sequence code_in(frames, cfg.acoustic_code_dim, cfg.frame_rate_hz);
    const tensor & piw = m_.gen.get("proj.in.w")->val;
    const tensor & pib = m_.gen.get("proj.in.b")->val;
    std::vector<float> row(size_t(cfg.hidden_dim));
    for (int64_t f = 0; f < frames; ++f) {
        std::memcpy(row.data(), hidden.data() + f * cfg.hidden_dim,
                    size_t(cfg.hidden_dim) * sizeof(float));
        if (cfg.semantic_branch)
            for (int64_t j = 0; j < cfg.hidden_dim; ++j) row[size_t(j)] -= adapted.row(f)[j];
        matvec(row.data(), piw, pib, code_in.row(f));
    }
    quant_result qr = rvq_quantize(m_.acoustic, code_in, cfg.acoustic_stages);
    for (int64_t f = 0; f < frames; ++f)
        for (int s = 0; s < cfg.acoustic_stages; ++s)
            out.at(f, ac_base + s) = qr.index(f, s);
    frames_emitted_ += frames;
    return out;
}

token_matrix codec_session::encode_chunk(const float * samples, int64_t n) {
    if (flushed_) fail(err::shape_mismatch, "encode after flush");
    pending_.insert(pending_.end(), samples, samples + n);
    const int64_t usable = int64_t(pending_.size()) / m_.cfg.hop * m_.cfg.hop;
    token_matrix out = process_hops(pending_.data(), usable);
    pending_.erase(pending_.begin(), pending_.begin() + usable);
    return out;
}

token_matrix codec_session::encode_flush() {
    if (flushed_) fail(err::shape_mismatch, "double flush");
    flushed_ = true;
    if (pending_.empty()) return token_matrix(0, m_.cfg.total_streams(), m_.cfg.semantic_branch);
    pending_.resize(size_t(m_.cfg.hop), 0.0f); // zero-pad the final partial hop
    token_matrix out = process_hops(pending_.data(), m_.cfg.hop);
    pending_.clear();
    return out;
}

namespace {

void append_rows(token_matrix & dst, const token_matrix & src) {
    dst.v.insert(dst.v.end(), src.v.begin(), src.v.end());
    dst.frames += src.frames;
}

} // namespace

token_matrix codec_session::encode_all(const pcm_buffer & pcm, int64_t chunk_samples) {
    if (pcm.sample_rate_hz != m_.cfg.sample_rate_hz)
        fail(err::sample_rate_mismatch, "input is " + std::to_string(pcm.sample_rate_hz) +
             " Hz, model expects " + std::to_string(m_.cfg.sample_rate_hz));
    token_matrix out(0, m_.cfg.total_streams(), m_.cfg.semantic_branch);
    if (chunk_samples <= 0) chunk_samples = std::max<int64_t>(pcm.size(), 1);
    for (int64_t off = 0; off < pcm.size(); off += chunk_samples) {
        const int64_t n = std::min(chunk_samples, pcm.size() - off);
        append_rows(out, encode_chunk(pcm.samples.data() + off, n));
    }
    append_rows(out, encode_flush());
    return out;
}

std::vector<float> codec_session::decode_chunk(const token_matrix & rows) {
    const auto & cfg = m_.cfg;
    if (rows.streams != cfg.total_streams())
        fail(err::config_hash_mismatch, "token stream count does not match the model");
    const int64_t frames = rows.frames;
    if (frames == 0) return {};
    const int ac_base = cfg.semantic_branch ? 1 : 0;

    latent_sequence recombined(frames, cfg.hidden_dim, cfg.frame_rate_hz);
    const tensor & pow_ = m_.gen.get("proj.out.w")->val;
    const tensor & pob = m_.gen.get("proj.out.b")->val;
    std::vector<float> code(size_t(cfg.acoustic_code_dim));
    latent_sequence s_q(frames, cfg.semantic_dim, cfg.frame_rate_hz);
    for (int64_t f = 0; f < frames; ++f) {
        std::fill(code.begin(), code.end(), 0.0f);
        for (int s = 0; s < cfg.acoustic_stages; ++s) {
            const int32_t tok = rows.at(f, ac_base + s);
            if (tok == token_inactive) continue;
            if (tok < 0 || tok >= cfg.acoustic_codebook_size)
                fail(err::token_out_of_range, "acoustic token " + std::to_string(tok));
            const double * v = m_.acoustic.stages[size_t(s)].vec(tok);
            for (int64_t j = 0; j < cfg.acoustic_code_dim; ++j) code[size_t(j)] += float(v[j]);
        }
        matvec(code.data(), pow_, pob, recombined.row(f));
        if (cfg.semantic_branch) {
            const int32_t tok = rows.at(f, 0);
            if (tok == token_inactive || tok < 0 || tok >= cfg.semantic_codebook_size)
                fail(err::token_out_of_range, "semantic token " + std::to_string(tok));
            const double * v = m_.semantic_cb.vec(tok);
            for (int64_t j = 0; j < cfg.semantic_dim; ++j) s_q.row(f)[j] = float(v[j]);
        }
    }
    if (cfg.semantic_branch) {
        latent_sequence adapted = adapter_.apply(s_q);
        for (int64_t i = 0; i < frames * cfg.hidden_dim; ++i)
            recombined.data[size_t(i)] += adapted.data[size_t(i)];
    }
    std::vector<float> hidden = tdec_.process(recombined.data.data(), frames);
    return dec_.process(hidden.data(), frames);
}

pcm_buffer codec_session::decode_all(const token_matrix & tokens) {
    pcm_buffer out;
    out.sample_rate_hz = m_.cfg.sample_rate_hz;
    std::vector<float> samples = decode_chunk(tokens);
    out.samples = std::move(samples);
    return out;
}

} // namespace omnicodec
