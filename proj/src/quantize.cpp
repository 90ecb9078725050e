#include "omnicodec/quantize.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"

#include <cmath>
#include <set>

namespace omnicodec {

codebook codebook::random(int64_t k, int64_t d, rng & r, double sigma) {
    codebook cb(k, d);
    for (int64_t i = 0; i < k * d; ++i) cb.vectors[size_t(i)] = r.next_gauss() * sigma;
    for (int64_t i = 0; i < k; ++i) cb.ema_cluster_size[size_t(i)] = 1.0;
    cb.ema_vector_sum = cb.vectors;
    cb.seeded = true;
    return cb;
}

void codebook::seed_from_batch(const latent_sequence & batch, rng & r) {
    if (batch.frames == 0) fail(err::empty_batch, "cannot seed codebook from empty batch");
    for (int64_t i = 0; i < k; ++i) {
        const float * src = batch.row(i % batch.frames);
        for (int64_t j = 0; j < d; ++j) {
            double v = double(src[j]);
            if (i >= batch.frames) v += r.next_gauss() * 1e-3; // break duplicates on wrap
            vectors[size_t(i * d + j)] = v;
        }
        ema_cluster_size[size_t(i)] = 1.0;
        for (int64_t j = 0; j < d; ++j) ema_vector_sum[size_t(i * d + j)] = vectors[size_t(i * d + j)];
    }
    seeded = true;
}

int32_t vq_nearest(const codebook & cb, const float * x, float * quantized) {
    int32_t best = 0;
    kern::par::vq_nearest_scan(&best, x, cb.vectors.data(), 1, cb.k, cb.d);
    if (quantized)
        for (int64_t j = 0; j < cb.d; ++j) quantized[j] = float(cb.vec(best)[j]);
    return best;
}

quant_result rvq_quantize(const rvq_stack & stack, const latent_sequence & x, int n_active,
                          bool collect_inputs) {
    const int stages = stack.n_stages();
    if (n_active < 1 || n_active > stages)
        fail(err::invalid_stage_count, "n_active " + std::to_string(n_active) + " of " + std::to_string(stages));
    if (x.dim != stack.code_dim)
        fail(err::dim_mismatch, "rvq input dim " + std::to_string(x.dim) + " != code dim " +
             std::to_string(stack.code_dim));

    const int64_t frames = x.frames;
    const int64_t d = x.dim;
    quant_result out;
    out.frames = frames;
    out.n_stages = stages;
    out.indices.assign(size_t(frames) * size_t(stages), token_inactive);
    out.quantized = latent_sequence(frames, d, x.frame_rate_hz);
    out.residual_energy.assign(size_t(stages), 0.0);
    if (collect_inputs) out.stage_inputs.assign(size_t(stages), {});

    latent_sequence residual = x;
    std::vector<int32_t> idx(static_cast<size_t>(frames));
    for (int s = 0; s < stages; ++s) {
        if (s < n_active) {
            if (collect_inputs) out.stage_inputs[size_t(s)] = residual.data;
            kern::par::vq_nearest_scan(idx.data(), residual.data.data(),
                                       stack.stages[size_t(s)].vectors.data(), frames,
                                       stack.stages[size_t(s)].k, d);
            for (int64_t f = 0; f < frames; ++f) {
                out.indices[size_t(f) * size_t(stages) + size_t(s)] = idx[size_t(f)];
                const double * q = stack.stages[size_t(s)].vec(idx[size_t(f)]);
                float * res = residual.row(f);
                float * acc = out.quantized.row(f);
                for (int64_t j = 0; j < d; ++j) {
                    acc[j] += float(q[j]);
                    res[j] -= float(q[j]);
                }
            }
        }
        // residual energy after stage s (unchanged once stages go inactive)
        double e = 0.0;
        for (const float r : residual.data) e += double(r) * double(r);
        out.residual_energy[size_t(s)] = frames > 0 ? e / double(frames) : 0.0;
    }
    return out;
}

void ema_update(codebook & cb, const vq_assignments & a, bool training_mode) {
    if (!training_mode) fail(err::not_in_training_mode, "ema_update requires training mode");
    std::vector<double> count(size_t(cb.k), 0.0);
    std::vector<double> sum(size_t(cb.k * cb.d), 0.0);
    for (int64_t f = 0; f < a.frames; ++f) {
        const int32_t k = a.idx[size_t(f)];
        count[size_t(k)] += 1.0;
        const float * v = a.vectors + f * cb.d;
        for (int64_t j = 0; j < cb.d; ++j) sum[size_t(k) * size_t(cb.d) + size_t(j)] += double(v[j]);
    }
    for (int64_t k = 0; k < cb.k; ++k) {
        cb.ema_cluster_size[size_t(k)] =
            cb.decay * cb.ema_cluster_size[size_t(k)] + (1.0 - cb.decay) * count[size_t(k)];
        for (int64_t j = 0; j < cb.d; ++j) {
            const size_t i = size_t(k * cb.d + j);
            cb.ema_vector_sum[i] = cb.decay * cb.ema_vector_sum[i] + (1.0 - cb.decay) * sum[i];
            cb.vectors[i] = cb.ema_vector_sum[i] / (cb.ema_cluster_size[size_t(k)] + cb.epsilon);
        }
    }
}

int quantizer_dropout_schedule(rng & r, int stages, bool training_mode) {
    if (!training_mode) fail(err::not_in_training_mode, "quantizer dropout requires training mode");
    if (r.next_double() < 0.5) return stages;
    return int(r.next_int(1, stages));
}

double commitment_loss(const latent_sequence & x, const latent_sequence & q) {
    if (x.frames != q.frames || x.dim != q.dim)
        fail(err::shape_mismatch, "commitment_loss: shapes differ");
    double acc = 0.0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double diff = double(x.data[i]) - double(q.data[i]);
        acc += diff * diff;
    }
    return x.frames > 0 ? acc / double(x.frames) : 0.0;
}

int dead_code_reseed(codebook & cb, const latent_sequence & batch, double threshold,
                     rng & r, bool training_mode) {
    if (!training_mode) fail(err::not_in_training_mode, "dead_code_reseed requires training mode");
    int n_dead = 0;
    for (int64_t k = 0; k < cb.k; ++k) {
        if (cb.ema_cluster_size[size_t(k)] >= threshold) continue;
        if (batch.frames == 0) fail(err::empty_batch, "dead code reseed needs a non-empty batch");
        ++n_dead;
        const float * src = batch.row(r.next_int(0, batch.frames - 1));
        for (int64_t j = 0; j < cb.d; ++j) {
            cb.vectors[size_t(k * cb.d + j)] = double(src[j]);
            cb.ema_vector_sum[size_t(k * cb.d + j)] = double(src[j]);
        }
        cb.ema_cluster_size[size_t(k)] = 1.0;
    }
    return n_dead;
}

utilization_report codebook_utilization(const token_matrix & tokens, int64_t k) {
    utilization_report rep;
    rep.used_per_stream.assign(size_t(tokens.streams), 0);
    rep.utilization_per_stream.assign(size_t(tokens.streams), 0.0);
    for (int64_t s = 0; s < tokens.streams; ++s) {
        std::set<int32_t> used;
        for (int64_t f = 0; f < tokens.frames; ++f) {
            const int32_t tok = tokens.at(f, s);
            if (tok == token_inactive) continue;
            if (tok < 0 || tok >= k)
                fail(err::token_out_of_range, "token " + std::to_string(tok) + " with K=" + std::to_string(k));
            used.insert(tok);
        }
        rep.used_per_stream[size_t(s)] = int64_t(used.size());
        rep.utilization_per_stream[size_t(s)] = double(used.size()) / double(k);
    }
    double agg = 0.0;
    for (double u : rep.utilization_per_stream) agg += u;
    rep.aggregate = tokens.streams > 0 ? agg / double(tokens.streams) : 0.0;
    return rep;
}

} // namespace omnicodec
