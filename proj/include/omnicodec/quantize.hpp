#pragma once

#include "omnicodec/rng.hpp"
#include "omnicodec/types.hpp"

#include <vector>

namespace omnicodec {

// K x D code vectors plus EMA statistics. double precision throughout:
// the EMA recurrence is checked against a scalar oracle at 1e-10.
struct codebook {
    int64_t k = 0;
    int64_t d = 0;
    double decay = 0.99;
    double epsilon = 1e-5;
    std::vector<double> vectors;          // k*d
    std::vector<double> ema_cluster_size; // k
    std::vector<double> ema_vector_sum;   // k*d
    bool seeded = false;

    codebook() = default;
    codebook(int64_t k_, int64_t d_)
        : k(k_), d(d_), vectors(size_t(k_ * d_), 0.0),
          ema_cluster_size(size_t(k_), 0.0), ema_vector_sum(size_t(k_ * d_), 0.0) {}

    const double * vec(int64_t i) const { return vectors.data() + i * d; }
    double * vec(int64_t i) { return vectors.data() + i * d; }

    // gaussian codewords, matching EMA stats (cluster size 1, sum = vector)
    static codebook random(int64_t k, int64_t d, rng & r, double sigma = 1.0);
    // k-means-free seeding: codewords cycled from batch rows plus tiny jitter
    void seed_from_batch(const latent_sequence & batch, rng & r);
};

// index of the nearest codeword (squared euclidean, ties -> smallest index)
int32_t vq_nearest(const codebook & cb, const float * x, float * quantized /*nullable*/);

struct rvq_stack {
    std::vector<codebook> stages;
    int64_t code_dim = 0;

    rvq_stack() = default;
    rvq_stack(int n_stages, int64_t k, int64_t d) : code_dim(d) {
        stages.assign(size_t(n_stages), codebook(k, d));
    }
    int n_stages() const { return int(stages.size()); }
};

struct quant_result {
    // [frames x stages]; entries beyond n_active are token_inactive
    std::vector<int32_t> indices;
    int64_t frames = 0;
    int n_stages = 0;
    latent_sequence quantized;                 // sum of selected codewords
    std::vector<double> residual_energy;       // mean ||r_{s+1}||^2 per stage
    // residual fed to each stage (kept only when collect_inputs), for EMA
    std::vector<std::vector<float>> stage_inputs;

    int32_t index(int64_t f, int s) const { return indices[size_t(f) * size_t(n_stages) + size_t(s)]; }
};

quant_result rvq_quantize(const rvq_stack & stack, const latent_sequence & x, int n_active,
                          bool collect_inputs = false);

// assignment list for one EMA step
struct vq_assignments {
    std::vector<int32_t> idx;   // frames
    const float * vectors = nullptr; // frames x d, the stage inputs
    int64_t frames = 0;
};

void ema_update(codebook & cb, const vq_assignments & a, bool training_mode);

// p=0.5 all stages active, otherwise uniform over {1..stages}
int quantizer_dropout_schedule(rng & r, int stages, bool training_mode);

// mean over frames, sum over dims of (x - q)^2
double commitment_loss(const latent_sequence & x, const latent_sequence & q);

// replaces codes with ema_cluster_size < threshold by random batch rows
// (stats reset to a fresh unit cluster); returns number of codes reseeded
int dead_code_reseed(codebook & cb, const latent_sequence & batch, double threshold,
                     rng & r, bool training_mode);

struct utilization_report {
    std::vector<int64_t> used_per_stream;
    std::vector<double> utilization_per_stream; // used / K
    double aggregate = 0.0;                     // mean over streams
};

utilization_report codebook_utilization(const token_matrix & tokens, int64_t k);

} // namespace omnicodec
