#pragma once

#include "omnicodec/losses.hpp"
#include "omnicodec/semantic.hpp"
#include "omnicodec/session.hpp"

#include <functional>
#include <map>
#include <string>

namespace omnicodec {

// linear warmup to lr_peak, cosine decay to zero, then zero
double lr_schedule(int64_t step, const train_config & cfg);

// decoupled adaptive-moment optimizer (betas 0.9/0.99, weight decay 0.01)
struct adam_state {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double weight_decay = 0.01;
    double eps = 1e-8;
    int64_t t = 0;
    std::map<std::string, tensor> m1;
    std::map<std::string, tensor> m2;

    void bind(const param_store & ps); // allocate moments
    void step(param_store & ps, double lr);
    void to_checkpoint(checkpoint & ck, const std::string & prefix) const;
    void from_checkpoint(const checkpoint & ck, const std::string & prefix);
};

struct loss_report {
    int64_t step = 0;
    double lr = 0.0;
    // insertion-ordered term list; disabled branches are absent entirely
    std::vector<std::pair<std::string, double>> terms;
    double generator_total = 0.0;
    double discriminator_total = 0.0;

    double term(const std::string & name) const;
    bool has_term(const std::string & name) const;
    std::string line() const; // one structured text line for the training log
};

// deterministic synthetic audio: sinusoid sweeps, harmonic stacks
// (f0 100-400 Hz), band-limited noise bursts, amplitude-modulated chirps
pcm_buffer synth_clip(int sample_rate_hz, uint64_t seed, int64_t sample_index, double seconds);

struct train_state {
    codec_model model;
    discriminator_bank disc;
    train_config tcfg;
    adam_state opt_gen;
    adam_state opt_disc;
    rng train_rng;           // quantizer dropout + dead-code reseed draws
    int64_t step = 0;
    int64_t sample_cursor = 0;
    std::shared_ptr<semantic_teacher> teacher;
    uint64_t teacher_hash = 0;
    std::vector<std::string> wav_files; // sorted, for wav_dir
    pcm_buffer clip;                    // for single_clip

    static train_state init(const validated_config & cfg, const train_config & tcfg);
};

// one optimization step: generator update, discriminator update (past the
// adversarial warmup), EMA codebook maintenance, optional dead-code reseed
loss_report train_step(train_state & st, const std::vector<pcm_buffer> & batch);

std::vector<pcm_buffer> next_batch(train_state & st);

// trains on one clip only; returns the per-step multiscale mel loss
std::vector<double> overfit_single_clip(train_state & st, const pcm_buffer & clip, int64_t steps);

void train_save(const std::string & path, const train_state & st);
train_state train_load(const std::string & path);

// full CLI loop; log_line receives each report line
void train_run(train_state & st, const std::string & out_dir,
               const std::function<void(const std::string &)> & log_line);

} // namespace omnicodec
