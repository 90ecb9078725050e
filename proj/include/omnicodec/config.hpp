#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omnicodec {

struct loss_weights {
    float ac_recon      = 15.0f;
    float se_recon      = 1.0f;
    float commit        = 1.0f;
    float dis           = 1.0f;
    float gen           = 1.0f;
    float fm            = 1.0f;
    float self_guidance = 0.1f;
};

// every architectural hyperparameter; single source of truth for
// frame-rate / bitrate / hop-size arithmetic
struct codec_config {
    int sample_rate_hz         = 24000;
    int teacher_sample_rate_hz = 16000;
    std::vector<int> seanet_ratios{8, 6, 5, 4};
    int extra_downsample       = 2;
    int base_channels          = 16;   // first SEANet stage width, doubled per stage
    int hidden_dim             = 512;
    int transformer_layers     = 8;
    int transformer_heads      = 8;
    int transformer_ff_dim     = 2048;
    int semantic_codebook_size = 2048;
    int semantic_dim           = 1024;
    int acoustic_stages        = 31;
    int acoustic_codebook_size = 2048;
    int acoustic_code_dim      = 256;
    bool quantizer_dropout     = true;
    bool semantic_branch       = true;  // "w/o Semantic branch" ablation when false
    bool use_adapter           = true;  // "w/o Adapter-1" ablation when false
    bool self_guidance         = true;  // "w/o Self-guidance loss" ablation when false
    loss_weights weights;
    int64_t seed               = 0;
};

// codec_config plus derived fields; immutable after validate()
struct validated_config : codec_config {
    int hop                = 0;    // samples per frame
    double frame_rate_hz   = 0.0;
    int semantic_bits      = 0;    // ceil(log2(semantic_codebook_size))
    int acoustic_bits      = 0;
    int teacher_pool       = 1;    // 12.5 Hz teacher frames per codec frame
    uint64_t config_hash   = 0;

    int total_streams() const { return (semantic_branch ? 1 : 0) + acoustic_stages; }
};

struct train_config {
    int64_t steps          = 2000;
    int batch_size         = 4;
    double segment_seconds = 1.0;   // <= 10
    double lr_peak         = 1e-4;
    int64_t warmup_steps   = 2500;
    int64_t decay_steps    = 500000;
    int grad_accum         = 1;
    int64_t checkpoint_every = 1000;
    int64_t adv_start_step = 500;  // discriminator losses enter here
    bool ema_reseed        = true; // dead-code reseeding
    std::string data_source = "synthetic"; // synthetic | wav_dir | single_clip
};

validated_config validate(const codec_config & cfg);

// frame_rate * streams * bits; pure arithmetic, no rounding
double bitrate_bps(double frame_rate_hz, int total_streams, int bits_per_code);

int bits_per_code(int codebook_size);

struct config_file {
    codec_config codec;
    train_config train;
};

// flat key=value text, '#' comments; unknown keys warn on stderr;
// OMNICODEC_SEED env var overrides codec.seed (skipped for checkpoint-
// embedded canonical text via apply_env=false)
config_file load_config(const std::string & path);
config_file parse_config(const std::string & text, const std::string & origin,
                         bool apply_env = true);

// canonical key=value serialization (codec fields only); hashing input
std::string canonical_config_text(const codec_config & cfg);
// train_* keys; appended to checkpoints but never hashed
std::string canonical_train_text(const train_config & cfg);
uint64_t config_hash(const codec_config & cfg);

} // namespace omnicodec
