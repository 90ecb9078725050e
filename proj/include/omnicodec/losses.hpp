#pragma once

#include "omnicodec/config.hpp"
#include "omnicodec/graph.hpp"
#include "omnicodec/tensor.hpp"

#include <optional>
#include <string>

namespace omnicodec {

// multiscale mel reconstruction: windows 2^6..2^11, hop = win/4, 64 mel
// bins; per scale L1(mel) + MSE(log(mel+1e-5)), averaged over scales.
// lengths are truncated to the shorter signal; a gap > max_mismatch errors.
var multiscale_mel_loss(const var & x, const var & x_hat, int sample_rate_hz,
                        int64_t max_mismatch);

// mean over frames, sum over dims of ||sg(h_e) - h_q||^2; gradient reaches
// the h_q path only
var self_guidance_loss(const var & h_e, const var & h_q);

// multi-scale STFT discriminator: per window a small strided 2-d conv stack
// over magnitude spectrograms; final layer zero-initialized so an untrained
// bank scores D = 0 everywhere
struct discriminator_bank {
    std::vector<int> windows{512, 1024, 2048};
    int channels = 16;
    param_store params;
};

discriminator_bank init_discriminator(uint64_t seed);

struct disc_out {
    var logits;
    std::vector<var> feats;
};

// detach_params freezes the bank's weights inside this pass so generator
// losses reach generator parameters only
disc_out discriminator_forward(const discriminator_bank & bank, int window, const var & audio,
                               bool detach_params);

struct adv_losses {
    var dis; // hinge, real + fake
    var gen; // -mean D(x_hat)
    var fm;  // normalized L1 feature matching
};

adv_losses adversarial_losses(const discriminator_bank & bank, const var & x, const var & x_hat);

// the seven loss terms; absent entries are disabled branches
struct loss_parts {
    var ac_recon;
    var se_recon;
    var commit;
    var self_guidance;
    var gen;
    var fm;
    var dis;
};

struct loss_totals {
    var generator_total;
    var discriminator_total;
};

// weighted combination; throws NonFiniteLoss naming the offending term
loss_totals total_loss(const loss_parts & parts, const loss_weights & w);

} // namespace omnicodec
