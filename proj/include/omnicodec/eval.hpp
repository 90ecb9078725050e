#pragma once

#include "omnicodec/quantize.hpp"
#include "omnicodec/session.hpp"
#include "omnicodec/types.hpp"

#include <string>
#include <vector>

namespace omnicodec {

// log-mel spectrogram for the objective metrics: window 1024, hop 256,
// 80 bins, natural log with eps 1e-5; frames x 80, double precision
std::vector<double> eval_log_mel(const pcm_buffer & x, int64_t & frames_out);

// mean L1 distance between log-mel spectrograms (lengths truncated to min)
double mel_distance(const pcm_buffer & x, const pcm_buffer & y);

// frame-aligned mel-cepstral distance in dB over DCT-II coefficients 1..13
double mcd_db(const pcm_buffer & x, const pcm_buffer & y);
// cepstral core, exposed for exact closed-form checks
double mcd_from_logmel(const std::vector<double> & a, const std::vector<double> & b,
                       int64_t frames, int64_t bins);
// unnormalized DCT-II of one row
void dct2_row(const double * x, int64_t n, double * out);

// ---- token language-model perplexity ----

struct token_lm_config {
    int layers = 4;
    int dim = 256;
    int heads = 4;
    int ff_dim = 1024;
    int context = 256; // frames
    int64_t train_steps = 200;
    double lr = 3e-3;
    uint64_t seed = 0;
};

enum class ppl_mode { ppl0, ppl_mean_8 };

// trains a decoder-only LM on one stream and reports eval perplexity
double token_stream_ppl(const std::vector<int32_t> & train_tokens,
                        const std::vector<int32_t> & eval_tokens, int64_t vocab,
                        const token_lm_config & cfg);

// ppl0: first stream (semantic when present); ppl_mean_8: mean over the
// first 8 acoustic streams, each with its own unconditional LM
double token_ppl(const std::vector<token_matrix> & train_corpus,
                 const std::vector<token_matrix> & eval_corpus, int64_t vocab, ppl_mode mode,
                 const token_lm_config & cfg);

// ---- reconstruction evaluation over a wav directory ----

struct eval_file_result {
    std::string path;
    double mel_distance = 0.0;
    double mcd = 0.0;
    double seconds = 0.0;
};

struct eval_recon_report {
    std::vector<eval_file_result> files;
    std::vector<std::string> skipped; // unreadable inputs
    double mean_mel_distance = 0.0;
    double mean_mcd = 0.0;
    utilization_report utilization;
    double nominal_bitrate_bps = 0.0;
    double on_disk_bitrate_bps = 0.0;

    std::string text() const;    // line-structured report
    std::string summary() const; // machine-readable key=value
};

eval_recon_report eval_recon(const codec_model & model, const std::string & wav_dir);

} // namespace omnicodec
