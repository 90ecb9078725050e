#pragma once

#include "omnicodec/config.hpp"
#include "omnicodec/graph.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/quantize.hpp"
#include "omnicodec/tensor.hpp"
#include "omnicodec/types.hpp"

#include <memory>
#include <string>

namespace omnicodec {

// causal rational resampler (windowed-sinc polyphase); output sample n is a
// function of inputs <= floor(n*M/L) only, so the token path stays causal
class polyphase_resampler {
  public:
    polyphase_resampler(int in_rate_hz, int out_rate_hz);
    void reset();
    std::vector<float> process(const float * x, int64_t n);
    int64_t expected_out(int64_t total_in) const;

  private:
    int up_ = 1, down_ = 1, taps_ = 1;
    std::vector<double> h_;
    std::vector<float> buf_;
    int64_t buf_start_ = 0; // absolute input index of buf_[0]
    int64_t in_count_ = 0;
    int64_t out_count_ = 0;
};

// frozen feature extractor: consumes audio at the teacher rate, emits
// 12.5 Hz rows of dim() features; outputs must be deterministic per input
class semantic_teacher {
  public:
    virtual ~semantic_teacher() = default;
    virtual int64_t dim() const = 0;
    virtual std::vector<float> process(const float * samples, int64_t n) = 0;
    virtual void reset() = 0;
    virtual uint64_t param_hash() const = 0;
};

// 80-bin log-mel frontend (25 ms window, 10 ms hop, 8-frame average pool
// -> 12.5 Hz) followed by a frozen seed-fixed linear map to out_dim
class desk_teacher : public semantic_teacher {
  public:
    desk_teacher(int sample_rate_hz, int64_t out_dim);
    int64_t dim() const override { return out_dim_; }
    std::vector<float> process(const float * samples, int64_t n) override;
    void reset() override;
    uint64_t param_hash() const override;

  private:
    int sr_, win_, hop_, nfft_;
    int64_t out_dim_;
    std::vector<double> mel_bank_;
    std::vector<float> proj_; // [80 x out_dim]
    kern::fft_plan plan_;
    std::vector<float> sbuf_;
    int64_t buf_start_ = 0;
    int64_t in_count_ = 0;
    int64_t next_mel_ = 0;
    std::vector<double> pool_acc_;
    int pool_fill_ = 0;
};

// serves precomputed per-utterance features (the external-teacher exchange)
class file_teacher : public semantic_teacher {
  public:
    file_teacher(const std::string & path, int64_t samples_per_frame);
    int64_t dim() const override { return feats_.dim; }
    std::vector<float> process(const float * samples, int64_t n) override;
    void reset() override { cursor_ = 0; in_count_ = 0; }
    uint64_t param_hash() const override;

  private:
    latent_sequence feats_;
    int64_t spf_ = 1;
    int64_t cursor_ = 0;
    int64_t in_count_ = 0;
};

// feature matrix exchange file: magic "OMFT", u16 version=1, u16 reserved,
// u32 dim, u64 frames, then row-major little-endian f32
void write_feature_file(const std::string & path, const latent_sequence & feats);
latent_sequence read_feature_file(const std::string & path);

// per-frame vector quantization of teacher output against the semantic codebook
struct semantic_quant {
    std::vector<int32_t> tokens;
    latent_sequence s_q;
};
semantic_quant semantic_quantize(const latent_sequence & teacher_out, const codebook & cb);

// mean over frames and dims of (s_q - teacher_out)^2
double semantic_recon_loss(const latent_sequence & s_q, const latent_sequence & teacher_out);

// adapter: learned linear (1024 -> hidden) or, for the no-adapter ablation,
// a fixed slice/zero-pad embedding with no parameters
struct adapter_map {
    const param_store * ps = nullptr; // non-null when learned
    int64_t in_dim = 0;
    int64_t out_dim = 0;

    latent_sequence apply(const latent_sequence & s_q) const;
    var apply_train(const var & s_q) const;
};

adapter_map make_adapter(const param_store & ps, const validated_config & cfg);

// average-pool teacher-rate rows down to the codec frame rate
latent_sequence pool_rows(const latent_sequence & x, int factor);

// a - adapted(s_q); frames aligned by truncation, >1 frame apart is an error
latent_sequence decouple_subtract(const latent_sequence & acoustic_hidden,
                                  const latent_sequence & adapted_sq);
// a_q + adapted(s_q)
latent_sequence decouple_recombine(const latent_sequence & a_q,
                                   const latent_sequence & adapted_sq);

} // namespace omnicodec
