#pragma once

#include "omnicodec/checkpoint.hpp"
#include "omnicodec/config.hpp"
#include "omnicodec/tensor.hpp"
#include "omnicodec/types.hpp"

#include <deque>
#include <map>
#include <string>

namespace omnicodec {

// named learnable tensors, keyed by layer path; map order fixes the
// optimizer and serialization order
struct param_store {
    std::map<std::string, var> p;

    var add(const std::string & name, tensor init);
    const var & get(const std::string & name) const;
    bool has(const std::string & name) const { return p.count(name) != 0; }
    void zero_grads();
    int64_t param_count() const;
    void to_checkpoint(checkpoint & ck, const std::string & prefix) const;
    void from_checkpoint(const checkpoint & ck, const std::string & prefix);
};

// SEANet channel progression: base doubled per stage, capped at hidden_dim
std::vector<int> seanet_channels(const validated_config & cfg);

// deterministic init: uniform fan-in for convolutions, scaled normal for
// attention/ff projections; per-tensor substream keyed by name so the
// result is independent of creation order
param_store init_graph_params(const validated_config & cfg, uint64_t seed);

// ---- training-path forwards (autodiff) ----
// pcm [t,1] -> latents [t/hop, hidden]
var encoder_forward(const param_store & ps, const validated_config & cfg, const var & pcm);
// latents [f, hidden] -> pcm [f*hop, 1], tanh output
var decoder_forward(const param_store & ps, const validated_config & cfg, const var & lat);
// causal transformer, separate parameters per side ("tenc" / "tdec")
var transformer_forward(const param_store & ps, const validated_config & cfg, const var & x,
                        const std::string & side, int64_t pos_offset = 0);

// batch transformer_pass over plain values (inference path)
latent_sequence transformer_pass(const param_store & ps, const validated_config & cfg,
                                 const latent_sequence & x, const std::string & side);

// ---- streaming (stateful, plain float, bit-exact under any chunking) ----

struct stream_conv {
    const tensor * w = nullptr;
    const tensor * b = nullptr;
    int stride = 1, k = 1, cin = 1, cout = 1;
    std::vector<float> tail; // k - stride previous input rows

    void bind(const var & w_, const var & b_, int stride_);
    void reset();
    // t_in rows (t_in % stride == 0) -> t_in/stride rows
    std::vector<float> process(const float * in, int64_t t_in);
};

struct stream_convtr {
    const tensor * w = nullptr;
    const tensor * b = nullptr;
    int stride = 1, k = 1, cin = 1, cout = 1;
    std::deque<std::vector<float>> hist; // recent input frames
    int64_t next_frame = 0;

    void bind(const var & w_, const var & b_, int stride_);
    void reset();
    std::vector<float> process(const float * in, int64_t t_in); // -> t_in*stride rows
};

struct stream_transformer_layer {
    std::vector<float> kcache, vcache; // rows of dim
    int64_t frames = 0;
};

class stream_transformer {
  public:
    void bind(const param_store & ps, const validated_config & cfg, const std::string & side);
    void reset();
    // appends rows, returns transformed rows for the new frames only
    std::vector<float> process(const float * in, int64_t t_in);

  private:
    const param_store * ps_ = nullptr;
    const validated_config * cfg_ = nullptr;
    std::string side_;
    std::vector<stream_transformer_layer> layers_;
    int64_t pos_ = 0;
};

class stream_encoder {
  public:
    void bind(const param_store & ps, const validated_config & cfg);
    void reset();
    // consumes n*hop samples, emits n latent rows [hidden]
    std::vector<float> process(const float * samples, int64_t n_samples);

  private:
    const validated_config * cfg_ = nullptr;
    stream_conv conv_in_;
    struct stage { stream_conv res1, res2, down; };
    std::vector<stage> stages_;
    stream_conv extra_, conv_out_;
};

class stream_decoder {
  public:
    void bind(const param_store & ps, const validated_config & cfg);
    void reset();
    // consumes latent rows, emits frames*hop samples
    std::vector<float> process(const float * latents, int64_t frames);

  private:
    const validated_config * cfg_ = nullptr;
    stream_conv conv_in_, conv_out_;
    stream_convtr extra_;
    struct stage { stream_convtr up; stream_conv res1, res2; };
    std::vector<stage> stages_; // ordered top (coarse) -> bottom
};

} // namespace omnicodec
