#pragma once

#include "omnicodec/config.hpp"
#include "omnicodec/graph.hpp"
#include "omnicodec/quantize.hpp"
#include "omnicodec/semantic.hpp"
#include "omnicodec/token_io.hpp"
#include "omnicodec/types.hpp"

#include <deque>
#include <memory>
#include <string>

namespace omnicodec {

// everything a checkpoint carries: generator graph weights plus quantizer
// codebooks (with EMA statistics for training resumability)
struct codec_model {
    validated_config cfg;
    param_store gen;
    codebook semantic_cb;
    rvq_stack acoustic;
    bool data_seeded = false; // codebooks re-seeded from the first batch yet?

    static codec_model init(const validated_config & cfg);
};

void model_to_checkpoint(const codec_model & m, checkpoint & ck);
codec_model model_from_checkpoint(const checkpoint & ck);
void model_save(const std::string & path, const codec_model & m);
codec_model model_load(const std::string & path);

token_file_header make_token_header(const validated_config & cfg, int64_t frames);
// header fields incompatible with the model config -> ConfigHashMismatch
void check_token_header(const token_file_header & h, const validated_config & cfg);

// streaming pipeline: pcm -> tokens and tokens -> pcm with explicit state;
// any chunking of the input yields bit-identical output
class codec_session {
  public:
    codec_session(const codec_model & model, std::shared_ptr<semantic_teacher> teacher = nullptr);

    void reset();

    // consumes arbitrary sample counts; emits rows for every full hop
    token_matrix encode_chunk(const float * samples, int64_t n);
    // pads the pending partial hop with zeros and emits the final rows
    token_matrix encode_flush();

    token_matrix encode_all(const pcm_buffer & pcm, int64_t chunk_samples = 0);

    // tokens -> hop samples per frame
    std::vector<float> decode_chunk(const token_matrix & rows);
    pcm_buffer decode_all(const token_matrix & tokens);

    int64_t frames_emitted() const { return frames_emitted_; }

  private:
    token_matrix process_hops(const float * samples, int64_t n);

    const codec_model & m_;
    std::shared_ptr<semantic_teacher> teacher_;
    polyphase_resampler resampler_;
    stream_encoder enc_;
    stream_transformer tenc_, tdec_;
    stream_decoder dec_;
    std::vector<float> pending_;
    std::deque<std::vector<float>> teacher_rows_; // 12.5 Hz, pre-pooling
    adapter_map adapter_;
    int64_t frames_emitted_ = 0;
    bool flushed_ = false;
};

} // namespace omnicodec
