#pragma once

#include <stdexcept>
#include <string>

namespace omnicodec {

enum class err {
    // config
    non_integer_hop,
    parse_error,
    // nn graph / shapes
    sample_rate_mismatch,
    dim_mismatch,
    shape_mismatch,
    length_mismatch,
    frame_misalignment,
    // quantize
    invalid_stage_count,
    not_in_training_mode,
    empty_batch,
    // losses / train
    non_finite_loss,
    clip_too_short,
    // io / formats
    io_error,
    version_mismatch,
    config_hash_mismatch,
    bad_magic,
    unsupported_version,
    truncated_payload,
    token_out_of_range,
    unsupported_wav_encoding,
    // eval
    insufficient_streams,
    empty_corpus,
    // cli
    usage_error,
};

const char * err_name(err e);

// process exit code contract: 0 ok, 1 usage, 2 i/o, 3 data/format, 4 numeric
int err_exit_code(err e);

class error : public std::runtime_error {
  public:
    error(err code, const std::string & msg)
        : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}

    err code() const { return code_; }

  private:
    err code_;
};

[[noreturn]] inline void fail(err code, const std::string & msg) { throw error(code, msg); }

} // namespace omnicodec
