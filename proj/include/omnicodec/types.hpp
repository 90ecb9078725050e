#pragma once

#include <cstdint>
#include <vector>

namespace omnicodec {

// mono floating-point audio; input and output of the whole pipeline
struct pcm_buffer {
    std::vector<float> samples;
    int sample_rate_hz = 0;

    int64_t size() const { return int64_t(samples.size()); }
    double seconds() const { return sample_rate_hz > 0 ? double(samples.size()) / sample_rate_hz : 0.0; }
};

// [frames x dim] feature matrix at a declared frame rate; the currency
// between encoder, quantizers and decoder
struct latent_sequence {
    int64_t frames = 0;
    int64_t dim = 0;
    double frame_rate_hz = 0.0;
    std::vector<float> data; // row-major

    latent_sequence() = default;
    latent_sequence(int64_t f, int64_t d, double rate)
        : frames(f), dim(d), frame_rate_hz(rate), data(size_t(f * d), 0.0f) {}

    float * row(int64_t f) { return data.data() + f * dim; }
    const float * row(int64_t f) const { return data.data() + f * dim; }
};

// reserved in-memory marker for "stage inactive"; serialized as 0xFFFF
constexpr int32_t token_inactive = -1;

// [frames x streams] integer code indices; stream 0 is semantic when
// has_semantic is set
struct token_matrix {
    int64_t frames = 0;
    int64_t streams = 0;
    bool has_semantic = false;
    std::vector<int32_t> v; // row-major

    token_matrix() = default;
    token_matrix(int64_t f, int64_t s, bool sem)
        : frames(f), streams(s), has_semantic(sem), v(size_t(f * s), token_inactive) {}

    int32_t & at(int64_t f, int64_t s) { return v[size_t(f * streams + s)]; }
    int32_t at(int64_t f, int64_t s) const { return v[size_t(f * streams + s)]; }
};

} // namespace omnicodec
