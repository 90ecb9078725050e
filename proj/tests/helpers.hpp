#pragma once

#include "omnicodec/config.hpp"
#include "omnicodec/rng.hpp"
#include "omnicodec/tensor.hpp"
#include "omnicodec/types.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

namespace testutil {

// tiny 12.5 Hz codec config: full hop (1920 @ 24 kHz) but narrow layers
inline omnicodec::codec_config tiny_codec(int64_t seed = 1) {
    omnicodec::codec_config c;
    c.sample_rate_hz = 24000;
    c.seanet_ratios = {8, 6, 5, 4};
    c.extra_downsample = 2;
    c.base_channels = 2;
    c.hidden_dim = 16;
    c.transformer_layers = 1;
    c.transformer_heads = 2;
    c.transformer_ff_dim = 32;
    c.semantic_codebook_size = 32;
    c.semantic_dim = 24;
    c.acoustic_stages = 4;
    c.acoustic_codebook_size = 32;
    c.acoustic_code_dim = 8;
    c.quantizer_dropout = false;
    c.seed = seed;
    return c;
}

inline omnicodec::pcm_buffer sine_clip(int sample_rate_hz, double seconds, double freq_hz,
                                       double amp = 0.5) {
    omnicodec::pcm_buffer out;
    out.sample_rate_hz = sample_rate_hz;
    const int64_t n = int64_t(seconds * sample_rate_hz);
    out.samples.resize(size_t(n));
    for (int64_t i = 0; i < n; ++i)
        out.samples[size_t(i)] = float(amp * std::sin(2.0 * M_PI * freq_hz * double(i) / sample_rate_hz));
    return out;
}

inline omnicodec::pcm_buffer noise_clip(int sample_rate_hz, double seconds, uint64_t seed,
                                        double amp = 0.5) {
    omnicodec::pcm_buffer out;
    out.sample_rate_hz = sample_rate_hz;
    omnicodec::rng r(seed);
    const int64_t n = int64_t(seconds * sample_rate_hz);
    out.samples.resize(size_t(n));
    for (auto & v : out.samples) v = float(r.next_uniform(-amp, amp));
    return out;
}

// central finite difference of a scalar function of one weight entry
inline double fd_slope(const std::function<double(double)> & f, double x0, double h) {
    return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

// richardson-extrapolated central difference: cancels the O(h^2) term, so a
// larger h can be used to beat float32 forward-evaluation noise
inline double fd_slope_rich(const std::function<double(double)> & f, double x0, double h) {
    const double d1 = fd_slope(f, x0, h);
    const double d2 = fd_slope(f, x0, h / 2.0);
    return (4.0 * d2 - d1) / 3.0;
}

inline double rel_err(double got, double want, double floor_v = 1e-3) {
    return std::abs(got - want) / std::max(std::abs(want), floor_v);
}

inline std::string temp_path(const std::string & name) {
    return std::string("/tmp/omnicodec_test_") + name;
}

} // namespace testutil
