#pragma once

#include "omnicodec/types.hpp"

#include <string>

namespace omnicodec {

// 24-byte little-endian header (magic "OMNC", version u16, flags u16,
// sample_rate u32, hop u32, streams u16, bits u8, reserved u8,
// frame_count u32), then row-major u16 tokens (0xFFFF = inactive)
struct token_file_header {
    uint16_t flags = 0; // bit0 = has_semantic
    uint32_t sample_rate = 0;
    uint32_t hop = 0;
    uint16_t streams = 0;
    uint8_t bits_per_code = 0;
    uint64_t frame_count = 0;

    double frame_rate_hz() const { return hop ? double(sample_rate) / double(hop) : 0.0; }
};

constexpr uint16_t token_file_version = 1;

std::string write_tokens(const token_matrix & m, const token_file_header & h);
token_matrix read_tokens(const std::string & bytes, token_file_header & h_out);

void write_tokens_file(const std::string & path, const token_matrix & m, const token_file_header & h);
token_matrix read_tokens_file(const std::string & path, token_file_header & h_out);

} // namespace omnicodec
