#include "omnicodec/token_io.hpp"

#include "omnicodec/errors.hpp"

#include <cstring>
#include <fstream>

namespace omnicodec {

namespace {

void wr_u16(std::string & s, uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
}
void wr_u32(std::string & s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
uint16_t rd_u16(const unsigned char * p) { return uint16_t(p[0] | p[1] << 8); }
uint32_t rd_u32(const unsigned char * p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

} // namespace

std::string write_tokens(const token_matrix & m, const token_file_header & h) {
    if (uint64_t(m.frames) > 0xFFFFFFFFull)
        fail(err::token_out_of_range, "frame count exceeds the u32 header field");
    const int64_t limit = int64_t(1) << h.bits_per_code;
    std::string out;
    out.reserve(size_t(24 + 2 * m.frames * m.streams));
    out.append("OMNC");
    wr_u16(out, token_file_version);
    wr_u16(out, h.flags);
    wr_u32(out, h.sample_rate);
    wr_u32(out, h.hop);
    wr_u16(out, h.streams);
    out.push_back(char(h.bits_per_code));
    out.push_back(char(0)); // reserved
    wr_u32(out, uint32_t(m.frames));
    for (int32_t tok : m.v) {
        if (tok == token_inactive) {
            wr_u16(out, 0xFFFF);
            continue;
        }
        if (tok < 0 || tok >= limit || tok >= 0xFFFF)
            fail(err::token_out_of_range, "token " + std::to_string(tok) + " exceeds " +
                 std::to_string(h.bits_per_code) + "-bit range");
        wr_u16(out, uint16_t(tok));
    }
    return out;
}

token_matrix read_tokens(const std::string & bytes, token_file_header & h) {
    if (bytes.size() < 24) fail(err::truncated_payload, "token stream shorter than header");
    const auto * p = reinterpret_cast<const unsigned char *>(bytes.data());
    if (std::memcmp(p, "OMNC", 4) != 0) fail(err::bad_magic, "token stream magic is not OMNC");
    const uint16_t version = rd_u16(p + 4);
    if (version != token_file_version)
        fail(err::unsupported_version, "token stream version " + std::to_string(version));
    h.flags = rd_u16(p + 6);
    h.sample_rate = rd_u32(p + 8);
    h.hop = rd_u32(p + 12);
    h.streams = rd_u16(p + 16);
    h.bits_per_code = p[18];
    h.frame_count = rd_u32(p + 20);

    const uint64_t expected = 24 + 2 * h.frame_count * h.streams;
    if (bytes.size() < expected)
        fail(err::truncated_payload, "token payload is " + std::to_string(bytes.size() - 24) +
             " bytes, header declares " + std::to_string(expected - 24));
    if (bytes.size() > expected)
        fail(err::truncated_payload, "trailing bytes after declared payload");

    token_matrix m(int64_t(h.frame_count), int64_t(h.streams), (h.flags & 1) != 0);
    const int64_t limit = int64_t(1) << h.bits_per_code;
    for (int64_t i = 0; i < m.frames * m.streams; ++i) {
        const uint16_t raw = rd_u16(p + 24 + 2 * i);
        if (raw == 0xFFFF) {
            m.v[size_t(i)] = token_inactive;
        } else {
            if (raw >= limit)
                fail(err::token_out_of_range, "token " + std::to_string(raw) + " exceeds " +
                     std::to_string(h.bits_per_code) + "-bit range");
            m.v[size_t(i)] = raw;
        }
    }
    return m;
}

void write_tokens_file(const std::string & path, const token_matrix & m, const token_file_header & h) {
    const std::string bytes = write_tokens(m, h);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(err::io_error, "cannot write token file " + path);
    f.write(bytes.data(), std::streamsize(bytes.size()));
    if (!f) fail(err::io_error, "short write to " + path);
}

token_matrix read_tokens_file(const std::string & path, token_file_header & h) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(err::io_error, "cannot open token file " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return read_tokens(bytes, h);
}

} // namespace omnicodec
