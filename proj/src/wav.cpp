#include "omnicodec/wav.hpp"

#include "omnicodec/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace omnicodec {

namespace {

uint32_t rd_u32(const unsigned char * p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const unsigned char * p) { return uint16_t(p[0] | p[1] << 8); }

void wr_u32(std::string & s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
void wr_u16(std::string & s, uint16_t v) {
    s.push_back(char(v & 0xff));
    s.push_back(char((v >> 8) & 0xff));
}

} // namespace

pcm_buffer wav_read(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(err::io_error, "cannot open wav file " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto * p = reinterpret_cast<const unsigned char *>(bytes.data());
    const size_t n = bytes.size();
    if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        fail(err::unsupported_wav_encoding, path + " is not a RIFF/WAVE file");

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    const unsigned char * data = nullptr;
    uint32_t data_len = 0;
    size_t off = 12;
    while (off + 8 <= n) {
        const char * tag = bytes.data() + off;
        const uint32_t len = rd_u32(p + off + 4);
        off += 8;
        if (off + len > n) fail(err::unsupported_wav_encoding, path + ": truncated chunk");
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (len < 16) fail(err::unsupported_wav_encoding, path + ": short fmt chunk");
            format = rd_u16(p + off);
            channels = rd_u16(p + off + 2);
            sample_rate = rd_u32(p + off + 4);
            bits = rd_u16(p + off + 14);
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = p + off;
            data_len = len;
        }
        off += len + (len & 1); // chunks are word-aligned
    }
    if (format == 0 || sample_rate == 0) fail(err::unsupported_wav_encoding, path + ": missing fmt chunk");
    if (channels != 1 && channels != 2)
        fail(err::unsupported_wav_encoding, path + ": only mono/stereo supported");
    const bool pcm16 = format == 1 && bits == 16;
    const bool f32 = format == 3 && bits == 32;
    if (!pcm16 && !f32)
        fail(err::unsupported_wav_encoding,
             path + ": unsupported encoding (format " + std::to_string(format) + ", " +
             std::to_string(bits) + "-bit); need 16-bit PCM or 32-bit float");

    pcm_buffer out;
    out.sample_rate_hz = int(sample_rate);
    const uint32_t bytes_per = (pcm16 ? 2u : 4u) * channels;
    const uint32_t frames = data ? data_len / bytes_per : 0;
    out.samples.resize(frames);
    for (uint32_t i = 0; i < frames; ++i) {
        float acc = 0.0f;
        for (uint16_t c = 0; c < channels; ++c) {
            const unsigned char * sp = data + size_t(i) * bytes_per + size_t(c) * (pcm16 ? 2 : 4);
            if (pcm16) {
                const int16_t s = int16_t(rd_u16(sp));
                acc += float(s) / 32768.0f;
            } else {
                float s;
                std::memcpy(&s, sp, 4);
                acc += s;
            }
        }
        out.samples[i] = acc / float(channels);
    }
    return out;
}

void wav_write(const std::string & path, const pcm_buffer & pcm) {
    std::string body;
    body.reserve(pcm.samples.size() * 2 + 64);
    const uint32_t data_len = uint32_t(pcm.samples.size() * 2);
    body.append("RIFF");
    wr_u32(body, 36 + data_len);
    body.append("WAVE");
    body.append("fmt ");
    wr_u32(body, 16);
    wr_u16(body, 1); // pcm
    wr_u16(body, 1); // mono
    wr_u32(body, uint32_t(pcm.sample_rate_hz));
    wr_u32(body, uint32_t(pcm.sample_rate_hz) * 2);
    wr_u16(body, 2);
    wr_u16(body, 16);
    body.append("data");
    wr_u32(body, data_len);
    for (float x : pcm.samples) {
        double s = double(x) * 32768.0;
        s = s >= 0 ? std::floor(s + 0.5) : std::ceil(s - 0.5); // round half away from zero
        if (s > 32767.0) s = 32767.0;
        if (s < -32768.0) s = -32768.0;
        wr_u16(body, uint16_t(int16_t(s)));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(err::io_error, "cannot write wav file " + path);
    f.write(body.data(), std::streamsize(body.size()));
    if (!f) fail(err::io_error, "short write to " + path);
}

} // namespace omnicodec
