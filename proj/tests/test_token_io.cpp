#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "omnicodec/errors.hpp"
#include "omnicodec/semantic.hpp"
#include "omnicodec/token_io.hpp"
#include "omnicodec/wav.hpp"

#include <cstdio>

using namespace omnicodec;

namespace {

token_file_header header_for(int64_t frames, uint16_t streams, bool semantic) {
    token_file_header h;
    h.flags = semantic ? 1 : 0;
    h.sample_rate = 24000;
    h.hop = 1920;
    h.streams = streams;
    h.bits_per_code = 11;
    h.frame_count = uint64_t(frames);
    return h;
}

token_matrix random_tokens(int64_t frames, int64_t streams, bool semantic, rng & r) {
    token_matrix m(frames, streams, semantic);
    for (auto & v : m.v) v = int32_t(r.next_int(0, 2047));
    return m;
}

} // namespace

TEST_CASE("zero frames serialize to a header-only 24-byte stream") {
    token_matrix m(0, 17, true);
    std::string bytes = write_tokens(m, header_for(0, 17, true));
    CHECK(bytes.size() == 24);
    CHECK(bytes.substr(0, 4) == "OMNC");
}

TEST_CASE("1 frame x 17 streams is 58 bytes") {
    token_matrix m(1, 17, true);
    std::string bytes = write_tokens(m, header_for(1, 17, true));
    CHECK(bytes.size() == 24 + 34);
}

TEST_CASE("write then read is the identity on random matrices") {
    rng r(31);
    for (int trial = 0; trial < 100; ++trial) {
        const int64_t frames = r.next_int(0, 12);
        const int64_t streams = r.next_int(1, 9);
        const bool semantic = r.next_int(0, 1) == 1;
        token_matrix m = random_tokens(frames, streams, semantic, r);
        if (frames > 0 && r.next_int(0, 1) == 1) m.at(frames - 1, streams - 1) = token_inactive;
        std::string bytes = write_tokens(m, header_for(frames, uint16_t(streams), semantic));
        token_file_header h;
        token_matrix back = read_tokens(bytes, h);
        CHECK(back.frames == m.frames);
        CHECK(back.streams == m.streams);
        CHECK(back.has_semantic == m.has_semantic);
        CHECK(back.v == m.v);
    }
}

TEST_CASE("corrupted headers produce the named errors") {
    rng r(32);
    token_matrix m = random_tokens(3, 4, false, r);
    std::string bytes = write_tokens(m, header_for(3, 4, false));
    token_file_header h;

    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(read_tokens(bad, h), doctest::Contains("BadMagic"), error);

    bad = bytes;
    bad[4] = 9; // version
    CHECK_THROWS_WITH_AS(read_tokens(bad, h), doctest::Contains("UnsupportedVersion"), error);

    bad = bytes.substr(0, bytes.size() - 2); // one token short
    CHECK_THROWS_WITH_AS(read_tokens(bad, h), doctest::Contains("TruncatedPayload"), error);

    bad = bytes;
    bad[24] = char(0xFE); // 0x?FE with high byte below sets token 0x0bFE.. craft > 2^11
    bad[25] = char(0x7F); // 0x7FFE > 2047 and != 0xFFFF
    CHECK_THROWS_WITH_AS(read_tokens(bad, h), doctest::Contains("TokenOutOfRange"), error);
}

TEST_CASE("out-of-range tokens refuse to serialize") {
    token_matrix m(1, 1, false);
    m.at(0, 0) = 5000; // > 2^11
    CHECK_THROWS_WITH_AS(write_tokens(m, header_for(1, 1, false)),
                         doctest::Contains("TokenOutOfRange"), error);
}

TEST_CASE("wav roundtrip of a full-scale ramp stays within one lsb") {
    pcm_buffer x;
    x.sample_rate_hz = 24000;
    const int n = 4001;
    for (int i = 0; i < n; ++i) x.samples.push_back(float(-1.0 + 2.0 * double(i) / (n - 1)));
    const std::string path = testutil::temp_path("ramp.wav");
    wav_write(path, x);
    pcm_buffer y = wav_read(path);
    REQUIRE(y.size() == x.size());
    CHECK(y.sample_rate_hz == 24000);
    for (int i = 0; i < n; ++i)
        CHECK(std::abs(double(y.samples[size_t(i)]) - double(x.samples[size_t(i)])) <= 1.0 / 32768.0);
    std::remove(path.c_str());
}

TEST_CASE("empty wav buffers roundtrip") {
    pcm_buffer x;
    x.sample_rate_hz = 16000;
    const std::string path = testutil::temp_path("empty.wav");
    wav_write(path, x);
    pcm_buffer y = wav_read(path);
    CHECK(y.size() == 0);
    CHECK(y.sample_rate_hz == 16000);
    std::remove(path.c_str());
}

TEST_CASE("24-bit wav input is rejected as UnsupportedWavEncoding") {
    // hand-build a 24-bit PCM header
    std::string s;
    auto w32 = [&s](uint32_t v) { for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff)); };
    auto w16 = [&s](uint16_t v) { s.push_back(char(v & 0xff)); s.push_back(char(v >> 8)); };
    s.append("RIFF");
    w32(36);
    s.append("WAVE");
    s.append("fmt ");
    w32(16);
    w16(1);
    w16(1);
    w32(24000);
    w32(24000 * 3);
    w16(3);
    w16(24);
    s.append("data");
    w32(0);
    const std::string path = testutil::temp_path("bad24.wav");
    {
        std::FILE * f = std::fopen(path.c_str(), "wb");
        std::fwrite(s.data(), 1, s.size(), f);
        std::fclose(f);
    }
    CHECK_THROWS_WITH_AS(wav_read(path), doctest::Contains("UnsupportedWavEncoding"), error);
    std::remove(path.c_str());
}

TEST_CASE("stereo wav reads as the mono average") {
    std::string s;
    auto w32 = [&s](uint32_t v) { for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff)); };
    auto w16 = [&s](uint16_t v) { s.push_back(char(v & 0xff)); s.push_back(char(v >> 8)); };
    s.append("RIFF");
    w32(36 + 8);
    s.append("WAVE");
    s.append("fmt ");
    w32(16);
    w16(1);
    w16(2);
    w32(24000);
    w32(24000 * 4);
    w16(4);
    w16(16);
    s.append("data");
    w32(8);
    w16(uint16_t(int16_t(16384)));  // L = 0.5
    w16(uint16_t(int16_t(-16384))); // R = -0.5
    w16(uint16_t(int16_t(8192)));
    w16(uint16_t(int16_t(8192)));
    const std::string path = testutil::temp_path("stereo.wav");
    {
        std::FILE * f = std::fopen(path.c_str(), "wb");
        std::fwrite(s.data(), 1, s.size(), f);
        std::fclose(f);
    }
    pcm_buffer y = wav_read(path);
    REQUIRE(y.size() == 2);
    CHECK(y.samples[0] == doctest::Approx(0.0));
    CHECK(y.samples[1] == doctest::Approx(0.25));
    std::remove(path.c_str());
}

TEST_CASE("feature exchange files roundtrip") {
    rng r(33);
    latent_sequence f(5, 7, 12.5);
    for (auto & v : f.data) v = float(r.next_uniform(-2.0, 2.0));
    const std::string path = testutil::temp_path("feats.omft");
    write_feature_file(path, f);
    latent_sequence back = read_feature_file(path);
    CHECK(back.frames == 5);
    CHECK(back.dim == 7);
    CHECK(back.data == f.data);
    std::remove(path.c_str());
}
