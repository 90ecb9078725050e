#include "omnicodec/checkpoint.hpp"

#include "omnicodec/errors.hpp"

#include <cstring>
#include <fstream>

namespace omnicodec {

namespace {

template <typename T>
void wr(std::string & s, T v) {
    for (size_t i = 0; i < sizeof(T); ++i) s.push_back(char((uint64_t(v) >> (8 * i)) & 0xff));
}

template <typename T>
T rd(const unsigned char * p) {
    uint64_t v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= uint64_t(p[i]) << (8 * i);
    T out;
    std::memcpy(&out, &v, sizeof(T));
    return out;
}

void wr_f32(std::string & s, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    wr(s, u);
}
void wr_f64(std::string & s, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    wr(s, u);
}

} // namespace

void checkpoint::put_f32(const std::string & name, std::vector<int64_t> shape, std::vector<float> data) {
    ckpt_tensor t;
    t.type = ckpt_tensor::dtype::f32;
    t.shape = std::move(shape);
    t.f32v = std::move(data);
    tensors[name] = std::move(t);
}

void checkpoint::put_f64(const std::string & name, std::vector<int64_t> shape, std::vector<double> data) {
    ckpt_tensor t;
    t.type = ckpt_tensor::dtype::f64;
    t.shape = std::move(shape);
    t.f64v = std::move(data);
    tensors[name] = std::move(t);
}

void checkpoint::put_u64(const std::string & name, std::vector<uint64_t> data) {
    ckpt_tensor t;
    t.type = ckpt_tensor::dtype::u64;
    t.shape = {int64_t(data.size())};
    t.u64v = std::move(data);
    tensors[name] = std::move(t);
}

void checkpoint::put_i64(const std::string & name, std::vector<int64_t> data) {
    ckpt_tensor t;
    t.type = ckpt_tensor::dtype::i64;
    t.shape = {int64_t(data.size())};
    t.i64v = std::move(data);
    tensors[name] = std::move(t);
}

const ckpt_tensor & checkpoint::get(const std::string & name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail(err::truncated_payload, "checkpoint tensor missing: " + name);
    return it->second;
}

void checkpoint_save(const std::string & path, const checkpoint & ck) {
    std::string s;
    s.append("OMCK");
    wr<uint16_t>(s, checkpoint_version);
    wr<uint16_t>(s, 0); // flags
    wr<uint64_t>(s, ck.config_hash);
    wr<uint32_t>(s, uint32_t(ck.config_text.size()));
    s.append(ck.config_text);
    wr<uint32_t>(s, uint32_t(ck.tensors.size()));
    for (const auto & [name, t] : ck.tensors) {
        wr<uint16_t>(s, uint16_t(name.size()));
        s.append(name);
        s.push_back(char(t.type));
        s.push_back(char(t.shape.size()));
        for (int64_t d : t.shape) wr<int64_t>(s, d);
        switch (t.type) {
            case ckpt_tensor::dtype::f32:
                for (float v : t.f32v) wr_f32(s, v);
                break;
            case ckpt_tensor::dtype::f64:
                for (double v : t.f64v) wr_f64(s, v);
                break;
            case ckpt_tensor::dtype::u64:
                for (uint64_t v : t.u64v) wr<uint64_t>(s, v);
                break;
            case ckpt_tensor::dtype::i64:
                for (int64_t v : t.i64v) wr<int64_t>(s, v);
                break;
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(err::io_error, "cannot write checkpoint " + path);
    f.write(s.data(), std::streamsize(s.size()));
    if (!f) fail(err::io_error, "short write to " + path);
}

checkpoint checkpoint_load(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(err::io_error, "cannot open checkpoint " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const auto * p = reinterpret_cast<const unsigned char *>(bytes.data());
    size_t off = 0;
    auto need = [&](size_t n) {
        if (off + n > bytes.size()) fail(err::truncated_payload, "checkpoint truncated at byte " + std::to_string(off));
    };
    need(8);
    if (std::memcmp(p, "OMCK", 4) != 0) fail(err::bad_magic, path + " is not a checkpoint (magic != OMCK)");
    off = 4;
    const uint16_t version = rd<uint16_t>(p + off);
    off += 4; // version + flags
    if (version != checkpoint_version)
        fail(err::version_mismatch, "checkpoint version " + std::to_string(version) +
             ", expected " + std::to_string(checkpoint_version));
    checkpoint ck;
    need(12);
    ck.config_hash = rd<uint64_t>(p + off);
    off += 8;
    const uint32_t cfg_len = rd<uint32_t>(p + off);
    off += 4;
    need(cfg_len);
    ck.config_text.assign(bytes, off, cfg_len);
    off += cfg_len;
    need(4);
    const uint32_t n_tensors = rd<uint32_t>(p + off);
    off += 4;
    for (uint32_t i = 0; i < n_tensors; ++i) {
        need(2);
        const uint16_t name_len = rd<uint16_t>(p + off);
        off += 2;
        need(name_len + 2u);
        std::string name(bytes, off, name_len);
        off += name_len;
        ckpt_tensor t;
        t.type = ckpt_tensor::dtype(p[off]);
        const uint8_t ndim = p[off + 1];
        off += 2;
        need(size_t(ndim) * 8);
        t.shape.resize(ndim);
        for (uint8_t d = 0; d < ndim; ++d) {
            t.shape[d] = rd<int64_t>(p + off);
            off += 8;
        }
        const int64_t n = t.numel();
        switch (t.type) {
            case ckpt_tensor::dtype::f32: {
                need(size_t(n) * 4);
                t.f32v.resize(size_t(n));
                for (int64_t j = 0; j < n; ++j) {
                    const uint32_t u = rd<uint32_t>(p + off);
                    std::memcpy(&t.f32v[size_t(j)], &u, 4);
                    off += 4;
                }
                break;
            }
            case ckpt_tensor::dtype::f64: {
                need(size_t(n) * 8);
                t.f64v.resize(size_t(n));
                for (int64_t j = 0; j < n; ++j) {
                    const uint64_t u = rd<uint64_t>(p + off);
                    std::memcpy(&t.f64v[size_t(j)], &u, 8);
                    off += 8;
                }
                break;
            }
            case ckpt_tensor::dtype::u64: {
                need(size_t(n) * 8);
                t.u64v.resize(size_t(n));
                for (int64_t j = 0; j < n; ++j) {
                    t.u64v[size_t(j)] = rd<uint64_t>(p + off);
                    off += 8;
                }
                break;
            }
            case ckpt_tensor::dtype::i64: {
                need(size_t(n) * 8);
                t.i64v.resize(size_t(n));
                for (int64_t j = 0; j < n; ++j) {
                    t.i64v[size_t(j)] = rd<int64_t>(p + off);
                    off += 8;
                }
                break;
            }
            default:
                fail(err::unsupported_version, "unknown tensor dtype in checkpoint");
        }
        ck.tensors[name] = std::move(t);
    }
    if (off != bytes.size()) fail(err::truncated_payload, "trailing bytes in checkpoint");
    return ck;
}

bool is_checkpoint_file(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return false;
    char magic[4] = {};
    f.read(magic, 4);
    return f.gcount() == 4 && std::memcmp(magic, "OMCK", 4) == 0;
}

} // namespace omnicodec
