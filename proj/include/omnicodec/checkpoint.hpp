#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace omnicodec {

// named-tensor container: magic "OMCK", version, config hash, embedded
// canonical config text, then tensors sorted by name. graph weights are
// f32 (row-major, little-endian); quantizer EMA state is f64; counters and
// rng words are u64/i64.
struct ckpt_tensor {
    enum class dtype : uint8_t { f32 = 0, f64 = 1, u64 = 2, i64 = 3 };
    dtype type = dtype::f32;
    std::vector<int64_t> shape;
    std::vector<float> f32v;
    std::vector<double> f64v;
    std::vector<uint64_t> u64v;
    std::vector<int64_t> i64v;

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
};

struct checkpoint {
    uint64_t config_hash = 0;
    std::string config_text;
    std::map<std::string, ckpt_tensor> tensors; // sorted by name

    void put_f32(const std::string & name, std::vector<int64_t> shape, std::vector<float> data);
    void put_f64(const std::string & name, std::vector<int64_t> shape, std::vector<double> data);
    void put_u64(const std::string & name, std::vector<uint64_t> data);
    void put_i64(const std::string & name, std::vector<int64_t> data);

    const ckpt_tensor & get(const std::string & name) const;
    bool has(const std::string & name) const { return tensors.count(name) != 0; }
};

constexpr uint16_t checkpoint_version = 1;

void checkpoint_save(const std::string & path, const checkpoint & ck);
checkpoint checkpoint_load(const std::string & path);
bool is_checkpoint_file(const std::string & path); // peeks at the magic

} // namespace omnicodec
