#include "omnicodec/semantic.hpp"

#include "omnicodec/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace omnicodec {

namespace {

constexpr uint64_t teacher_seed = 0x0a5eed7ea15ull; // fixed: the teacher never retrains

uint64_t fnv_bytes(const void * data, size_t n) {
    const auto * p = static_cast<const unsigned char *>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < n; ++i) { h ^= p[i]; h *= 0x100000001b3ull; }
    return h;
}

} // namespace

// ---- resampler ----

polyphase_resampler::polyphase_resampler(int in_rate_hz, int out_rate_hz) {
    const int g = int(std::gcd(in_rate_hz, out_rate_hz));
    up_ = out_rate_hz / g;
    down_ = in_rate_hz / g;
    if (up_ == 1 && down_ == 1) {
        taps_ = 1;
        h_ = {1.0};
        return;
    }
    // windowed sinc at the lower nyquist, blackman window, 24 zero crossings
    const int half_zc = 12;
    const int stretch = std::max(up_, down_);
    taps_ = 2 * half_zc * stretch + 1;
    h_.resize(size_t(taps_));
    const double fc = 0.5 / double(stretch);
    const int center = taps_ / 2;
    for (int i = 0; i < taps_; ++i) {
        const double t = double(i - center);
        const double s = t == 0.0 ? 2.0 * fc : std::sin(2.0 * M_PI * fc * t) / (M_PI * t);
        const double w = 0.42 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(taps_ - 1)) +
                         0.08 * std::cos(4.0 * M_PI * double(i) / double(taps_ - 1));
        h_[size_t(i)] = s * w * double(up_);
    }
}

void polyphase_resampler::reset() {
    buf_.clear();
    buf_start_ = 0;
    in_count_ = 0;
    out_count_ = 0;
}

int64_t polyphase_resampler::expected_out(int64_t total_in) const {
    if (total_in <= 0) return 0;
    if (up_ == 1 && down_ == 1) return total_in;
    return (int64_t(up_) * total_in - 1) / down_ + 1;
}

std::vector<float> polyphase_resampler::process(const float * x, int64_t n) {
    if (up_ == 1 && down_ == 1) return std::vector<float>(x, x + n);
    buf_.insert(buf_.end(), x, x + n);
    in_count_ += n;
    std::vector<float> out;
    // output n sits at upsampled index u = n*down_; needs inputs up to floor(u/up_)
    while ((out_count_ * down_) / up_ < in_count_) {
        const int64_t u = out_count_ * down_;
        int64_t j_lo = (u - taps_) / up_ + 1;
        if (u - taps_ < 0) j_lo = 0;
        const int64_t j_hi = u / up_;
        double acc = 0.0;
        for (int64_t j = j_lo; j <= j_hi; ++j)
            acc += double(buf_[size_t(j - buf_start_)]) * h_[size_t(u - j * up_)];
        out.push_back(float(acc));
        ++out_count_;
    }
    // keep only inputs still reachable by future outputs
    const int64_t keep_from = std::max<int64_t>(0, (out_count_ * down_ - taps_) / up_ + 1);
    if (keep_from > buf_start_) {
        buf_.erase(buf_.begin(), buf_.begin() + (keep_from - buf_start_));
        buf_start_ = keep_from;
    }
    return out;
}

// ---- desk teacher ----

desk_teacher::desk_teacher(int sample_rate_hz, int64_t out_dim)
    : sr_(sample_rate_hz), out_dim_(out_dim), plan_(1) {
    if (sr_ % 100 != 0) fail(err::sample_rate_mismatch, "teacher sample rate must divide into 10 ms hops");
    hop_ = sr_ / 100;            // 10 ms
    win_ = sr_ / 40;             // 25 ms
    nfft_ = 1;
    while (nfft_ < win_) nfft_ <<= 1;
    plan_ = kern::fft_plan(nfft_);
    mel_bank_ = kern::mel_filterbank(80, nfft_, double(sr_));
    rng r(teacher_seed);
    proj_.resize(size_t(80) * size_t(out_dim_));
    const double s = 1.0 / std::sqrt(80.0);
    for (auto & w : proj_) w = float(r.next_gauss() * s);
    reset();
}

void desk_teacher::reset() {
    sbuf_.clear();
    buf_start_ = 0;
    in_count_ = 0;
    next_mel_ = 0;
    pool_acc_.assign(80, 0.0);
    pool_fill_ = 0;
}

std::vector<float> desk_teacher::process(const float * samples, int64_t n) {
    sbuf_.insert(sbuf_.end(), samples, samples + n);
    in_count_ += n;
    std::vector<float> out;
    const int64_t bins = nfft_ / 2 + 1;
    std::vector<std::complex<double>> buf(static_cast<size_t>(nfft_));
    std::vector<double> logmel(80);
    // mel frame m covers samples [(m+1)*hop - win, (m+1)*hop), left zero-padded
    while ((next_mel_ + 1) * hop_ <= in_count_) {
        const int64_t end = (next_mel_ + 1) * hop_;
        for (int i = 0; i < nfft_; ++i) buf[size_t(i)] = {0.0, 0.0};
        for (int i = 0; i < win_; ++i) {
            const int64_t idx = end - win_ + i;
            if (idx < 0) continue;
            const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win_));
            buf[size_t(i)] = {double(sbuf_[size_t(idx - buf_start_)]) * w, 0.0};
        }
        kern::fft_execute(plan_, buf.data(), false);
        for (int m = 0; m < 80; ++m) {
            double acc = 0.0;
            for (int64_t b = 0; b < bins; ++b)
                acc += mel_bank_[size_t(m) * size_t(bins) + size_t(b)] * std::norm(buf[size_t(b)]);
            logmel[size_t(m)] = std::log(acc + 1e-5);
        }
        for (int m = 0; m < 80; ++m) pool_acc_[size_t(m)] += logmel[size_t(m)];
        if (++pool_fill_ == 8) {
            std::vector<float> pooled(80);
            for (int m = 0; m < 80; ++m) pooled[size_t(m)] = float(pool_acc_[size_t(m)] / 8.0);
            const size_t base = out.size();
            out.resize(base + size_t(out_dim_), 0.0f);
            for (int m = 0; m < 80; ++m)
                kern::axpy(out.data() + base, pooled[size_t(m)], proj_.data() + m * out_dim_, out_dim_);
            pool_acc_.assign(80, 0.0);
            pool_fill_ = 0;
        }
        ++next_mel_;
    }
    // drop samples no future mel frame can reach
    const int64_t keep_from = std::max<int64_t>(0, (next_mel_ + 1) * hop_ - win_);
    if (keep_from > buf_start_) {
        sbuf_.erase(sbuf_.begin(), sbuf_.begin() + (keep_from - buf_start_));
        buf_start_ = keep_from;
    }
    return out;
}

uint64_t desk_teacher::param_hash() const {
    return fnv_bytes(proj_.data(), proj_.size() * sizeof(float));
}

// ---- feature file exchange ----

void write_feature_file(const std::string & path, const latent_sequence & feats) {
    std::string s;
    s.append("OMFT");
    auto wr16 = [&s](uint16_t v) { s.push_back(char(v & 0xff)); s.push_back(char(v >> 8)); };
    wr16(1);
    wr16(0);
    for (int i = 0; i < 4; ++i) s.push_back(char((uint32_t(feats.dim) >> (8 * i)) & 0xff));
    for (int i = 0; i < 8; ++i) s.push_back(char((uint64_t(feats.frames) >> (8 * i)) & 0xff));
    for (float v : feats.data) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        for (int i = 0; i < 4; ++i) s.push_back(char((u >> (8 * i)) & 0xff));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(err::io_error, "cannot write feature file " + path);
    f.write(s.data(), std::streamsize(s.size()));
}

latent_sequence read_feature_file(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(err::io_error, "cannot open feature file " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 20) fail(err::truncated_payload, "feature file shorter than header");
    const auto * p = reinterpret_cast<const unsigned char *>(bytes.data());
    if (std::memcmp(p, "OMFT", 4) != 0) fail(err::bad_magic, path + " is not a feature file");
    const uint16_t version = uint16_t(p[4] | p[5] << 8);
    if (version != 1) fail(err::unsupported_version, "feature file version " + std::to_string(version));
    uint32_t dim = 0;
    for (int i = 3; i >= 0; --i) dim = dim << 8 | p[8 + i];
    uint64_t frames = 0;
    for (int i = 7; i >= 0; --i) frames = frames << 8 | p[12 + i];
    if (bytes.size() != 20 + 4 * frames * dim)
        fail(err::truncated_payload, "feature file payload does not match header");
    latent_sequence out(int64_t(frames), int64_t(dim), 12.5);
    std::memcpy(out.data.data(), p + 20, out.data.size() * sizeof(float));
    return out;
}

file_teacher::file_teacher(const std::string & path, int64_t samples_per_frame)
    : feats_(read_feature_file(path)), spf_(samples_per_frame) {}

std::vector<float> file_teacher::process(const float *, int64_t n) {
    in_count_ += n;
    std::vector<float> out;
    while (cursor_ < feats_.frames && (cursor_ + 1) * spf_ <= in_count_) {
        out.insert(out.end(), feats_.row(cursor_), feats_.row(cursor_) + feats_.dim);
        ++cursor_;
    }
    return out;
}

uint64_t file_teacher::param_hash() const {
    return fnv_bytes(feats_.data.data(), feats_.data.size() * sizeof(float));
}

// ---- semantic vq / losses / decoupling ----

semantic_quant semantic_quantize(const latent_sequence & teacher_out, const codebook & cb) {
    if (teacher_out.dim != cb.d)
        fail(err::dim_mismatch, "semantic vq: teacher dim " + std::to_string(teacher_out.dim) +
             " != codebook dim " + std::to_string(cb.d));
    semantic_quant out;
    out.tokens.assign(size_t(teacher_out.frames), 0);
    out.s_q = latent_sequence(teacher_out.frames, teacher_out.dim, teacher_out.frame_rate_hz);
    if (teacher_out.frames > 0)
        kern::par::vq_nearest_scan(out.tokens.data(), teacher_out.data.data(), cb.vectors.data(),
                                   teacher_out.frames, cb.k, cb.d);
    for (int64_t f = 0; f < teacher_out.frames; ++f) {
        const double * v = cb.vec(out.tokens[size_t(f)]);
        float * dst = out.s_q.row(f);
        for (int64_t j = 0; j < cb.d; ++j) dst[j] = float(v[j]);
    }
    return out;
}

double semantic_recon_loss(const latent_sequence & s_q, const latent_sequence & teacher_out) {
    if (s_q.frames != teacher_out.frames || s_q.dim != teacher_out.dim)
        fail(err::shape_mismatch, "semantic_recon_loss: shapes differ");
    double acc = 0.0;
    for (size_t i = 0; i < s_q.data.size(); ++i) {
        const double diff = double(s_q.data[i]) - double(teacher_out.data[i]);
        acc += diff * diff;
    }
    const double n = double(s_q.frames) * double(s_q.dim);
    return n > 0 ? acc / n : 0.0;
}

adapter_map make_adapter(const param_store & ps, const validated_config & cfg) {
    adapter_map a;
    a.in_dim = cfg.semantic_dim;
    a.out_dim = cfg.hidden_dim;
    if (cfg.use_adapter) a.ps = &ps;
    return a;
}

latent_sequence adapter_map::apply(const latent_sequence & s_q) const {
    if (s_q.dim != in_dim) fail(err::dim_mismatch, "adapter input dim mismatch");
    latent_sequence out(s_q.frames, out_dim, s_q.frame_rate_hz);
    if (ps) {
        const tensor & w = ps->get("adapter.w")->val;
        const tensor & b = ps->get("adapter.b")->val;
        if (s_q.frames > 0) {
            kern::par::matmul(out.data.data(), s_q.data.data(), w.data(), s_q.frames, in_dim, out_dim,
                              false, false);
            for (int64_t f = 0; f < s_q.frames; ++f)
                for (int64_t j = 0; j < out_dim; ++j) out.row(f)[j] += b.v[size_t(j)];
        }
    } else {
        // fixed slice / zero-pad embedding (no-adapter ablation)
        const int64_t copy = std::min(in_dim, out_dim);
        for (int64_t f = 0; f < s_q.frames; ++f)
            std::memcpy(out.row(f), s_q.row(f), size_t(copy) * sizeof(float));
    }
    return out;
}

var adapter_map::apply_train(const var & s_q) const {
    if (ps) return ad::linear(s_q, ps->get("adapter.w"), ps->get("adapter.b"));
    const int64_t copy = std::min(in_dim, out_dim);
    tensor slice({in_dim, out_dim});
    for (int64_t i = 0; i < copy; ++i) slice.v[size_t(i * out_dim + i)] = 1.0f;
    return ad::matmul(s_q, ad::constant(std::move(slice)));
}

latent_sequence pool_rows(const latent_sequence & x, int factor) {
    if (factor <= 1) return x;
    latent_sequence out(x.frames / factor, x.dim, x.frame_rate_hz / factor);
    for (int64_t f = 0; f < out.frames; ++f)
        for (int64_t j = 0; j < x.dim; ++j) {
            double acc = 0.0;
            for (int p = 0; p < factor; ++p) acc += double(x.row(f * factor + p)[j]);
            out.row(f)[j] = float(acc / double(factor));
        }
    return out;
}

namespace {

int64_t aligned_frames(const latent_sequence & a, const latent_sequence & b) {
    if (std::llabs(a.frames - b.frames) > 1)
        fail(err::frame_misalignment, "streams are " + std::to_string(a.frames) + " vs " +
             std::to_string(b.frames) + " frames apart");
    return std::min(a.frames, b.frames);
}

} // namespace

latent_sequence decouple_subtract(const latent_sequence & acoustic_hidden,
                                  const latent_sequence & adapted_sq) {
    if (acoustic_hidden.dim != adapted_sq.dim)
        fail(err::dim_mismatch, "decouple_subtract: dims differ");
    const int64_t frames = aligned_frames(acoustic_hidden, adapted_sq);
    latent_sequence out(frames, acoustic_hidden.dim, acoustic_hidden.frame_rate_hz);
    for (int64_t i = 0; i < frames * out.dim; ++i)
        out.data[size_t(i)] = acoustic_hidden.data[size_t(i)] - adapted_sq.data[size_t(i)];
    return out;
}

latent_sequence decouple_recombine(const latent_sequence & a_q,
                                   const latent_sequence & adapted_sq) {
    if (a_q.dim != adapted_sq.dim) fail(err::dim_mismatch, "decouple_recombine: dims differ");
    const int64_t frames = aligned_frames(a_q, adapted_sq);
    latent_sequence out(frames, a_q.dim, a_q.frame_rate_hz);
    for (int64_t i = 0; i < frames * out.dim; ++i)
        out.data[size_t(i)] = a_q.data[size_t(i)] + adapted_sq.data[size_t(i)];
    return out;
}

} // namespace omnicodec
