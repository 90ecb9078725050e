#include "omnicodec/config.hpp"

#include "omnicodec/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace omnicodec {

const char * err_name(err e) {
    switch (e) {
        case err::non_integer_hop:          return "NonIntegerHop";
        case err::parse_error:              return "ParseError";
        case err::sample_rate_mismatch:     return "SampleRateMismatch";
        case err::dim_mismatch:             return "DimMismatch";
        case err::shape_mismatch:           return "ShapeMismatch";
        case err::length_mismatch:          return "LengthMismatch";
        case err::frame_misalignment:       return "FrameMisalignment";
        case err::invalid_stage_count:      return "InvalidStageCount";
        case err::not_in_training_mode:     return "NotInTrainingMode";
        case err::empty_batch:              return "EmptyBatch";
        case err::non_finite_loss:          return "NonFiniteLoss";
        case err::clip_too_short:           return "ClipTooShort";
        case err::io_error:                 return "IoError";
        case err::version_mismatch:         return "VersionMismatch";
        case err::config_hash_mismatch:     return "ConfigHashMismatch";
        case err::bad_magic:                return "BadMagic";
        case err::unsupported_version:      return "UnsupportedVersion";
        case err::truncated_payload:        return "TruncatedPayload";
        case err::token_out_of_range:       return "TokenOutOfRange";
        case err::unsupported_wav_encoding: return "UnsupportedWavEncoding";
        case err::insufficient_streams:     return "InsufficientStreams";
        case err::empty_corpus:             return "EmptyCorpus";
        case err::usage_error:              return "UsageError";
    }
    return "UnknownError";
}

int err_exit_code(err e) {
    switch (e) {
        case err::usage_error:
            return 1;
        case err::io_error:
            return 2;
        case err::non_finite_loss:
            return 4;
        default:
            return 3;
    }
}

int bits_per_code(int codebook_size) {
    int bits = 0;
    while ((1 << bits) < codebook_size) ++bits;
    return bits < 1 ? 1 : bits;
}

double bitrate_bps(double frame_rate_hz, int total_streams, int bits_per_code) {
    return frame_rate_hz * double(total_streams) * double(bits_per_code);
}

validated_config validate(const codec_config & cfg) {
    auto positive = [](int64_t v, const char * name) {
        if (v <= 0) fail(err::parse_error, std::string(name) + " must be positive");
    };
    positive(cfg.sample_rate_hz, "sample_rate_hz");
    positive(cfg.teacher_sample_rate_hz, "teacher_sample_rate_hz");
    positive(cfg.extra_downsample, "extra_downsample");
    positive(cfg.base_channels, "base_channels");
    positive(cfg.hidden_dim, "hidden_dim");
    positive(cfg.transformer_layers, "transformer_layers");
    positive(cfg.transformer_heads, "transformer_heads");
    positive(cfg.transformer_ff_dim, "transformer_ff_dim");
    positive(cfg.semantic_codebook_size, "semantic_codebook_size");
    positive(cfg.semantic_dim, "semantic_dim");
    positive(cfg.acoustic_stages, "acoustic_stages");
    positive(cfg.acoustic_codebook_size, "acoustic_codebook_size");
    positive(cfg.acoustic_code_dim, "acoustic_code_dim");
    if (cfg.seanet_ratios.empty()) fail(err::parse_error, "seanet_ratios must be non-empty");
    for (int r : cfg.seanet_ratios) positive(r, "seanet_ratios entry");
    if (cfg.hidden_dim % cfg.transformer_heads != 0)
        fail(err::parse_error, "hidden_dim must divide evenly across transformer_heads");
    for (float w : {cfg.weights.ac_recon, cfg.weights.se_recon, cfg.weights.commit,
                    cfg.weights.dis, cfg.weights.gen, cfg.weights.fm, cfg.weights.self_guidance}) {
        if (!std::isfinite(w) || w < 0.0f) fail(err::parse_error, "loss weights must be finite and >= 0");
    }

    int64_t hop = cfg.extra_downsample;
    for (int r : cfg.seanet_ratios) hop *= r;

    validated_config out;
    static_cast<codec_config &>(out) = cfg;

    // hop family policy: sample rate must split into an integer number of
    // frames per second OR an integer number of seconds per frame
    if (cfg.sample_rate_hz % hop != 0) {
        double fps = double(cfg.sample_rate_hz) / double(hop);
        double scaled = fps * 4.0; // admits the x.25 / x.5 / x.75 Hz family (12.5, 6.25, ...)
        if (std::abs(scaled - std::round(scaled)) > 1e-9)
            fail(err::non_integer_hop,
                 "product(seanet_ratios) x extra_downsample = " + std::to_string(hop) +
                 " does not divide sample rate " + std::to_string(cfg.sample_rate_hz) +
                 " into the supported frame-rate family");
    }
    out.hop = int(hop);
    out.frame_rate_hz = double(cfg.sample_rate_hz) / double(hop);
    out.semantic_bits = bits_per_code(cfg.semantic_codebook_size);
    out.acoustic_bits = bits_per_code(cfg.acoustic_codebook_size);

    // teacher runs at 12.5 Hz; codec frame rate must be 12.5/k for integer pooling
    double pool = 12.5 / out.frame_rate_hz;
    if (std::abs(pool - std::round(pool)) > 1e-9 || pool < 1.0)
        fail(err::non_integer_hop,
             "frame rate " + std::to_string(out.frame_rate_hz) +
             " Hz is not an integer division of the 12.5 Hz teacher rate");
    out.teacher_pool = int(std::round(pool));
    out.config_hash = config_hash(cfg);
    return out;
}

std::string canonical_config_text(const codec_config & c) {
    std::ostringstream os;
    os << "sample_rate_hz=" << c.sample_rate_hz << "\n";
    os << "teacher_sample_rate_hz=" << c.teacher_sample_rate_hz << "\n";
    os << "seanet_ratios=";
    for (size_t i = 0; i < c.seanet_ratios.size(); ++i)
        os << (i ? "," : "") << c.seanet_ratios[i];
    os << "\n";
    os << "extra_downsample=" << c.extra_downsample << "\n";
    os << "base_channels=" << c.base_channels << "\n";
    os << "hidden_dim=" << c.hidden_dim << "\n";
    os << "transformer_layers=" << c.transformer_layers << "\n";
    os << "transformer_heads=" << c.transformer_heads << "\n";
    os << "transformer_ff_dim=" << c.transformer_ff_dim << "\n";
    os << "semantic_codebook_size=" << c.semantic_codebook_size << "\n";
    os << "semantic_dim=" << c.semantic_dim << "\n";
    os << "acoustic_stages=" << c.acoustic_stages << "\n";
    os << "acoustic_codebook_size=" << c.acoustic_codebook_size << "\n";
    os << "acoustic_code_dim=" << c.acoustic_code_dim << "\n";
    os << "quantizer_dropout=" << (c.quantizer_dropout ? 1 : 0) << "\n";
    os << "semantic_branch=" << (c.semantic_branch ? 1 : 0) << "\n";
    os << "use_adapter=" << (c.use_adapter ? 1 : 0) << "\n";
    os << "self_guidance=" << (c.self_guidance ? 1 : 0) << "\n";
    auto w = [&os](const char * k, float v) { os << k << "=" << v << "\n"; };
    w("weight_ac_recon", c.weights.ac_recon);
    w("weight_se_recon", c.weights.se_recon);
    w("weight_commit", c.weights.commit);
    w("weight_dis", c.weights.dis);
    w("weight_gen", c.weights.gen);
    w("weight_fm", c.weights.fm);
    w("weight_self_guidance", c.weights.self_guidance);
    os << "seed=" << c.seed << "\n";
    return os.str();
}

std::string canonical_train_text(const train_config & t) {
    std::ostringstream os;
    os.precision(17);
    os << "train_steps=" << t.steps << "\n";
    os << "train_batch_size=" << t.batch_size << "\n";
    os << "train_segment_seconds=" << t.segment_seconds << "\n";
    os << "train_lr_peak=" << t.lr_peak << "\n";
    os << "train_warmup_steps=" << t.warmup_steps << "\n";
    os << "train_decay_steps=" << t.decay_steps << "\n";
    os << "train_grad_accum=" << t.grad_accum << "\n";
    os << "train_checkpoint_every=" << t.checkpoint_every << "\n";
    os << "train_adv_start_step=" << t.adv_start_step << "\n";
    os << "train_ema_reseed=" << (t.ema_reseed ? 1 : 0) << "\n";
    os << "train_data_source=" << t.data_source << "\n";
    return os.str();
}

uint64_t config_hash(const codec_config & cfg) {
    std::string text = canonical_config_text(cfg);
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) { h ^= ch; h *= 0x100000001b3ull; }
    return h;
}

namespace {

struct kv_line {
    std::string key;
    std::string value;
    int line;
    int col; // of value start
};

[[noreturn]] void parse_fail(const std::string & origin, int line, int col, const std::string & what) {
    fail(err::parse_error, origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what);
}

int64_t to_int(const kv_line & l, const std::string & origin) {
    try {
        size_t pos = 0;
        int64_t v = std::stoll(l.value, &pos);
        if (pos != l.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception &) {
        parse_fail(origin, l.line, l.col, "expected integer for key '" + l.key + "'");
    }
}

double to_double(const kv_line & l, const std::string & origin) {
    try {
        size_t pos = 0;
        double v = std::stod(l.value, &pos);
        if (pos != l.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception &) {
        parse_fail(origin, l.line, l.col, "expected number for key '" + l.key + "'");
    }
}

bool to_bool(const kv_line & l, const std::string & origin) {
    if (l.value == "1" || l.value == "true") return true;
    if (l.value == "0" || l.value == "false") return false;
    parse_fail(origin, l.line, l.col, "expected boolean (0/1/true/false) for key '" + l.key + "'");
}

std::vector<int> to_int_list(const kv_line & l, const std::string & origin) {
    std::vector<int> out;
    std::string cur;
    std::istringstream is(l.value);
    while (std::getline(is, cur, ',')) {
        try {
            size_t pos = 0;
            out.push_back(std::stoi(cur, &pos));
            if (pos != cur.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception &) {
            parse_fail(origin, l.line, l.col, "expected comma-separated integers for key '" + l.key + "'");
        }
    }
    if (out.empty()) parse_fail(origin, l.line, l.col, "empty list for key '" + l.key + "'");
    return out;
}

std::string trim(const std::string & s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

config_file parse_config(const std::string & text, const std::string & origin, bool apply_env) {
    config_file out;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;

        size_t eq = line.find('=');
        if (eq == std::string::npos)
            parse_fail(origin, line_no, 1, "expected key=value");
        kv_line l;
        l.key = trim(line.substr(0, eq));
        l.value = trim(line.substr(eq + 1));
        l.line = line_no;
        l.col = int(eq) + 2;
        if (l.key.empty()) parse_fail(origin, line_no, 1, "empty key");
        if (l.value.empty()) parse_fail(origin, l.line, l.col, "empty value for key '" + l.key + "'");

        codec_config & c = out.codec;
        train_config & t = out.train;
        if      (l.key == "sample_rate_hz")         c.sample_rate_hz = int(to_int(l, origin));
        else if (l.key == "teacher_sample_rate_hz") c.teacher_sample_rate_hz = int(to_int(l, origin));
        else if (l.key == "seanet_ratios")          c.seanet_ratios = to_int_list(l, origin);
        else if (l.key == "extra_downsample")       c.extra_downsample = int(to_int(l, origin));
        else if (l.key == "base_channels")          c.base_channels = int(to_int(l, origin));
        else if (l.key == "hidden_dim")             c.hidden_dim = int(to_int(l, origin));
        else if (l.key == "transformer_layers")     c.transformer_layers = int(to_int(l, origin));
        else if (l.key == "transformer_heads")      c.transformer_heads = int(to_int(l, origin));
        else if (l.key == "transformer_ff_dim")     c.transformer_ff_dim = int(to_int(l, origin));
        else if (l.key == "semantic_codebook_size") c.semantic_codebook_size = int(to_int(l, origin));
        else if (l.key == "semantic_dim")           c.semantic_dim = int(to_int(l, origin));
        else if (l.key == "acoustic_stages")        c.acoustic_stages = int(to_int(l, origin));
        else if (l.key == "acoustic_codebook_size") c.acoustic_codebook_size = int(to_int(l, origin));
        else if (l.key == "acoustic_code_dim")      c.acoustic_code_dim = int(to_int(l, origin));
        else if (l.key == "quantizer_dropout")      c.quantizer_dropout = to_bool(l, origin);
        else if (l.key == "semantic_branch")        c.semantic_branch = to_bool(l, origin);
        else if (l.key == "use_adapter")            c.use_adapter = to_bool(l, origin);
        else if (l.key == "self_guidance")          c.self_guidance = to_bool(l, origin);
        else if (l.key == "weight_ac_recon")        c.weights.ac_recon = float(to_double(l, origin));
        else if (l.key == "weight_se_recon")        c.weights.se_recon = float(to_double(l, origin));
        else if (l.key == "weight_commit")          c.weights.commit = float(to_double(l, origin));
        else if (l.key == "weight_dis")             c.weights.dis = float(to_double(l, origin));
        else if (l.key == "weight_gen")             c.weights.gen = float(to_double(l, origin));
        else if (l.key == "weight_fm")              c.weights.fm = float(to_double(l, origin));
        else if (l.key == "weight_self_guidance")   c.weights.self_guidance = float(to_double(l, origin));
        else if (l.key == "seed")                   c.seed = to_int(l, origin);
        else if (l.key == "train_steps")            t.steps = to_int(l, origin);
        else if (l.key == "train_batch_size")       t.batch_size = int(to_int(l, origin));
        else if (l.key == "train_segment_seconds")  t.segment_seconds = to_double(l, origin);
        else if (l.key == "train_lr_peak")          t.lr_peak = to_double(l, origin);
        else if (l.key == "train_warmup_steps")     t.warmup_steps = to_int(l, origin);
        else if (l.key == "train_decay_steps")      t.decay_steps = to_int(l, origin);
        else if (l.key == "train_grad_accum")       t.grad_accum = int(to_int(l, origin));
        else if (l.key == "train_checkpoint_every") t.checkpoint_every = to_int(l, origin);
        else if (l.key == "train_adv_start_step")   t.adv_start_step = to_int(l, origin);
        else if (l.key == "train_ema_reseed")       t.ema_reseed = to_bool(l, origin);
        else if (l.key == "train_data_source")      t.data_source = l.value;
        else
            std::cerr << "warning: " << origin << ":" << line_no
                      << ": unknown key '" << l.key << "' ignored\n";
    }
    if (out.train.segment_seconds > 10.0)
        parse_fail(origin, 1, 1, "train_segment_seconds must be <= 10");

    if (const char * env = apply_env ? std::getenv("OMNICODEC_SEED") : nullptr) {
        try {
            out.codec.seed = std::stoll(env);
        } catch (const std::exception &) {
            fail(err::parse_error, "OMNICODEC_SEED is not an integer");
        }
    }
    return out;
}

config_file load_config(const std::string & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(err::io_error, "cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

} // namespace omnicodec
