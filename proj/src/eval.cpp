#include "omnicodec/eval.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/graph.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/tensor.hpp"
#include "omnicodec/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace omnicodec {

std::vector<double> eval_log_mel(const pcm_buffer & x, int64_t & frames_out) {
    const int win = 1024, hop = 256, n_mels = 80;
    const int bins = win / 2 + 1;
    const int64_t t = x.size();
    frames_out = t >= win ? (t - win) / hop + 1 : 0;
    std::vector<double> bank = kern::mel_filterbank(n_mels, win, double(x.sample_rate_hz));
    std::vector<double> out(size_t(frames_out) * n_mels);
    kern::fft_plan plan(win);
    std::vector<double> window(win);
    for (int i = 0; i < win; ++i)
        window[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win));
#pragma omp parallel
    {
        std::vector<std::complex<double>> buf(static_cast<size_t>(win));
#pragma omp for schedule(static)
        for (int64_t f = 0; f < frames_out; ++f) {
            for (int i = 0; i < win; ++i)
                buf[size_t(i)] = {double(x.samples[size_t(f * hop + i)]) * window[size_t(i)], 0.0};
            kern::fft_execute(plan, buf.data(), false);
            for (int m = 0; m < n_mels; ++m) {
                double acc = 0.0;
                for (int b = 0; b < bins; ++b)
                    acc += bank[size_t(m) * size_t(bins) + size_t(b)] * std::norm(buf[size_t(b)]);
                out[size_t(f) * n_mels + size_t(m)] = std::log(acc + 1e-5);
            }
        }
    }
    return out;
}

double mel_distance(const pcm_buffer & x, const pcm_buffer & y) {
    if (x.sample_rate_hz != y.sample_rate_hz)
        fail(err::sample_rate_mismatch, "mel_distance: sample rates differ");
    pcm_buffer a = x, b = y;
    const int64_t len = std::min(a.size(), b.size());
    a.samples.resize(size_t(len));
    b.samples.resize(size_t(len));
    int64_t fa = 0, fb = 0;
    const std::vector<double> ma = eval_log_mel(a, fa);
    const std::vector<double> mb = eval_log_mel(b, fb);
    if (fa == 0) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < ma.size(); ++i) acc += std::abs(ma[i] - mb[i]);
    return acc / double(ma.size());
}

void dct2_row(const double * x, int64_t n, double * out) {
    for (int64_t k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int64_t m = 0; m < n; ++m)
            acc += x[m] * std::cos(M_PI * double(k) * (double(m) + 0.5) / double(n));
        out[k] = acc;
    }
}

double mcd_from_logmel(const std::vector<double> & a, const std::vector<double> & b,
                       int64_t frames, int64_t bins) {
    if (frames == 0) return 0.0;
    const double scale = 10.0 / std::log(10.0) * std::sqrt(2.0);
    std::vector<double> ca(static_cast<size_t>(bins)), cb(static_cast<size_t>(bins));
    double acc = 0.0;
    for (int64_t f = 0; f < frames; ++f) {
        dct2_row(a.data() + f * bins, bins, ca.data());
        dct2_row(b.data() + f * bins, bins, cb.data());
        double ss = 0.0;
        for (int64_t k = 1; k <= 13 && k < bins; ++k) {
            const double d = ca[size_t(k)] - cb[size_t(k)];
            ss += d * d;
        }
        acc += scale * std::sqrt(ss);
    }
    return acc / double(frames);
}

double mcd_db(const pcm_buffer & x, const pcm_buffer & y) {
    if (x.sample_rate_hz != y.sample_rate_hz)
        fail(err::sample_rate_mismatch, "mcd: sample rates differ");
    pcm_buffer a = x, b = y;
    const int64_t len = std::min(a.size(), b.size());
    a.samples.resize(size_t(len));
    b.samples.resize(size_t(len));
    int64_t fa = 0, fb = 0;
    const std::vector<double> ma = eval_log_mel(a, fa);
    const std::vector<double> mb = eval_log_mel(b, fb);
    return mcd_from_logmel(ma, mb, fa, 80);
}

// ---- token LM ----

namespace {

struct lm_model {
    token_lm_config cfg;
    int64_t vocab = 0; // without BOS
    param_store ps;
};

lm_model lm_init(int64_t vocab, const token_lm_config & cfg) {
    lm_model lm;
    lm.cfg = cfg;
    lm.vocab = vocab;
    const int d = cfg.dim, ff = cfg.ff_dim;
    auto nrm = [&](const std::string & name, int in, int out, double scale) {
        rng r = rng::from_seed_and_tag(cfg.seed, "lm." + name);
        tensor t({in, out});
        for (auto & v : t.v) v = float(r.next_gauss() * scale);
        return t;
    };
    lm.ps.add("embed", nrm("embed", int(vocab) + 1, d, 0.02));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string pre = "l" + std::to_string(l) + ".";
        lm.ps.add(pre + "ln1.g", [&] { tensor t({d}); t.fill(1.0f); return t; }());
        lm.ps.add(pre + "ln1.b", tensor({d}));
        for (const char * nm : {"wq", "wk", "wv", "wo"})
            lm.ps.add(pre + std::string(nm), nrm(pre + nm, d, d, 1.0 / std::sqrt(double(d))));
        for (const char * nm : {"bq", "bk", "bv", "bo"}) lm.ps.add(pre + std::string(nm), tensor({d}));
        lm.ps.add(pre + "ln2.g", [&] { tensor t({d}); t.fill(1.0f); return t; }());
        lm.ps.add(pre + "ln2.b", tensor({d}));
        lm.ps.add(pre + "ff1.w", nrm(pre + "ff1.w", d, ff, 1.0 / std::sqrt(double(d))));
        lm.ps.add(pre + "ff1.b", tensor({ff}));
        lm.ps.add(pre + "ff2.w", nrm(pre + "ff2.w", ff, d, 1.0 / std::sqrt(double(ff))));
        lm.ps.add(pre + "ff2.b", tensor({d}));
    }
    lm.ps.add("ln_f.g", [&] { tensor t({d}); t.fill(1.0f); return t; }());
    lm.ps.add("ln_f.b", tensor({d}));
    lm.ps.add("head.w", nrm("head.w", d, int(vocab), 0.02));
    lm.ps.add("head.b", tensor({int64_t(vocab)}));
    return lm;
}

var lm_logits(lm_model & lm, const std::vector<int32_t> & inputs) {
    const int64_t t = int64_t(inputs.size());
    const int64_t d = lm.cfg.dim;
    var x = ad::embedding(inputs, lm.ps.get("embed"));
    tensor pe({t, d});
    for (int64_t i = 0; i < t; ++i) kern::positional_row(i, d, pe.data() + i * d);
    x = ad::add(x, ad::constant(std::move(pe)));
    for (int l = 0; l < lm.cfg.layers; ++l) {
        const std::string pre = "l" + std::to_string(l) + ".";
        var a = ad::layernorm(x, lm.ps.get(pre + "ln1.g"), lm.ps.get(pre + "ln1.b"));
        var q = ad::linear(a, lm.ps.get(pre + "wq"), lm.ps.get(pre + "bq"));
        var k = ad::linear(a, lm.ps.get(pre + "wk"), lm.ps.get(pre + "bk"));
        var v = ad::linear(a, lm.ps.get(pre + "wv"), lm.ps.get(pre + "bv"));
        var att = ad::causal_attention(q, k, v, lm.cfg.heads);
        x = ad::add(x, ad::linear(att, lm.ps.get(pre + "wo"), lm.ps.get(pre + "bo")));
        var f = ad::layernorm(x, lm.ps.get(pre + "ln2.g"), lm.ps.get(pre + "ln2.b"));
        f = ad::gelu(ad::linear(f, lm.ps.get(pre + "ff1.w"), lm.ps.get(pre + "ff1.b")));
        x = ad::add(x, ad::linear(f, lm.ps.get(pre + "ff2.w"), lm.ps.get(pre + "ff2.b")));
    }
    x = ad::layernorm(x, lm.ps.get("ln_f.g"), lm.ps.get("ln_f.b"));
    return ad::linear(x, lm.ps.get("head.w"), lm.ps.get("head.b"));
}

// window starting at off: inputs = [BOS, tok..], targets = tok..
void lm_window(const std::vector<int32_t> & stream, int64_t off, int64_t len, int64_t bos,
               std::vector<int32_t> & inputs, std::vector<int32_t> & targets) {
    inputs.clear();
    targets.clear();
    inputs.push_back(int32_t(bos));
    for (int64_t i = 0; i < len; ++i) {
        targets.push_back(stream[size_t(off + i)]);
        if (i + 1 < len) inputs.push_back(stream[size_t(off + i)]);
    }
}

} // namespace

double token_stream_ppl(const std::vector<int32_t> & train_tokens,
                        const std::vector<int32_t> & eval_tokens, int64_t vocab,
                        const token_lm_config & cfg) {
    if (train_tokens.empty() || eval_tokens.empty())
        fail(err::empty_corpus, "token ppl needs non-empty train and eval streams");
    lm_model lm = lm_init(vocab, cfg);
    // plain adam on the lm params
    std::map<std::string, tensor> m1, m2;
    for (const auto & [name, v] : lm.ps.p) { m1[name] = tensor(v->val.shape); m2[name] = tensor(v->val.shape); }
    const int64_t ctx = cfg.context;
    int64_t cursor = 0;
    std::vector<int32_t> inputs, targets;
    for (int64_t stepi = 1; stepi <= cfg.train_steps; ++stepi) {
        const int64_t len = std::min<int64_t>(ctx, int64_t(train_tokens.size()) - cursor);
        lm_window(train_tokens, cursor, len, vocab, inputs, targets);
        cursor += len;
        if (cursor >= int64_t(train_tokens.size())) cursor = 0;
        var loss = ad::cross_entropy(lm_logits(lm, inputs), targets);
        ad::backward(loss);
        const double c1 = 1.0 - std::pow(0.9, double(stepi));
        const double c2 = 1.0 - std::pow(0.99, double(stepi));
        for (auto & [name, v] : lm.ps.p) {
            if (v->grad.v.empty()) continue;
            float * pv = v->val.data();
            const float * g = v->grad.data();
            tensor & m = m1[name];
            tensor & s = m2[name];
            for (int64_t i = 0; i < v->val.numel(); ++i) {
                const double gi = double(g[i]);
                const double mi = 0.9 * double(m.v[size_t(i)]) + 0.1 * gi;
                const double si = 0.99 * double(s.v[size_t(i)]) + 0.01 * gi * gi;
                m.v[size_t(i)] = float(mi);
                s.v[size_t(i)] = float(si);
                pv[i] = float(double(pv[i]) - cfg.lr * (mi / c1) / (std::sqrt(si / c2) + 1e-8));
            }
        }
        lm.ps.zero_grads();
    }
    // eval: exp(mean nll) over all eval tokens
    double total_nll = 0.0;
    int64_t total_tokens = 0;
    for (int64_t off = 0; off < int64_t(eval_tokens.size()); off += ctx) {
        const int64_t len = std::min<int64_t>(ctx, int64_t(eval_tokens.size()) - off);
        lm_window(eval_tokens, off, len, vocab, inputs, targets);
        ad::no_grad_guard ng;
        var loss = ad::cross_entropy(lm_logits(lm, inputs), targets);
        total_nll += double(loss->scalar()) * double(len);
        total_tokens += len;
    }
    return std::exp(total_nll / double(total_tokens));
}

namespace {

std::vector<int32_t> gather_stream(const std::vector<token_matrix> & corpus, int64_t stream) {
    std::vector<int32_t> out;
    for (const auto & m : corpus)
        for (int64_t f = 0; f < m.frames; ++f) {
            const int32_t tok = m.at(f, stream);
            if (tok != token_inactive) out.push_back(tok);
        }
    return out;
}

} // namespace

double token_ppl(const std::vector<token_matrix> & train_corpus,
                 const std::vector<token_matrix> & eval_corpus, int64_t vocab, ppl_mode mode,
                 const token_lm_config & cfg) {
    if (train_corpus.empty() || eval_corpus.empty())
        fail(err::empty_corpus, "token ppl needs non-empty corpora");
    const token_matrix & probe = train_corpus.front();
    if (mode == ppl_mode::ppl0) {
        return token_stream_ppl(gather_stream(train_corpus, 0), gather_stream(eval_corpus, 0),
                                vocab, cfg);
    }
    const int64_t base = probe.has_semantic ? 1 : 0;
    if (probe.streams - base < 8)
        fail(err::insufficient_streams, "ppl_mean_8 needs >= 8 acoustic streams, have " +
             std::to_string(probe.streams - base));
    double acc = 0.0;
    for (int64_t s = 0; s < 8; ++s)
        acc += token_stream_ppl(gather_stream(train_corpus, base + s),
                                gather_stream(eval_corpus, base + s), vocab, cfg);
    return acc / 8.0;
}

// ---- reconstruction evaluation ----

std::string eval_recon_report::text() const {
    std::ostringstream os;
    os.precision(6);
    for (const auto & f : files)
        os << f.path << " mel_distance=" << f.mel_distance << " mcd_db=" << f.mcd
           << " seconds=" << f.seconds << "\n";
    for (const auto & s : skipped) os << s << " skipped\n";
    os << "aggregate mel_distance=" << mean_mel_distance << " mcd_db=" << mean_mcd
       << " utilization=" << utilization.aggregate << " nominal_bps=" << nominal_bitrate_bps
       << " on_disk_bps=" << on_disk_bitrate_bps << "\n";
    return os.str();
}

std::string eval_recon_report::summary() const {
    std::ostringstream os;
    os.precision(10);
    os << "files=" << files.size() << "\n";
    os << "skipped=" << skipped.size() << "\n";
    os << "mean_mel_distance=" << mean_mel_distance << "\n";
    os << "mean_mcd_db=" << mean_mcd << "\n";
    os << "codebook_utilization=" << utilization.aggregate << "\n";
    os << "nominal_bitrate_bps=" << nominal_bitrate_bps << "\n";
    os << "on_disk_bitrate_bps=" << on_disk_bitrate_bps << "\n";
    return os.str();
}

eval_recon_report eval_recon(const codec_model & model, const std::string & wav_dir) {
    namespace fs = std::filesystem;
    eval_recon_report rep;
    const auto & cfg = model.cfg;
    rep.nominal_bitrate_bps = bitrate_bps(cfg.frame_rate_hz, cfg.total_streams(),
                                          cfg.semantic_branch ? std::max(cfg.semantic_bits, cfg.acoustic_bits)
                                                              : cfg.acoustic_bits);
    rep.on_disk_bitrate_bps = cfg.frame_rate_hz * double(cfg.total_streams()) * 16.0;

    std::vector<std::string> paths;
    if (fs::exists(wav_dir))
        for (const auto & e : fs::directory_iterator(wav_dir))
            if (e.is_regular_file() && e.path().extension() == ".wav")
                paths.push_back(e.path().string());
    std::sort(paths.begin(), paths.end());

    // distinct-code union across the whole corpus, per stream
    std::vector<std::set<int32_t>> used(size_t(cfg.total_streams()));
    double sum_mel = 0.0, sum_mcd = 0.0;
    for (const auto & path : paths) {
        pcm_buffer x;
        try {
            x = wav_read(path);
        } catch (const error & e) {
            std::cerr << "warning: skipping " << path << ": " << e.what() << "\n";
            rep.skipped.push_back(path);
            continue;
        }
        if (x.sample_rate_hz != cfg.sample_rate_hz) {
            polyphase_resampler rs(x.sample_rate_hz, cfg.sample_rate_hz);
            x.samples = rs.process(x.samples.data(), x.size());
            x.sample_rate_hz = cfg.sample_rate_hz;
        }
        codec_session enc(model);
        token_matrix tokens = enc.encode_all(x);
        codec_session dec(model);
        pcm_buffer y = dec.decode_all(tokens);
        y.samples.resize(std::min(y.samples.size(), x.samples.size()));

        eval_file_result r;
        r.path = path;
        r.mel_distance = mel_distance(x, y);
        r.mcd = mcd_db(x, y);
        r.seconds = x.seconds();
        sum_mel += r.mel_distance;
        sum_mcd += r.mcd;
        rep.files.push_back(std::move(r));
        for (int64_t s = 0; s < tokens.streams; ++s)
            for (int64_t f = 0; f < tokens.frames; ++f)
                if (tokens.at(f, s) != token_inactive) used[size_t(s)].insert(tokens.at(f, s));
    }
    if (!rep.files.empty()) {
        rep.mean_mel_distance = sum_mel / double(rep.files.size());
        rep.mean_mcd = sum_mcd / double(rep.files.size());
    }
    rep.utilization.used_per_stream.resize(used.size());
    rep.utilization.utilization_per_stream.resize(used.size());
    double agg = 0.0;
    for (size_t s = 0; s < used.size(); ++s) {
        const int64_t k = (cfg.semantic_branch && s == 0) ? cfg.semantic_codebook_size
                                                          : cfg.acoustic_codebook_size;
        rep.utilization.used_per_stream[s] = int64_t(used[s].size());
        rep.utilization.utilization_per_stream[s] = double(used[s].size()) / double(k);
        agg += rep.utilization.utilization_per_stream[s];
    }
    rep.utilization.aggregate = used.empty() ? 0.0 : agg / double(used.size());
    return rep;
}

} // namespace omnicodec
