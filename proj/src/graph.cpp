#include "omnicodec/graph.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"
#include "omnicodec/rng.hpp"

#include <cmath>
#include <cstring>

namespace omnicodec {

// ---- param store ----

var param_store::add(const std::string & name, tensor init) {
    auto v = ad::leaf(std::move(init), true);
    p[name] = v;
    return v;
}

const var & param_store::get(const std::string & name) const {
    auto it = p.find(name);
    if (it == p.end()) fail(err::truncated_payload, "missing parameter " + name);
    return it->second;
}

void param_store::zero_grads() {
    for (auto & [name, v] : p) v->zero_grad();
}

int64_t param_store::param_count() const {
    int64_t n = 0;
    for (const auto & [name, v] : p) n += v->val.numel();
    return n;
}

void param_store::to_checkpoint(checkpoint & ck, const std::string & prefix) const {
    for (const auto & [name, v] : p)
        ck.put_f32(prefix + name, v->val.shape, v->val.v);
}

void param_store::from_checkpoint(const checkpoint & ck, const std::string & prefix) {
    for (auto & [name, v] : p) {
        const ckpt_tensor & t = ck.get(prefix + name);
        if (t.type != ckpt_tensor::dtype::f32 || t.shape != v->val.shape)
            fail(err::shape_mismatch, "checkpoint tensor " + prefix + name + " has wrong dtype/shape");
        v->val.v = t.f32v;
    }
}

// ---- shapes / init ----

std::vector<int> seanet_channels(const validated_config & cfg) {
    std::vector<int> ch(cfg.seanet_ratios.size() + 1);
    for (size_t i = 0; i < ch.size(); ++i) {
        const int64_t c = int64_t(cfg.base_channels) << i;
        ch[i] = int(std::min<int64_t>(c, cfg.hidden_dim));
    }
    return ch;
}

namespace {

int extra_kernel(const validated_config & cfg) {
    return cfg.extra_downsample > 1 ? 2 * cfg.extra_downsample : 3;
}

tensor conv_init(uint64_t seed, const std::string & name, int cout, int k, int cin) {
    rng r = rng::from_seed_and_tag(seed, name);
    const double a = 1.0 / std::sqrt(double(k) * double(cin));
    tensor t({cout, k, cin});
    for (auto & x : t.v) x = float(r.next_uniform(-a, a));
    return t;
}

tensor convtr_init(uint64_t seed, const std::string & name, int cin, int k, int cout) {
    rng r = rng::from_seed_and_tag(seed, name);
    const double a = 1.0 / std::sqrt(double(k) * double(cin));
    tensor t({cin, k, cout});
    for (auto & x : t.v) x = float(r.next_uniform(-a, a));
    return t;
}

tensor linear_init(uint64_t seed, const std::string & name, int in, int out) {
    rng r = rng::from_seed_and_tag(seed, name);
    const double s = 1.0 / std::sqrt(double(in));
    tensor t({in, out});
    for (auto & x : t.v) x = float(r.next_gauss() * s);
    return t;
}

tensor zeros(std::vector<int64_t> shape) { return tensor(std::move(shape)); }

tensor ones(std::vector<int64_t> shape) {
    tensor t(std::move(shape));
    t.fill(1.0f);
    return t;
}

void add_transformer_params(param_store & ps, const validated_config & cfg, uint64_t seed,
                            const std::string & side) {
    const int d = cfg.hidden_dim, ff = cfg.transformer_ff_dim;
    for (int l = 0; l < cfg.transformer_layers; ++l) {
        const std::string pre = side + ".l" + std::to_string(l) + ".";
        ps.add(pre + "ln1.g", ones({d}));
        ps.add(pre + "ln1.b", zeros({d}));
        for (const char * nm : {"wq", "wk", "wv", "wo"})
            ps.add(pre + "attn." + nm, linear_init(seed, pre + "attn." + nm, d, d));
        for (const char * nm : {"bq", "bk", "bv", "bo"})
            ps.add(pre + "attn." + nm, zeros({d}));
        ps.add(pre + "ln2.g", ones({d}));
        ps.add(pre + "ln2.b", zeros({d}));
        ps.add(pre + "ff1.w", linear_init(seed, pre + "ff1.w", d, ff));
        ps.add(pre + "ff1.b", zeros({ff}));
        ps.add(pre + "ff2.w", linear_init(seed, pre + "ff2.w", ff, d));
        ps.add(pre + "ff2.b", zeros({d}));
    }
    ps.add(side + ".ln_f.g", ones({d}));
    ps.add(side + ".ln_f.b", zeros({d}));
}

} // namespace

param_store init_graph_params(const validated_config & cfg, uint64_t seed) {
    param_store ps;
    const auto ch = seanet_channels(cfg);
    const int n = int(cfg.seanet_ratios.size());
    const int ke = extra_kernel(cfg);

    ps.add("enc.conv_in.w", conv_init(seed, "enc.conv_in.w", ch[0], 7, 1));
    ps.add("enc.conv_in.b", zeros({ch[0]}));
    for (int i = 0; i < n; ++i) {
        const std::string pre = "enc.stage" + std::to_string(i) + ".";
        const int r = cfg.seanet_ratios[size_t(i)];
        ps.add(pre + "res1.w", conv_init(seed, pre + "res1.w", ch[size_t(i)], 7, ch[size_t(i)]));
        ps.add(pre + "res1.b", zeros({ch[size_t(i)]}));
        ps.add(pre + "res2.w", conv_init(seed, pre + "res2.w", ch[size_t(i)], 1, ch[size_t(i)]));
        ps.add(pre + "res2.b", zeros({ch[size_t(i)]}));
        ps.add(pre + "down.w", conv_init(seed, pre + "down.w", ch[size_t(i) + 1], 2 * r, ch[size_t(i)]));
        ps.add(pre + "down.b", zeros({ch[size_t(i) + 1]}));
    }
    ps.add("enc.extra.w", conv_init(seed, "enc.extra.w", cfg.hidden_dim, ke, ch[size_t(n)]));
    ps.add("enc.extra.b", zeros({cfg.hidden_dim}));
    ps.add("enc.conv_out.w", conv_init(seed, "enc.conv_out.w", cfg.hidden_dim, 3, cfg.hidden_dim));
    ps.add("enc.conv_out.b", zeros({cfg.hidden_dim}));

    ps.add("dec.conv_in.w", conv_init(seed, "dec.conv_in.w", cfg.hidden_dim, 3, cfg.hidden_dim));
    ps.add("dec.conv_in.b", zeros({cfg.hidden_dim}));
    ps.add("dec.extra.w", convtr_init(seed, "dec.extra.w", cfg.hidden_dim, ke, ch[size_t(n)]));
    ps.add("dec.extra.b", zeros({ch[size_t(n)]}));
    for (int i = n - 1; i >= 0; --i) {
        const std::string pre = "dec.stage" + std::to_string(i) + ".";
        const int r = cfg.seanet_ratios[size_t(i)];
        ps.add(pre + "up.w", convtr_init(seed, pre + "up.w", ch[size_t(i) + 1], 2 * r, ch[size_t(i)]));
        ps.add(pre + "up.b", zeros({ch[size_t(i)]}));
        ps.add(pre + "res1.w", conv_init(seed, pre + "res1.w", ch[size_t(i)], 7, ch[size_t(i)]));
        ps.add(pre + "res1.b", zeros({ch[size_t(i)]}));
        ps.add(pre + "res2.w", conv_init(seed, pre + "res2.w", ch[size_t(i)], 1, ch[size_t(i)]));
        ps.add(pre + "res2.b", zeros({ch[size_t(i)]}));
    }
    ps.add("dec.conv_out.w", conv_init(seed, "dec.conv_out.w", 1, 7, ch[0]));
    ps.add("dec.conv_out.b", zeros({1}));

    add_transformer_params(ps, cfg, seed, "tenc");
    add_transformer_params(ps, cfg, seed, "tdec");

    ps.add("proj.in.w", linear_init(seed, "proj.in.w", cfg.hidden_dim, cfg.acoustic_code_dim));
    ps.add("proj.in.b", zeros({cfg.acoustic_code_dim}));
    ps.add("proj.out.w", linear_init(seed, "proj.out.w", cfg.acoustic_code_dim, cfg.hidden_dim));
    ps.add("proj.out.b", zeros({cfg.hidden_dim}));

    if (cfg.semantic_branch && cfg.use_adapter) {
        ps.add("adapter.w", linear_init(seed, "adapter.w", cfg.semantic_dim, cfg.hidden_dim));
        ps.add("adapter.b", zeros({cfg.hidden_dim}));
    }
    return ps;
}

// ---- training forwards ----

var encoder_forward(const param_store & ps, const validated_config & cfg, const var & pcm) {
    if (pcm->val.dim(1) != 1) fail(err::shape_mismatch, "encoder input must be [t,1]");
    const int n = int(cfg.seanet_ratios.size());
    var x = ad::conv1d(pcm, ps.get("enc.conv_in.w"), ps.get("enc.conv_in.b"), 1);
    for (int i = 0; i < n; ++i) {
        const std::string pre = "enc.stage" + std::to_string(i) + ".";
        var h = ad::conv1d(ad::elu(x), ps.get(pre + "res1.w"), ps.get(pre + "res1.b"), 1);
        h = ad::conv1d(ad::elu(h), ps.get(pre + "res2.w"), ps.get(pre + "res2.b"), 1);
        x = ad::add(x, h);
        x = ad::conv1d(ad::elu(x), ps.get(pre + "down.w"), ps.get(pre + "down.b"),
                       cfg.seanet_ratios[size_t(i)]);
    }
    x = ad::conv1d(ad::elu(x), ps.get("enc.extra.w"), ps.get("enc.extra.b"), cfg.extra_downsample);
    x = ad::conv1d(ad::elu(x), ps.get("enc.conv_out.w"), ps.get("enc.conv_out.b"), 1);
    return x;
}

var decoder_forward(const param_store & ps, const validated_config & cfg, const var & lat) {
    if (lat->val.dim(1) != cfg.hidden_dim) fail(err::dim_mismatch, "decoder input dim != hidden_dim");
    const int n = int(cfg.seanet_ratios.size());
    var x = ad::conv1d(lat, ps.get("dec.conv_in.w"), ps.get("dec.conv_in.b"), 1);
    x = ad::convtr1d(ad::elu(x), ps.get("dec.extra.w"), ps.get("dec.extra.b"), cfg.extra_downsample);
    for (int i = n - 1; i >= 0; --i) {
        const std::string pre = "dec.stage" + std::to_string(i) + ".";
        x = ad::convtr1d(ad::elu(x), ps.get(pre + "up.w"), ps.get(pre + "up.b"),
                         cfg.seanet_ratios[size_t(i)]);
        var h = ad::conv1d(ad::elu(x), ps.get(pre + "res1.w"), ps.get(pre + "res1.b"), 1);
        h = ad::conv1d(ad::elu(h), ps.get(pre + "res2.w"), ps.get(pre + "res2.b"), 1);
        x = ad::add(x, h);
    }
    x = ad::conv1d(ad::elu(x), ps.get("dec.conv_out.w"), ps.get("dec.conv_out.b"), 1);
    return ad::tanh_act(x);
}

namespace {

tensor positional_block(int64_t frames, int64_t dim, int64_t offset) {
    tensor pe({frames, dim});
    for (int64_t t = 0; t < frames; ++t)
        kern::positional_row(offset + t, dim, pe.data() + t * dim);
    return pe;
}

} // namespace

var transformer_forward(const param_store & ps, const validated_config & cfg, const var & x_in,
                        const std::string & side, int64_t pos_offset) {
    if (x_in->val.dim(1) != cfg.hidden_dim) fail(err::dim_mismatch, "transformer input dim != hidden_dim");
    const int64_t frames = x_in->val.dim(0);
    var x = ad::add(x_in, ad::constant(positional_block(frames, cfg.hidden_dim, pos_offset)));
    for (int l = 0; l < cfg.transformer_layers; ++l) {
        const std::string pre = side + ".l" + std::to_string(l) + ".";
        var a = ad::layernorm(x, ps.get(pre + "ln1.g"), ps.get(pre + "ln1.b"));
        var q = ad::linear(a, ps.get(pre + "attn.wq"), ps.get(pre + "attn.bq"));
        var k = ad::linear(a, ps.get(pre + "attn.wk"), ps.get(pre + "attn.bk"));
        var v = ad::linear(a, ps.get(pre + "attn.wv"), ps.get(pre + "attn.bv"));
        var att = ad::causal_attention(q, k, v, cfg.transformer_heads);
        x = ad::add(x, ad::linear(att, ps.get(pre + "attn.wo"), ps.get(pre + "attn.bo")));
        var f = ad::layernorm(x, ps.get(pre + "ln2.g"), ps.get(pre + "ln2.b"));
        f = ad::gelu(ad::linear(f, ps.get(pre + "ff1.w"), ps.get(pre + "ff1.b")));
        x = ad::add(x, ad::linear(f, ps.get(pre + "ff2.w"), ps.get(pre + "ff2.b")));
    }
    return ad::layernorm(x, ps.get(side + ".ln_f.g"), ps.get(side + ".ln_f.b"));
}

latent_sequence transformer_pass(const param_store & ps, const validated_config & cfg,
                                 const latent_sequence & x, const std::string & side) {
    ad::no_grad_guard ng;
    var in = ad::constant(tensor({x.frames, x.dim}, x.data));
    var out = transformer_forward(ps, cfg, in, side, 0);
    latent_sequence res(x.frames, x.dim, x.frame_rate_hz);
    res.data = out->val.v;
    return res;
}

// ---- streaming layers ----

void stream_conv::bind(const var & w_, const var & b_, int stride_) {
    w = &w_->val;
    b = b_ ? &b_->val : nullptr;
    stride = stride_;
    cout = int(w->dim(0));
    k = int(w->dim(1));
    cin = int(w->dim(2));
    reset();
}

void stream_conv::reset() {
    tail.assign(size_t(k - stride) * size_t(cin), 0.0f);
}

std::vector<float> stream_conv::process(const float * in, int64_t t_in) {
    const int64_t pad = k - stride;
    if (t_in % stride != 0) fail(err::shape_mismatch, "stream_conv: chunk not divisible by stride");
    const int64_t t_out = t_in / stride;
    std::vector<float> xp(size_t(pad + t_in) * size_t(cin));
    std::memcpy(xp.data(), tail.data(), tail.size() * sizeof(float));
    std::memcpy(xp.data() + tail.size(), in, size_t(t_in) * size_t(cin) * sizeof(float));
    std::vector<float> out(size_t(t_out) * size_t(cout));
    if (t_out > 0) {
        kern::conv_dims d{t_out, stride, k, cin, cout};
        kern::par::conv1d_fwd(out.data(), xp.data(), w->data(), b ? b->data() : nullptr, d);
    }
    if (pad > 0 && t_in > 0)
        std::memcpy(tail.data(), xp.data() + size_t(t_in) * size_t(cin),
                    size_t(pad) * size_t(cin) * sizeof(float));
    return out;
}

void stream_convtr::bind(const var & w_, const var & b_, int stride_) {
    w = &w_->val;
    b = b_ ? &b_->val : nullptr;
    stride = stride_;
    cin = int(w->dim(0));
    k = int(w->dim(1));
    cout = int(w->dim(2));
    reset();
}

void stream_convtr::reset() {
    hist.clear();
    next_frame = 0;
}

std::vector<float> stream_convtr::process(const float * in, int64_t t_in) {
    std::vector<float> out(size_t(t_in) * size_t(stride) * size_t(cout));
    const int64_t keep = (k + stride - 1) / stride + 1;
    for (int64_t jl = 0; jl < t_in; ++jl) {
        hist.emplace_back(in + jl * cin, in + (jl + 1) * cin);
        const int64_t j_abs = next_frame++;
        while (int64_t(hist.size()) > keep) hist.pop_front();
        const int64_t oldest = next_frame - int64_t(hist.size());
        for (int r0 = 0; r0 < stride; ++r0) {
            const int64_t u = j_abs * stride + r0;
            float * yrow = out.data() + (jl * stride + r0) * cout;
            for (int c = 0; c < cout; ++c) yrow[c] = b ? b->data()[c] : 0.0f;
            int64_t j_lo = (u - k) / stride + 1;
            if (u - k < 0) j_lo = 0;
            for (int64_t j = j_lo; j <= j_abs; ++j) {
                const int64_t r = u - j * stride;
                const float * xrow = hist[size_t(j - oldest)].data();
                for (int ci = 0; ci < cin; ++ci)
                    kern::axpy(yrow, xrow[ci], w->data() + (int64_t(ci) * k + r) * cout, cout);
            }
        }
    }
    return out;
}

// ---- streaming transformer ----

void stream_transformer::bind(const param_store & ps, const validated_config & cfg,
                              const std::string & side) {
    ps_ = &ps;
    cfg_ = &cfg;
    side_ = side;
    reset();
}

void stream_transformer::reset() {
    layers_.assign(size_t(cfg_->transformer_layers), {});
    pos_ = 0;
}

namespace {

// y[out] = x[in] . w[in,out] + b; same inner order as the batch matmul
void matvec(const float * x, const tensor & w, const tensor & b, float * y) {
    const int64_t in = w.dim(0), out = w.dim(1);
    for (int64_t j = 0; j < out; ++j) y[j] = 0.0f;
    for (int64_t i = 0; i < in; ++i) kern::axpy(y, x[i], w.data() + i * out, out);
    for (int64_t j = 0; j < out; ++j) y[j] += b.data()[j];
}

} // namespace

std::vector<float> stream_transformer::process(const float * in, int64_t t_in) {
    const int64_t d = cfg_->hidden_dim;
    const int heads = cfg_->transformer_heads;
    const int64_t dh = d / heads;
    const int64_t ff = cfg_->transformer_ff_dim;
    std::vector<float> out(size_t(t_in) * size_t(d));
    std::vector<float> x(static_cast<size_t>(d)), a(static_cast<size_t>(d)), q(static_cast<size_t>(d)), kv(static_cast<size_t>(d)), vv(static_cast<size_t>(d));
    std::vector<float> att(static_cast<size_t>(d)), tmp(static_cast<size_t>(d)), f1(static_cast<size_t>(ff));
    for (int64_t row = 0; row < t_in; ++row) {
        std::memcpy(x.data(), in + row * d, size_t(d) * sizeof(float));
        std::vector<float> pe(static_cast<size_t>(d));
        kern::positional_row(pos_, d, pe.data());
        for (int64_t i = 0; i < d; ++i) x[size_t(i)] += pe[size_t(i)];
        for (int l = 0; l < cfg_->transformer_layers; ++l) {
            const std::string pre = side_ + ".l" + std::to_string(l) + ".";
            auto & st = layers_[size_t(l)];
            kern::layernorm_row(x.data(), d, ps_->get(pre + "ln1.g")->val.data(),
                                ps_->get(pre + "ln1.b")->val.data(), 1e-5f, a.data());
            matvec(a.data(), ps_->get(pre + "attn.wq")->val, ps_->get(pre + "attn.bq")->val, q.data());
            matvec(a.data(), ps_->get(pre + "attn.wk")->val, ps_->get(pre + "attn.bk")->val, kv.data());
            matvec(a.data(), ps_->get(pre + "attn.wv")->val, ps_->get(pre + "attn.bv")->val, vv.data());
            st.kcache.insert(st.kcache.end(), kv.begin(), kv.end());
            st.vcache.insert(st.vcache.end(), vv.begin(), vv.end());
            st.frames += 1;
            for (int h = 0; h < heads; ++h)
                kern::attend_row(att.data() + h * dh, q.data() + h * dh,
                                 st.kcache.data() + h * dh, st.vcache.data() + h * dh,
                                 st.frames - 1, dh, d, nullptr);
            matvec(att.data(), ps_->get(pre + "attn.wo")->val, ps_->get(pre + "attn.bo")->val, tmp.data());
            for (int64_t i = 0; i < d; ++i) x[size_t(i)] += tmp[size_t(i)];
            kern::layernorm_row(x.data(), d, ps_->get(pre + "ln2.g")->val.data(),
                                ps_->get(pre + "ln2.b")->val.data(), 1e-5f, a.data());
            matvec(a.data(), ps_->get(pre + "ff1.w")->val, ps_->get(pre + "ff1.b")->val, f1.data());
            for (int64_t i = 0; i < ff; ++i) f1[size_t(i)] = kern::gelu_scalar(f1[size_t(i)]);
            matvec(f1.data(), ps_->get(pre + "ff2.w")->val, ps_->get(pre + "ff2.b")->val, tmp.data());
            for (int64_t i = 0; i < d; ++i) x[size_t(i)] += tmp[size_t(i)];
        }
        kern::layernorm_row(x.data(), d, ps_->get(side_ + ".ln_f.g")->val.data(),
                            ps_->get(side_ + ".ln_f.b")->val.data(), 1e-5f, out.data() + row * d);
        ++pos_;
    }
    return out;
}

// ---- streaming encoder / decoder ----

void stream_encoder::bind(const param_store & ps, const validated_config & cfg) {
    cfg_ = &cfg;
    conv_in_.bind(ps.get("enc.conv_in.w"), ps.get("enc.conv_in.b"), 1);
    stages_.clear();
    for (size_t i = 0; i < cfg.seanet_ratios.size(); ++i) {
        const std::string pre = "enc.stage" + std::to_string(i) + ".";
        stage s;
        s.res1.bind(ps.get(pre + "res1.w"), ps.get(pre + "res1.b"), 1);
        s.res2.bind(ps.get(pre + "res2.w"), ps.get(pre + "res2.b"), 1);
        s.down.bind(ps.get(pre + "down.w"), ps.get(pre + "down.b"), cfg.seanet_ratios[i]);
        stages_.push_back(std::move(s));
    }
    extra_.bind(ps.get("enc.extra.w"), ps.get("enc.extra.b"), cfg.extra_downsample);
    conv_out_.bind(ps.get("enc.conv_out.w"), ps.get("enc.conv_out.b"), 1);
}

void stream_encoder::reset() {
    conv_in_.reset();
    for (auto & s : stages_) { s.res1.reset(); s.res2.reset(); s.down.reset(); }
    extra_.reset();
    conv_out_.reset();
}

namespace {

std::vector<float> elu_rows(std::vector<float> v) {
    for (auto & x : v) x = kern::elu_scalar(x);
    return v;
}

} // namespace

std::vector<float> stream_encoder::process(const float * samples, int64_t n_samples) {
    if (n_samples % cfg_->hop != 0) fail(err::shape_mismatch, "stream_encoder: chunk must be hop-aligned");
    if (n_samples == 0) return {};
    std::vector<float> x = conv_in_.process(samples, n_samples);
    int64_t t = n_samples;
    for (auto & s : stages_) {
        std::vector<float> h = s.res1.process(elu_rows(x).data(), t);
        h = s.res2.process(elu_rows(std::move(h)).data(), t);
        for (size_t i = 0; i < x.size(); ++i) x[i] += h[i];
        x = s.down.process(elu_rows(std::move(x)).data(), t);
        t /= s.down.stride;
    }
    x = extra_.process(elu_rows(std::move(x)).data(), t);
    t /= cfg_->extra_downsample;
    x = conv_out_.process(elu_rows(std::move(x)).data(), t);
    return x;
}

void stream_decoder::bind(const param_store & ps, const validated_config & cfg) {
    cfg_ = &cfg;
    conv_in_.bind(ps.get("dec.conv_in.w"), ps.get("dec.conv_in.b"), 1);
    extra_.bind(ps.get("dec.extra.w"), ps.get("dec.extra.b"), cfg.extra_downsample);
    stages_.clear();
    for (int i = int(cfg.seanet_ratios.size()) - 1; i >= 0; --i) {
        const std::string pre = "dec.stage" + std::to_string(i) + ".";
        stage s;
        s.up.bind(ps.get(pre + "up.w"), ps.get(pre + "up.b"), cfg.seanet_ratios[size_t(i)]);
        s.res1.bind(ps.get(pre + "res1.w"), ps.get(pre + "res1.b"), 1);
        s.res2.bind(ps.get(pre + "res2.w"), ps.get(pre + "res2.b"), 1);
        stages_.push_back(std::move(s));
    }
    conv_out_.bind(ps.get("dec.conv_out.w"), ps.get("dec.conv_out.b"), 1);
}

void stream_decoder::reset() {
    conv_in_.reset();
    extra_.reset();
    for (auto & s : stages_) { s.up.reset(); s.res1.reset(); s.res2.reset(); }
    conv_out_.reset();
}

std::vector<float> stream_decoder::process(const float * latents, int64_t frames) {
    if (frames == 0) return {};
    std::vector<float> x = conv_in_.process(latents, frames);
    int64_t t = frames;
    x = extra_.process(elu_rows(std::move(x)).data(), t);
    t *= cfg_->extra_downsample;
    for (auto & s : stages_) {
        x = s.up.process(elu_rows(std::move(x)).data(), t);
        t *= s.up.stride;
        std::vector<float> h = s.res1.process(elu_rows(x).data(), t);
        h = s.res2.process(elu_rows(std::move(h)).data(), t);
        for (size_t i = 0; i < x.size(); ++i) x[i] += h[i];
    }
    x = conv_out_.process(elu_rows(std::move(x)).data(), t);
    for (auto & v : x) v = std::tanh(v);
    return x;
}

} // namespace omnicodec
