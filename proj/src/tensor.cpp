#include "omnicodec/tensor.hpp"

#include "omnicodec/errors.hpp"
#include "omnicodec/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <unordered_set>

namespace omnicodec::ad {

namespace {

std::atomic<uint64_t> g_next_id{1};
thread_local bool g_grad_enabled = true;

var make_node(tensor val) {
    auto n = std::make_shared<node>();
    n->val = std::move(val);
    n->id = g_next_id.fetch_add(1);
    return n;
}

var make_op(tensor val, std::vector<var> parents, std::function<void(node &)> bwd) {
    var n = make_node(std::move(val));
    bool any = false;
    if (g_grad_enabled)
        for (const auto & p : parents)
            if (p && p->needs_grad) { any = true; break; }
    if (any) {
        n->needs_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(bwd);
    }
    return n;
}

void check_same_shape(const var & a, const var & b, const char * op) {
    if (a->val.shape != b->val.shape)
        fail(err::shape_mismatch, std::string(op) + ": operand shapes differ");
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }
no_grad_guard::no_grad_guard() : prev(g_grad_enabled) { g_grad_enabled = false; }
no_grad_guard::~no_grad_guard() { g_grad_enabled = prev; }

var leaf(tensor t, bool requires_grad) {
    var n = make_node(std::move(t));
    n->needs_grad = requires_grad;
    return n;
}

var constant(tensor t) { return leaf(std::move(t), false); }

void backward(const var & loss) {
    if (loss->val.numel() != 1) fail(err::shape_mismatch, "backward: loss must be scalar");
    std::vector<node *> order;
    std::unordered_set<node *> seen;
    std::vector<node *> stack{loss.get()};
    while (!stack.empty()) {
        node * n = stack.back();
        stack.pop_back();
        if (!n || !n->needs_grad || seen.count(n)) continue;
        seen.insert(n);
        order.push_back(n);
        for (const auto & p : n->parents) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(), [](node * a, node * b) { return a->id > b->id; });
    loss->g().v[0] += 1.0f;
    for (node * n : order)
        if (n->backward_fn) n->backward_fn(*n);
}

// ---- elementwise ----

var add(const var & a, const var & b) {
    check_same_shape(a, b, "add");
    tensor out = a->val;
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.v[size_t(i)] += b->val.v[size_t(i)];
    return make_op(std::move(out), {a, b}, [a, b](node & self) {
        const int64_t n = self.val.numel();
        if (a->needs_grad) {
            float * ga = a->g().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += self.grad.v[size_t(i)];
        }
        if (b->needs_grad) {
            float * gb = b->g().data();
            for (int64_t i = 0; i < n; ++i) gb[i] += self.grad.v[size_t(i)];
        }
    });
}

var sub(const var & a, const var & b) {
    check_same_shape(a, b, "sub");
    tensor out = a->val;
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.v[size_t(i)] -= b->val.v[size_t(i)];
    return make_op(std::move(out), {a, b}, [a, b](node & self) {
        const int64_t n = self.val.numel();
        if (a->needs_grad) {
            float * ga = a->g().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += self.grad.v[size_t(i)];
        }
        if (b->needs_grad) {
            float * gb = b->g().data();
            for (int64_t i = 0; i < n; ++i) gb[i] -= self.grad.v[size_t(i)];
        }
    });
}

var mul(const var & a, const var & b) {
    check_same_shape(a, b, "mul");
    tensor out = a->val;
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out.v[size_t(i)] *= b->val.v[size_t(i)];
    return make_op(std::move(out), {a, b}, [a, b](node & self) {
        const int64_t n = self.val.numel();
        if (a->needs_grad) {
            float * ga = a->g().data();
            for (int64_t i = 0; i < n; ++i) ga[i] += self.grad.v[size_t(i)] * b->val.v[size_t(i)];
        }
        if (b->needs_grad) {
            float * gb = b->g().data();
            for (int64_t i = 0; i < n; ++i) gb[i] += self.grad.v[size_t(i)] * a->val.v[size_t(i)];
        }
    });
}

var scale(const var & a, float s) {
    tensor out = a->val;
    for (auto & x : out.v) x *= s;
    return make_op(std::move(out), {a}, [a, s](node & self) {
        float * ga = a->g().data();
        const int64_t n = self.val.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += self.grad.v[size_t(i)] * s;
    });
}

var detach(const var & a) { return constant(a->val); }

var reshape(const var & a, std::vector<int64_t> shape) {
    if (tensor::numel_of(shape) != a->val.numel()) fail(err::shape_mismatch, "reshape: numel changed");
    tensor out(std::move(shape), a->val.v);
    return make_op(std::move(out), {a}, [a](node & self) {
        float * ga = a->g().data();
        const int64_t n = self.val.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += self.grad.v[size_t(i)];
    });
}

var slice_rows(const var & a, int64_t start, int64_t len) {
    const int64_t rows = a->val.dim(0);
    const int64_t cols = a->val.numel() / std::max<int64_t>(rows, 1);
    if (start < 0 || start + len > rows) fail(err::shape_mismatch, "slice_rows: out of range");
    std::vector<int64_t> shape = a->val.shape;
    shape[0] = len;
    tensor out(shape);
    std::memcpy(out.data(), a->val.data() + start * cols, size_t(len * cols) * sizeof(float));
    return make_op(std::move(out), {a}, [a, start, cols](node & self) {
        float * ga = a->g().data() + start * cols;
        const int64_t n = self.val.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += self.grad.v[size_t(i)];
    });
}

namespace {

template <typename F, typename DF>
var unary_op(const var & a, F f, DF df) {
    tensor out = a->val;
    const int64_t n = out.numel();
#pragma omp parallel for schedule(static) if (n > 16384)
    for (int64_t i = 0; i < n; ++i) out.v[size_t(i)] = f(a->val.v[size_t(i)]);
    return make_op(std::move(out), {a}, [a, df](node & self) {
        float * ga = a->g().data();
        const int64_t n = self.val.numel();
        for (int64_t i = 0; i < n; ++i)
            ga[i] += self.grad.v[size_t(i)] * df(a->val.v[size_t(i)], self.val.v[size_t(i)]);
    });
}

} // namespace

var relu(const var & a) {
    return unary_op(a, [](float x) { return x > 0 ? x : 0.0f; },
                    [](float x, float) { return x > 0 ? 1.0f : 0.0f; });
}

var leaky_relu(const var & a, float slope) {
    return unary_op(a, [slope](float x) { return x > 0 ? x : slope * x; },
                    [slope](float x, float) { return x > 0 ? 1.0f : slope; });
}

var elu(const var & a) {
    return unary_op(a, [](float x) { return x > 0 ? x : std::expm1(x); },
                    [](float x, float y) { return x > 0 ? 1.0f : y + 1.0f; });
}

var gelu(const var & a) {
    const float inv_sqrt2 = 0.70710678118654752440f;
    return unary_op(a,
                    [inv_sqrt2](float x) { return 0.5f * x * (1.0f + std::erf(x * inv_sqrt2)); },
                    [inv_sqrt2](float x, float) {
                        const float cdf = 0.5f * (1.0f + std::erf(x * inv_sqrt2));
                        const float pdf = 0.3989422804014327f * std::exp(-0.5f * x * x);
                        return cdf + x * pdf;
                    });
}

var tanh_act(const var & a) {
    return unary_op(a, [](float x) { return std::tanh(x); },
                    [](float, float y) { return 1.0f - y * y; });
}

var log_eps(const var & a, float eps) {
    return unary_op(a, [eps](float x) { return std::log(x + eps); },
                    [eps](float x, float) { return 1.0f / (x + eps); });
}

var sqrt_eps(const var & a, float eps) {
    return unary_op(a, [eps](float x) { return std::sqrt(x + eps); },
                    [](float, float y) { return 0.5f / y; });
}

var straight_through(const var & x, const tensor & q) {
    if (q.shape != x->val.shape) fail(err::shape_mismatch, "straight_through: shape differs");
    return make_op(q, {x}, [x](node & self) {
        float * gx = x->g().data();
        const int64_t n = self.val.numel();
        for (int64_t i = 0; i < n; ++i) gx[i] += self.grad.v[size_t(i)];
    });
}

// ---- linear algebra ----

var matmul(const var & a, const var & b) {
    const int64_t m = a->val.dim(0), k = a->val.dim(1);
    if (b->val.dim(0) != k) fail(err::shape_mismatch, "matmul: inner dims differ");
    const int64_t n = b->val.dim(1);
    tensor out({m, n});
    kern::par::matmul(out.data(), a->val.data(), b->val.data(), m, k, n, false, false);
    return make_op(std::move(out), {a, b}, [a, b, m, k, n](node & self) {
        if (a->needs_grad) {
            tensor da({m, k});
            kern::par::matmul(da.data(), self.grad.data(), b->val.data(), m, n, k, false, true);
            float * ga = a->g().data();
            for (int64_t i = 0; i < m * k; ++i) ga[i] += da.v[size_t(i)];
        }
        if (b->needs_grad) {
            tensor db({k, n});
            kern::par::matmul(db.data(), a->val.data(), self.grad.data(), k, m, n, true, false);
            float * gb = b->g().data();
            for (int64_t i = 0; i < k * n; ++i) gb[i] += db.v[size_t(i)];
        }
    });
}

var linear(const var & x, const var & w, const var & b) {
    const int64_t t = x->val.dim(0), in = x->val.dim(1);
    if (w->val.dim(0) != in) fail(err::dim_mismatch, "linear: weight rows != input dim");
    const int64_t out_dim = w->val.dim(1);
    tensor out({t, out_dim});
    kern::par::matmul(out.data(), x->val.data(), w->val.data(), t, in, out_dim, false, false);
    if (b) {
        for (int64_t r = 0; r < t; ++r)
            for (int64_t c = 0; c < out_dim; ++c) out.v[size_t(r * out_dim + c)] += b->val.v[size_t(c)];
    }
    std::vector<var> parents = b ? std::vector<var>{x, w, b} : std::vector<var>{x, w};
    return make_op(std::move(out), std::move(parents), [x, w, b, t, in, out_dim](node & self) {
        if (x->needs_grad) {
            tensor dx({t, in});
            kern::par::matmul(dx.data(), self.grad.data(), w->val.data(), t, out_dim, in, false, true);
            float * gx = x->g().data();
            for (int64_t i = 0; i < t * in; ++i) gx[i] += dx.v[size_t(i)];
        }
        if (w->needs_grad) {
            tensor dw({in, out_dim});
            kern::par::matmul(dw.data(), x->val.data(), self.grad.data(), in, t, out_dim, true, false);
            float * gw = w->g().data();
            for (int64_t i = 0; i < in * out_dim; ++i) gw[i] += dw.v[size_t(i)];
        }
        if (b && b->needs_grad) {
            float * gb = b->g().data();
            for (int64_t r = 0; r < t; ++r)
                for (int64_t c = 0; c < out_dim; ++c) gb[c] += self.grad.v[size_t(r * out_dim + c)];
        }
    });
}

var layernorm(const var & x, const var & gamma, const var & beta, float eps) {
    const int64_t t = x->val.dim(0), d = x->val.dim(1);
    tensor out({t, d});
    tensor stats({t, 2}); // mean, inv_std per row
    for (int64_t r = 0; r < t; ++r) {
        kern::layernorm_row(x->val.data() + r * d, d, gamma->val.data(), beta->val.data(), eps,
                            out.data() + r * d,
                            &stats.v[size_t(r * 2 + 0)], &stats.v[size_t(r * 2 + 1)]);
    }
    return make_op(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, t, d, stats](node & self) {
        for (int64_t r = 0; r < t; ++r) {
            const float * xr = x->val.data() + r * d;
            const float * gr = self.grad.data() + r * d;
            const float mean = stats.v[size_t(r * 2 + 0)];
            const float inv_std = stats.v[size_t(r * 2 + 1)];
            // dxhat = g * gamma; dx = inv_std*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
            double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
            for (int64_t i = 0; i < d; ++i) {
                const float xhat = (xr[i] - mean) * inv_std;
                const float dxhat = gr[i] * gamma->val.v[size_t(i)];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += double(dxhat) * xhat;
            }
            const float m1 = float(sum_dxhat / double(d));
            const float m2 = float(sum_dxhat_xhat / double(d));
            if (x->needs_grad) {
                float * gx = x->g().data() + r * d;
                for (int64_t i = 0; i < d; ++i) {
                    const float xhat = (xr[i] - mean) * inv_std;
                    const float dxhat = gr[i] * gamma->val.v[size_t(i)];
                    gx[i] += inv_std * (dxhat - m1 - xhat * m2);
                }
            }
            if (gamma->needs_grad) {
                float * gg = gamma->g().data();
                for (int64_t i = 0; i < d; ++i)
                    gg[i] += gr[i] * (xr[i] - mean) * inv_std;
            }
            if (beta->needs_grad) {
                float * gb = beta->g().data();
                for (int64_t i = 0; i < d; ++i) gb[i] += gr[i];
            }
        }
    });
}

var embedding(const std::vector<int32_t> & ids, const var & table) {
    const int64_t t = int64_t(ids.size());
    const int64_t v_size = table->val.dim(0), d = table->val.dim(1);
    tensor out({t, d});
    for (int64_t r = 0; r < t; ++r) {
        const int32_t id = ids[size_t(r)];
        if (id < 0 || id >= v_size) fail(err::token_out_of_range, "embedding index out of range");
        std::memcpy(out.data() + r * d, table->val.data() + int64_t(id) * d, size_t(d) * sizeof(float));
    }
    return make_op(std::move(out), {table}, [ids, table, d](node & self) {
        float * gt = table->g().data();
        const int64_t t = self.val.dim(0);
        for (int64_t r = 0; r < t; ++r)
            kern::axpy(gt + int64_t(ids[size_t(r)]) * d, 1.0f, self.grad.data() + r * d, d);
    });
}

var causal_attention(const var & q, const var & k, const var & v, int heads) {
    const int64_t t = q->val.dim(0), dim = q->val.dim(1);
    if (dim % heads != 0) fail(err::dim_mismatch, "attention: dim % heads != 0");
    const int64_t dh = dim / heads;
    tensor out({t, dim});
    auto probs = std::make_shared<tensor>(std::vector<int64_t>{int64_t(heads), t, t});
#pragma omp parallel for schedule(static) collapse(2)
    for (int h = 0; h < heads; ++h)
        for (int64_t tt = 0; tt < t; ++tt)
            kern::attend_row(out.data() + tt * dim + h * dh,
                             q->val.data() + tt * dim + h * dh,
                             k->val.data() + h * dh,
                             v->val.data() + h * dh,
                             tt, dh, dim,
                             probs->data() + (int64_t(h) * t + tt) * t);
    return make_op(std::move(out), {q, k, v}, [q, k, v, heads, t, dim, dh, probs](node & self) {
        const float scale_f = 1.0f / std::sqrt(float(dh));
        float * gq = q->g().data();
        float * gk = k->g().data();
        float * gv = v->g().data();
#pragma omp parallel for schedule(static)
        for (int h = 0; h < heads; ++h) {
            const int64_t off = int64_t(h) * dh;
            std::vector<float> dscore;
            for (int64_t tt = 0; tt < t; ++tt) {
                const float * dout = self.grad.data() + tt * dim + off;
                const float * p = probs->data() + (int64_t(h) * t + tt) * t;
                dscore.assign(size_t(tt) + 1, 0.0f);
                double sum_pd = 0.0;
                for (int64_t u = 0; u <= tt; ++u) {
                    // dv[u] += p_u * dout ; ds_u = dout . v_u
                    kern::axpy(gv + u * dim + off, p[u], dout, dh);
                    dscore[size_t(u)] = kern::dot(dout, v->val.data() + u * dim + off, dh);
                    sum_pd += double(p[u]) * dscore[size_t(u)];
                }
                for (int64_t u = 0; u <= tt; ++u) {
                    const float ds = p[u] * (dscore[size_t(u)] - float(sum_pd)) * scale_f;
                    kern::axpy(gq + tt * dim + off, ds, k->val.data() + u * dim + off, dh);
                    kern::axpy(gk + u * dim + off, ds, q->val.data() + tt * dim + off, dh);
                }
            }
        }
    });
}

// ---- convolutions ----

var conv1d(const var & x, const var & w, const var & b, int stride) {
    const int64_t t = x->val.dim(0), cin = x->val.dim(1);
    const int64_t cout = w->val.dim(0), k = w->val.dim(1);
    if (w->val.dim(2) != cin) fail(err::dim_mismatch, "conv1d: channel mismatch");
    if (t % stride != 0) fail(err::shape_mismatch, "conv1d: frames not divisible by stride");
    const int64_t pad = k - stride;
    if (pad < 0) fail(err::shape_mismatch, "conv1d: kernel smaller than stride");
    kern::conv_dims d{t / stride, stride, int(k), int(cin), int(cout)};
    tensor xp({t + pad, cin});
    std::memcpy(xp.data() + pad * cin, x->val.data(), size_t(t * cin) * sizeof(float));
    tensor out({d.t_out, cout});
    kern::par::conv1d_fwd(out.data(), xp.data(), w->val.data(), b ? b->val.data() : nullptr, d);
    auto xp_holder = std::make_shared<tensor>(std::move(xp));
    std::vector<var> parents = b ? std::vector<var>{x, w, b} : std::vector<var>{x, w};
    return make_op(std::move(out), std::move(parents), [x, w, b, d, pad, cin, xp_holder](node & self) {
        if (x->needs_grad) {
            tensor dxp({d.t_out * d.stride + pad, cin});
            kern::par::conv1d_bwd_input(dxp.data(), dxp.dim(0), self.grad.data(), w->val.data(), d);
            float * gx = x->g().data();
            const int64_t n = d.t_out * d.stride * cin;
            const float * src = dxp.data() + pad * cin;
            for (int64_t i = 0; i < n; ++i) gx[i] += src[i];
        }
        if (w->needs_grad)
            kern::par::conv1d_bwd_weight(w->g().data(), (b && b->needs_grad) ? b->g().data() : nullptr,
                                         self.grad.data(), xp_holder->data(), d);
    });
}

var convtr1d(const var & x, const var & w, const var & b, int stride) {
    const int64_t t = x->val.dim(0), cin = x->val.dim(1);
    if (w->val.dim(0) != cin) fail(err::dim_mismatch, "convtr1d: channel mismatch");
    const int64_t k = w->val.dim(1), cout = w->val.dim(2);
    kern::conv_dims d{t, stride, int(k), int(cin), int(cout)};
    tensor out({t * stride, cout});
    if (t > 0)
        kern::par::convtr1d_fwd(out.data(), x->val.data(), w->val.data(), b ? b->val.data() : nullptr, d);
    std::vector<var> parents = b ? std::vector<var>{x, w, b} : std::vector<var>{x, w};
    return make_op(std::move(out), std::move(parents), [x, w, b, d](node & self) {
        if (d.t_out == 0) return;
        if (x->needs_grad)
            kern::par::convtr1d_bwd_input(x->g().data(), self.grad.data(), w->val.data(), d);
        if (w->needs_grad)
            kern::par::convtr1d_bwd_weight(w->g().data(), (b && b->needs_grad) ? b->g().data() : nullptr,
                                           self.grad.data(), x->val.data(), d);
    });
}

var conv2d(const var & x, const var & w, const var & b, int stride_h, int stride_w) {
    const int64_t ci = x->val.dim(0), hh = x->val.dim(1), ww = x->val.dim(2);
    const int64_t co = w->val.dim(0), kh = w->val.dim(2), kw = w->val.dim(3);
    if (w->val.dim(1) != ci) fail(err::dim_mismatch, "conv2d: channel mismatch");
    const int64_t ph = kh / 2, pw = kw / 2;
    const int64_t oh = (hh + 2 * ph - kh) / stride_h + 1;
    const int64_t ow = (ww + 2 * pw - kw) / stride_w + 1;
    if (oh <= 0 || ow <= 0) fail(err::shape_mismatch, "conv2d: output collapsed to zero");
    tensor out({co, oh, ow});
    const float * xv = x->val.data();
    const float * wv = w->val.data();
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t c = 0; c < co; ++c)
        for (int64_t i = 0; i < oh; ++i)
            for (int64_t j = 0; j < ow; ++j) {
                float acc = b ? b->val.v[size_t(c)] : 0.0f;
                for (int64_t cc = 0; cc < ci; ++cc)
                    for (int64_t a = 0; a < kh; ++a) {
                        const int64_t ii = i * stride_h + a - ph;
                        if (ii < 0 || ii >= hh) continue;
                        for (int64_t bb = 0; bb < kw; ++bb) {
                            const int64_t jj = j * stride_w + bb - pw;
                            if (jj < 0 || jj >= ww) continue;
                            acc += xv[(cc * hh + ii) * ww + jj] * wv[((c * ci + cc) * kh + a) * kw + bb];
                        }
                    }
                out.v[size_t((c * oh + i) * ow + j)] = acc;
            }
    std::vector<var> parents = b ? std::vector<var>{x, w, b} : std::vector<var>{x, w};
    return make_op(std::move(out), std::move(parents),
                   [x, w, b, ci, hh, ww, co, kh, kw, ph, pw, oh, ow, stride_h, stride_w](node & self) {
        const float * gy = self.grad.data();
        if (x->needs_grad) {
            float * gx = x->g().data();
            const float * wv = w->val.data();
#pragma omp parallel for schedule(static)
            for (int64_t cc = 0; cc < ci; ++cc)
                for (int64_t c = 0; c < co; ++c)
                    for (int64_t i = 0; i < oh; ++i)
                        for (int64_t a = 0; a < kh; ++a) {
                            const int64_t ii = i * stride_h + a - ph;
                            if (ii < 0 || ii >= hh) continue;
                            for (int64_t j = 0; j < ow; ++j)
                                for (int64_t bb = 0; bb < kw; ++bb) {
                                    const int64_t jj = j * stride_w + bb - pw;
                                    if (jj < 0 || jj >= ww) continue;
                                    gx[(cc * hh + ii) * ww + jj] +=
                                        gy[(c * oh + i) * ow + j] * wv[((c * ci + cc) * kh + a) * kw + bb];
                                }
                        }
        }
        if (w->needs_grad) {
            float * gw = w->g().data();
            const float * xv = x->val.data();
#pragma omp parallel for schedule(static)
            for (int64_t c = 0; c < co; ++c)
                for (int64_t cc = 0; cc < ci; ++cc)
                    for (int64_t a = 0; a < kh; ++a)
                        for (int64_t bb = 0; bb < kw; ++bb) {
                            float acc = 0.0f;
                            for (int64_t i = 0; i < oh; ++i) {
                                const int64_t ii = i * stride_h + a - ph;
                                if (ii < 0 || ii >= hh) continue;
                                for (int64_t j = 0; j < ow; ++j) {
                                    const int64_t jj = j * stride_w + bb - pw;
                                    if (jj < 0 || jj >= ww) continue;
                                    acc += gy[(c * oh + i) * ow + j] * xv[(cc * hh + ii) * ww + jj];
                                }
                            }
                            gw[((c * ci + cc) * kh + a) * kw + bb] += acc;
                        }
        }
        if (b && b->needs_grad) {
            float * gb = b->g().data();
            for (int64_t c = 0; c < co; ++c) {
                float acc = 0.0f;
                for (int64_t i = 0; i < oh * ow; ++i) acc += gy[c * oh * ow + i];
                gb[c] += acc;
            }
        }
    });
}

// ---- reductions / losses ----

var sum_all(const var & a) {
    double acc = 0.0;
    for (float x : a->val.v) acc += x;
    tensor out({1});
    out.v[0] = float(acc);
    return make_op(std::move(out), {a}, [a](node & self) {
        const float g = self.grad.v[0];
        float * ga = a->g().data();
        const int64_t n = a->val.numel();
        for (int64_t i = 0; i < n; ++i) ga[i] += g;
    });
}

var mean_all(const var & a) {
    const int64_t n = std::max<int64_t>(a->val.numel(), 1);
    return scale(sum_all(a), 1.0f / float(n));
}

var mse_mean_all(const var & a, const var & b) {
    check_same_shape(a, b, "mse_mean_all");
    const int64_t n = a->val.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double diffv = double(a->val.v[size_t(i)]) - double(b->val.v[size_t(i)]);
        acc += diffv * diffv;
    }
    tensor out({1});
    out.v[0] = n > 0 ? float(acc / double(n)) : 0.0f;
    return make_op(std::move(out), {a, b}, [a, b, n](node & self) {
        if (n == 0) return;
        const float g = self.grad.v[0] * 2.0f / float(n);
        float * ga = a->needs_grad ? a->g().data() : nullptr;
        float * gb = b->needs_grad ? b->g().data() : nullptr;
        for (int64_t i = 0; i < n; ++i) {
            const float diffv = a->val.v[size_t(i)] - b->val.v[size_t(i)];
            if (ga) ga[i] += g * diffv;
            if (gb) gb[i] -= g * diffv;
        }
    });
}

var mse_sumdim_meanframes(const var & a, const var & b) {
    check_same_shape(a, b, "mse_sumdim_meanframes");
    const int64_t t = a->val.dim(0);
    const int64_t n = a->val.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double diffv = double(a->val.v[size_t(i)]) - double(b->val.v[size_t(i)]);
        acc += diffv * diffv;
    }
    tensor out({1});
    out.v[0] = t > 0 ? float(acc / double(t)) : 0.0f;
    return make_op(std::move(out), {a, b}, [a, b, t, n](node & self) {
        if (t == 0) return;
        const float g = self.grad.v[0] * 2.0f / float(t);
        float * ga = a->needs_grad ? a->g().data() : nullptr;
        float * gb = b->needs_grad ? b->g().data() : nullptr;
        for (int64_t i = 0; i < n; ++i) {
            const float diffv = a->val.v[size_t(i)] - b->val.v[size_t(i)];
            if (ga) ga[i] += g * diffv;
            if (gb) gb[i] -= g * diffv;
        }
    });
}

var l1_mean_all(const var & a, const var & b) {
    check_same_shape(a, b, "l1_mean_all");
    const int64_t n = a->val.numel();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i)
        acc += std::abs(double(a->val.v[size_t(i)]) - double(b->val.v[size_t(i)]));
    tensor out({1});
    out.v[0] = n > 0 ? float(acc / double(n)) : 0.0f;
    return make_op(std::move(out), {a, b}, [a, b, n](node & self) {
        if (n == 0) return;
        const float g = self.grad.v[0] / float(n);
        float * ga = a->needs_grad ? a->g().data() : nullptr;
        float * gb = b->needs_grad ? b->g().data() : nullptr;
        for (int64_t i = 0; i < n; ++i) {
            const float diffv = a->val.v[size_t(i)] - b->val.v[size_t(i)];
            const float s = diffv > 0 ? 1.0f : (diffv < 0 ? -1.0f : 0.0f);
            if (ga) ga[i] += g * s;
            if (gb) gb[i] -= g * s;
        }
    });
}

var cross_entropy(const var & logits, const std::vector<int32_t> & targets) {
    const int64_t t = logits->val.dim(0), vsz = logits->val.dim(1);
    if (int64_t(targets.size()) != t) fail(err::shape_mismatch, "cross_entropy: target count");
    auto softmax = std::make_shared<tensor>(std::vector<int64_t>{t, vsz});
    double total = 0.0;
    for (int64_t r = 0; r < t; ++r) {
        const float * lr = logits->val.data() + r * vsz;
        float mx = lr[0];
        for (int64_t i = 1; i < vsz; ++i) mx = std::max(mx, lr[i]);
        double denom = 0.0;
        for (int64_t i = 0; i < vsz; ++i) denom += std::exp(double(lr[i]) - mx);
        const double lse = std::log(denom) + mx;
        total += lse - double(lr[targets[size_t(r)]]);
        float * sr = softmax->data() + r * vsz;
        for (int64_t i = 0; i < vsz; ++i) sr[i] = float(std::exp(double(lr[i]) - lse));
    }
    tensor out({1});
    out.v[0] = t > 0 ? float(total / double(t)) : 0.0f;
    return make_op(std::move(out), {logits}, [logits, targets, softmax, t, vsz](node & self) {
        if (t == 0) return;
        const float g = self.grad.v[0] / float(t);
        float * gl = logits->g().data();
        for (int64_t r = 0; r < t; ++r) {
            const float * sr = softmax->data() + r * vsz;
            for (int64_t i = 0; i < vsz; ++i) gl[r * vsz + i] += g * sr[i];
            gl[r * vsz + targets[size_t(r)]] -= g;
        }
    });
}

var weighted_sum(const std::vector<std::pair<var, double>> & parts) {
    double acc = 0.0;
    std::vector<var> parents;
    for (const auto & [p, w] : parts) {
        acc += w * double(p->scalar());
        parents.push_back(p);
    }
    tensor out({1});
    out.v[0] = float(acc);
    return make_op(std::move(out), std::move(parents), [parts](node & self) {
        const float g = self.grad.v[0];
        for (const auto & [p, w] : parts)
            if (p->needs_grad) p->g().v[0] += g * float(w);
    });
}

var stft_power(const var & x, int win, int hop) {
    const int64_t t = x->val.numel();
    const int64_t bins = win / 2 + 1;
    const int64_t frames = t >= win ? (t - win) / hop + 1 : 0;
    auto window = std::make_shared<std::vector<float>>(size_t(win));
    for (int i = 0; i < win; ++i)
        (*window)[size_t(i)] = float(0.5 - 0.5 * std::cos(2.0 * M_PI * double(i) / double(win)));
    auto plan = std::make_shared<kern::fft_plan>(win);
    tensor out({frames, bins});
#pragma omp parallel
    {
        std::vector<std::complex<double>> buf(static_cast<size_t>(win));
#pragma omp for schedule(static)
        for (int64_t f = 0; f < frames; ++f) {
            const float * xf = x->val.data() + f * hop;
            for (int i = 0; i < win; ++i) buf[size_t(i)] = {double(xf[i]) * double((*window)[size_t(i)]), 0.0};
            kern::fft_execute(*plan, buf.data(), false);
            float * orow = out.data() + f * bins;
            for (int64_t b = 0; b < bins; ++b)
                orow[b] = float(std::norm(buf[size_t(b)]));
        }
    }
    return make_op(std::move(out), {x}, [x, win, hop, frames, bins, window, plan](node & self) {
        if (frames == 0) return;
        float * gx = x->g().data();
        tensor dframes({frames, int64_t(win)});
#pragma omp parallel
        {
            std::vector<std::complex<double>> buf(static_cast<size_t>(win)), gbuf(static_cast<size_t>(win));
#pragma omp for schedule(static)
            for (int64_t f = 0; f < frames; ++f) {
                const float * xf = x->val.data() + f * hop;
                for (int i = 0; i < win; ++i)
                    buf[size_t(i)] = {double(xf[i]) * double((*window)[size_t(i)]), 0.0};
                kern::fft_execute(*plan, buf.data(), false);
                const float * grow = self.grad.data() + f * bins;
                for (int i = 0; i < win; ++i) gbuf[size_t(i)] = {0.0, 0.0};
                for (int64_t b = 0; b < bins; ++b) {
                    // d|c|^2 = 2 re dre + 2 im dim
                    gbuf[size_t(b)] = 2.0 * double(grow[b]) * buf[size_t(b)];
                }
                // adjoint of the restricted DFT: Re(sum_b G_b e^{+2pi i b n / N})
                kern::fft_execute(*plan, gbuf.data(), true);
                float * dfr = dframes.data() + f * win;
                for (int i = 0; i < win; ++i)
                    dfr[i] = float(gbuf[size_t(i)].real()) * (*window)[size_t(i)];
            }
        }
        // overlap-add in frame order (frames overlap when hop < win)
        for (int64_t f = 0; f < frames; ++f)
            kern::axpy(gx + f * hop, 1.0f, dframes.data() + f * win, win);
    });
}

} // namespace omnicodec::ad
