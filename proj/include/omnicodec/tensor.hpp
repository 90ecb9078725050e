#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

// minimal reverse-mode autodiff over row-major float tensors. eager ops
// build the graph through shared_ptr parents; backward() walks creation
// order in reverse. parameters are leaves with needs_grad=true; a no_grad
// scope turns recording off (inference / stop-gradient branches).

namespace omnicodec {

struct tensor {
    std::vector<int64_t> shape;
    std::vector<float> v;

    tensor() = default;
    explicit tensor(std::vector<int64_t> s) : shape(std::move(s)) { v.assign(size_t(numel_of(shape)), 0.0f); }
    tensor(std::vector<int64_t> s, std::vector<float> data) : shape(std::move(s)), v(std::move(data)) {}

    static int64_t numel_of(const std::vector<int64_t> & s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }
    int64_t numel() const { return int64_t(v.size()); }
    int64_t dim(int i) const { return shape[size_t(i)]; }
    float * data() { return v.data(); }
    const float * data() const { return v.data(); }
    void fill(float x) { std::fill(v.begin(), v.end(), x); }
};

class node;
using var = std::shared_ptr<node>;

class node {
  public:
    tensor val;
    tensor grad; // lazily allocated, same shape as val
    bool needs_grad = false;
    uint64_t id = 0;
    std::vector<var> parents;
    std::function<void(node &)> backward_fn;

    tensor & g() {
        if (grad.v.empty() && val.numel() > 0) {
            grad.shape = val.shape;
            grad.v.assign(size_t(val.numel()), 0.0f);
        }
        grad.shape = val.shape;
        return grad;
    }
    void zero_grad() {
        if (!grad.v.empty()) std::fill(grad.v.begin(), grad.v.end(), 0.0f);
    }
    float scalar() const { return val.v.at(0); }
};

namespace ad {

bool grad_enabled();

struct no_grad_guard {
    no_grad_guard();
    ~no_grad_guard();
    bool prev;
};

var leaf(tensor t, bool requires_grad = false);
var constant(tensor t);

// runs reverse pass from a scalar loss; accumulates into leaf/param grads
void backward(const var & loss);

// ---- elementwise / structural ----
var add(const var & a, const var & b);
var sub(const var & a, const var & b);
var mul(const var & a, const var & b);
var scale(const var & a, float s);
var detach(const var & a);
var reshape(const var & a, std::vector<int64_t> shape);
var slice_rows(const var & a, int64_t start, int64_t len);
var relu(const var & a);
var leaky_relu(const var & a, float slope);
var elu(const var & a);
var gelu(const var & a);
var tanh_act(const var & a);
var log_eps(const var & a, float eps);
var sqrt_eps(const var & a, float eps);
// value = q (constant), gradient passes through to x unchanged
var straight_through(const var & x, const tensor & q);

// ---- linear algebra ----
var matmul(const var & a, const var & b);                      // [m,k].[k,n]
var linear(const var & x, const var & w, const var & b);       // [t,in].[in,out]+[out]
var layernorm(const var & x, const var & gamma, const var & beta, float eps = 1e-5f);
var embedding(const std::vector<int32_t> & ids, const var & table);
// fused multi-head causal attention over q,k,v of shape [t, dim]
var causal_attention(const var & q, const var & k, const var & v, int heads);

// ---- convolutions (causal, left-padded internally by k - stride) ----
var conv1d(const var & x, const var & w, const var & b, int stride);   // w [cout,k,cin]
var convtr1d(const var & x, const var & w, const var & b, int stride); // w [cin,k,cout]
// 2-d conv for the spectrogram discriminators; x [c,h,w], w [co,ci,kh,kw]
var conv2d(const var & x, const var & w, const var & b, int stride_h, int stride_w);

// ---- reductions / losses (all return scalars, shape {1}) ----
var sum_all(const var & a);
var mean_all(const var & a);
var mse_mean_all(const var & a, const var & b);
var mse_sumdim_meanframes(const var & a, const var & b); // mean over rows, sum over cols
var l1_mean_all(const var & a, const var & b);
var cross_entropy(const var & logits, const std::vector<int32_t> & targets);
// weighted sum of scalar losses, accumulated in double
var weighted_sum(const std::vector<std::pair<var, double>> & parts);

// short-time power spectrum [frames, win/2+1] of a 1-d signal [t];
// frame f covers samples [f*hop, f*hop+win), hann window applied
var stft_power(const var & x, int win, int hop);

} // namespace ad

} // namespace omnicodec
