#ifndef VOXSEQ_SSM_HPP
#define VOXSEQ_SSM_HPP

#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "voxseq/grid.hpp"
#include "voxseq/rng.hpp"

namespace voxseq {

template <class T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <class T>
inline T silu(T x) {
    return x * sigmoid(x);
}

template <class T>
inline T silu_grad(T x) {
    const T s = sigmoid(x);
    return s * (T(1) + x * (T(1) - s));
}

template <class T>
inline T softplus(T x) {
    return x > T(20) ? x : std::log1p(std::exp(x));
}

// Learnable symbols of the selective SSM. The state matrix is diagonal per
// channel, parameterized as A = -exp(a_log) so it stays strictly negative.
template <class T>
struct SsmParamsT {
    int64_t channels = 0;   // c
    int64_t state_dim = 0;  // s
    bool selective = true;

    std::vector<T> a_log;  // c*s

    // Selective mode: per-token B, C and step size derived from the input.
    std::vector<T> w_b;         // c*s
    std::vector<T> w_c;         // c*s
    std::vector<T> w_delta;     // c
    std::vector<T> bias_delta;  // 1

    // Fixed mode: constants shared across tokens and channels.
    std::vector<T> b_fixed;      // s
    std::vector<T> c_fixed;      // s
    std::vector<T> delta_fixed;  // 1

    template <class U>
    SsmParamsT<U> cast() const {
        SsmParamsT<U> o;
        o.channels = channels;
        o.state_dim = state_dim;
        o.selective = selective;
        auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
        o.a_log = conv(a_log);
        o.w_b = conv(w_b);
        o.w_c = conv(w_c);
        o.w_delta = conv(w_delta);
        o.bias_delta = conv(bias_delta);
        o.b_fixed = conv(b_fixed);
        o.c_fixed = conv(c_fixed);
        o.delta_fixed = conv(delta_fixed);
        return o;
    }
};

using SsmParams = SsmParamsT<double>;

template <class T, class F>
void for_each_tensor(SsmParamsT<T>& p, F&& f) {
    f(p.a_log);
    f(p.w_b);
    f(p.w_c);
    f(p.w_delta);
    f(p.bias_delta);
    f(p.b_fixed);
    f(p.c_fixed);
    f(p.delta_fixed);
}

SsmParams init_ssm_params(int64_t channels, int64_t state_dim, Rng& rng);

// Zero-order hold on the diagonal A, first-order rule on B:
// abar = exp(delta*A), bbar = delta*B, per channel.
struct Discretized {
    std::vector<double> a_bar;  // c*s
    std::vector<double> b_bar;  // c*s
};
Discretized discretize(const SsmParams& params, const std::vector<double>& delta_per_channel);

// Saved forward state for the backward passes.
struct ScanCtx {
    std::vector<double> h;  // b*n*c*s, hidden state after every step
};

struct SelectiveSsmCtx {
    std::vector<double> h;       // b*n*c*s
    std::vector<double> delta;   // b*n
    std::vector<double> p_raw;   // b*n, pre-softplus step logits
    std::vector<double> b_proj;  // b*n*s
    std::vector<double> c_proj;  // b*n*s
};

// h_k = abar ⊙ h_{k-1} + bbar * x_k, y_k = <cbar, h_k>, fixed matrices c*s.
SequenceTensor ssm_scan(const std::vector<double>& a_bar, const std::vector<double>& b_bar,
                        const std::vector<double>& c_bar, const SequenceTensor& x,
                        ScanCtx* ctx = nullptr);

struct ScanGrads {
    std::vector<double> d_a_bar, d_b_bar, d_c_bar;  // c*s
    SequenceTensor d_x;
};
ScanGrads ssm_scan_backward(const std::vector<double>& a_bar, const std::vector<double>& b_bar,
                            const std::vector<double>& c_bar, const SequenceTensor& x,
                            const ScanCtx& ctx, const SequenceTensor& upstream);

namespace detail {

template <class T>
void check_finite(const std::vector<T>& v, const char* what) {
    for (T x : v)
        if (!std::isfinite(x)) throw std::domain_error(std::string(what) + ": non-finite value");
}

}  // namespace detail

// Per token k: B_k = u_k*W_B, C_k = u_k*W_C, delta_k = softplus(u_k*W_delta + bias),
// then discretize and scan. ctx capture is only available in 64-bit mode.
template <class T>
SeqTensorT<T> selective_ssm_forward(const SsmParamsT<T>& p, const SeqTensorT<T>& u,
                                    SelectiveSsmCtx* ctx = nullptr) {
    if (!p.selective) throw std::invalid_argument("selective_ssm_forward: params are in fixed mode");
    if (u.c != p.channels) throw std::invalid_argument("selective_ssm_forward: channel mismatch");
    detail::check_finite(u.data, "selective_ssm_forward input");

    const int64_t b = u.b, n = u.n, c = u.c, s = p.state_dim;

    if constexpr (!std::is_same_v<T, double>) {
        if (ctx) throw std::logic_error("selective_ssm_forward: ctx capture requires 64-bit mode");
    }

    // A = -exp(a_log), computed once per call.
    std::vector<T> a(static_cast<size_t>(c * s));
    for (int64_t i = 0; i < c * s; ++i) a[static_cast<size_t>(i)] = -std::exp(p.a_log[static_cast<size_t>(i)]);

    std::vector<T> delta(static_cast<size_t>(b * n));
    std::vector<T> p_raw(static_cast<size_t>(b * n));
    std::vector<T> b_proj(static_cast<size_t>(b * n * s));
    std::vector<T> c_proj(static_cast<size_t>(b * n * s));

#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < b * n; ++t) {
        const T* uk = u.data.data() + t * c;
        T acc = p.bias_delta[0];
        for (int64_t ch = 0; ch < c; ++ch) acc += uk[ch] * p.w_delta[static_cast<size_t>(ch)];
        p_raw[static_cast<size_t>(t)] = acc;
        delta[static_cast<size_t>(t)] = softplus(acc);
        T* bp = b_proj.data() + t * s;
        T* cp = c_proj.data() + t * s;
        for (int64_t j = 0; j < s; ++j) bp[j] = cp[j] = T(0);
        for (int64_t ch = 0; ch < c; ++ch) {
            const T uv = uk[ch];
            const T* wb = p.w_b.data() + ch * s;
            const T* wc = p.w_c.data() + ch * s;
            for (int64_t j = 0; j < s; ++j) {
                bp[j] += uv * wb[j];
                cp[j] += uv * wc[j];
            }
        }
    }

    SeqTensorT<T> y(b, n, c);
    double* ctx_h = nullptr;
    if constexpr (std::is_same_v<T, double>) {
        if (ctx) {
            ctx->h.assign(static_cast<size_t>(b * n * c * s), 0.0);
            ctx->delta.assign(delta.begin(), delta.end());
            ctx->p_raw.assign(p_raw.begin(), p_raw.end());
            ctx->b_proj.assign(b_proj.begin(), b_proj.end());
            ctx->c_proj.assign(c_proj.begin(), c_proj.end());
            ctx_h = ctx->h.data();
        }
    }

#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < b * c; ++bc) {
        const int64_t bi = bc / c, ch = bc % c;
        const T* arow = a.data() + ch * s;
        std::vector<T> h(static_cast<size_t>(s), T(0));
        for (int64_t k = 0; k < n; ++k) {
            const int64_t t = bi * n + k;
            const T dk = delta[static_cast<size_t>(t)];
            const T uv = u.data[static_cast<size_t>(t * c + ch)];
            const T* bp = b_proj.data() + t * s;
            const T* cp = c_proj.data() + t * s;
            T out = T(0);
            for (int64_t j = 0; j < s; ++j) {
                h[static_cast<size_t>(j)] = std::exp(dk * arow[j]) * h[static_cast<size_t>(j)] +
                                            dk * bp[j] * uv;
                out += cp[j] * h[static_cast<size_t>(j)];
            }
            y.data[static_cast<size_t>(t * c + ch)] = out;
            if (ctx_h != nullptr) {
                if constexpr (std::is_same_v<T, double>) {
                    double* dst = ctx_h + (t * c + ch) * s;
                    for (int64_t j = 0; j < s; ++j) dst[j] = h[static_cast<size_t>(j)];
                }
            }
        }
    }
    return y;
}

// Accumulates into `grad` (same shapes as params) and `du`.
void selective_ssm_backward(const SsmParams& params, const SequenceTensor& u,
                            const SelectiveSsmCtx& ctx, const SequenceTensor& upstream,
                            SsmParams& grad, SequenceTensor& du);

}  // namespace voxseq

#endif
