#ifndef VOXSEQ_BLOCK_HPP
#define VOXSEQ_BLOCK_HPP

#include "voxseq/ssm.hpp"

namespace voxseq {

inline constexpr double kLayerNormEps = 1e-5;

// One Mamba block: LN -> (main/gate linear projections) -> causal depthwise
// conv -> SiLU -> selective SSM, gated by SiLU(gate), projected back and
// added to the input.
template <class T>
struct MambaBlockParamsT {
    int64_t model_dim = 0;   // c
    int64_t expand_dim = 0;  // e, default 2c
    int64_t conv_kernel = 4;

    std::vector<T> ln_gain, ln_bias;  // c
    std::vector<T> in_proj_main;      // c*e, row-major [in][out]
    std::vector<T> in_proj_gate;      // c*e
    std::vector<T> conv_w;            // e*k, depthwise
    SsmParamsT<T> ssm;                // over e channels
    std::vector<T> out_proj;          // e*c

    template <class U>
    MambaBlockParamsT<U> cast() const {
        MambaBlockParamsT<U> o;
        o.model_dim = model_dim;
        o.expand_dim = expand_dim;
        o.conv_kernel = conv_kernel;
        auto conv = [](const std::vector<T>& v) { return std::vector<U>(v.begin(), v.end()); };
        o.ln_gain = conv(ln_gain);
        o.ln_bias = conv(ln_bias);
        o.in_proj_main = conv(in_proj_main);
        o.in_proj_gate = conv(in_proj_gate);
        o.conv_w = conv(conv_w);
        o.ssm = ssm.template cast<U>();
        o.out_proj = conv(out_proj);
        return o;
    }
};

using MambaBlockParams = MambaBlockParamsT<double>;

template <class T, class F>
void for_each_tensor(MambaBlockParamsT<T>& p, F&& f) {
    f(p.ln_gain);
    f(p.ln_bias);
    f(p.in_proj_main);
    f(p.in_proj_gate);
    f(p.conv_w);
    for_each_tensor(p.ssm, f);
    f(p.out_proj);
}

MambaBlockParams init_mamba_block(int64_t model_dim, int64_t state_dim, Rng& rng,
                                  int64_t expand_dim = 0, int64_t conv_kernel = 4);

// Same-shape zeroed clone, used as the gradient holder.
template <class P>
P zeros_like(const P& params) {
    P g = params;
    for_each_tensor(g, [](auto& t) { std::fill(t.begin(), t.end(), 0.0); });
    return g;
}

// --- building-block kernels -------------------------------------------------

// y = gain * (x - mean)/sqrt(var + eps) + bias, normalized over channels.
struct LayerNormCtx {
    std::vector<double> mean, inv_std;  // b*n each
};

template <class T>
SeqTensorT<T> layer_norm(const SeqTensorT<T>& x, const std::vector<T>& gain,
                         const std::vector<T>& bias, LayerNormCtx* ctx = nullptr) {
    const int64_t c = x.c;
    if (static_cast<int64_t>(gain.size()) != c || static_cast<int64_t>(bias.size()) != c)
        throw std::invalid_argument("layer_norm: gain/bias size mismatch");
    SeqTensorT<T> y(x.b, x.n, c);
    if constexpr (!std::is_same_v<T, double>) {
        if (ctx) throw std::logic_error("layer_norm: ctx capture requires 64-bit mode");
    }
    if (ctx) {
        ctx->mean.resize(static_cast<size_t>(x.b * x.n));
        ctx->inv_std.resize(static_cast<size_t>(x.b * x.n));
    }
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < x.b * x.n; ++t) {
        const T* xi = x.data.data() + t * c;
        T* yi = y.data.data() + t * c;
        T mean = T(0);
        for (int64_t i = 0; i < c; ++i) mean += xi[i];
        mean /= static_cast<T>(c);
        T var = T(0);
        for (int64_t i = 0; i < c; ++i) var += (xi[i] - mean) * (xi[i] - mean);
        var /= static_cast<T>(c);
        const T inv = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
        for (int64_t i = 0; i < c; ++i) yi[i] = gain[static_cast<size_t>(i)] * (xi[i] - mean) * inv + bias[static_cast<size_t>(i)];
        if (ctx) {
            if constexpr (std::is_same_v<T, double>) {
                ctx->mean[static_cast<size_t>(t)] = mean;
                ctx->inv_std[static_cast<size_t>(t)] = inv;
            }
        }
    }
    return y;
}

void layer_norm_backward(const SequenceTensor& x, const std::vector<double>& gain,
                         const LayerNormCtx& ctx, const SequenceTensor& upstream,
                         SequenceTensor& dx, std::vector<double>& dgain,
                         std::vector<double>& dbias);

// y[t] = x[t] * W with W in row-major [in][out].
template <class T>
SeqTensorT<T> linear(const SeqTensorT<T>& x, const std::vector<T>& w, int64_t out_dim) {
    const int64_t in_dim = x.c;
    if (static_cast<int64_t>(w.size()) != in_dim * out_dim)
        throw std::invalid_argument("linear: weight size mismatch");
    SeqTensorT<T> y(x.b, x.n, out_dim);
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < x.b * x.n; ++t) {
        const T* xi = x.data.data() + t * in_dim;
        T* yi = y.data.data() + t * out_dim;
        for (int64_t o = 0; o < out_dim; ++o) yi[o] = T(0);
        for (int64_t i = 0; i < in_dim; ++i) {
            const T xv = xi[i];
            const T* wr = w.data() + i * out_dim;
            for (int64_t o = 0; o < out_dim; ++o) yi[o] += xv * wr[o];
        }
    }
    return y;
}

void linear_backward(const SequenceTensor& x, const std::vector<double>& w, int64_t out_dim,
                     const SequenceTensor& upstream, SequenceTensor& dx, std::vector<double>& dw);

// Depthwise causal conv along the sequence: out[k] = sum_t w[t] * in[k-K+1+t],
// zero-padded on the left, length preserved.
template <class T>
SeqTensorT<T> conv1d_causal(const SeqTensorT<T>& x, const std::vector<T>& w, int64_t kernel) {
    const int64_t c = x.c;
    if (static_cast<int64_t>(w.size()) != c * kernel)
        throw std::invalid_argument("conv1d_causal: weight size mismatch");
    SeqTensorT<T> y(x.b, x.n, c);
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < x.b * x.n; ++t) {
        const int64_t bi = t / x.n, k = t % x.n;
        const T* base = x.data.data() + bi * x.n * c;
        T* yi = y.data.data() + t * c;
        for (int64_t ch = 0; ch < c; ++ch) {
            const T* wr = w.data() + ch * kernel;
            T acc = T(0);
            for (int64_t j = 0; j < kernel; ++j) {
                const int64_t src = k - kernel + 1 + j;
                if (src >= 0) acc += wr[j] * base[src * c + ch];
            }
            yi[ch] = acc;
        }
    }
    return y;
}

void conv1d_causal_backward(const SequenceTensor& x, const std::vector<double>& w, int64_t kernel,
                            const SequenceTensor& upstream, SequenceTensor& dx,
                            std::vector<double>& dw);

// --- the block ---------------------------------------------------------------

struct MambaBlockCtx {
    SequenceTensor v1;        // LN output
    LayerNormCtx ln;
    SequenceTensor main_pre;  // after in_proj_main
    SequenceTensor conv_out;  // pre-SiLU
    SequenceTensor acts;      // SSM input
    SelectiveSsmCtx ssm;
    SequenceTensor ssm_out;
    SequenceTensor gate_pre;  // after in_proj_gate, pre-SiLU
    SequenceTensor gated;     // ssm_out * silu(gate_pre)
};

template <class T>
SeqTensorT<T> mamba_block_forward(const MambaBlockParamsT<T>& p, const SeqTensorT<T>& v,
                                  MambaBlockCtx* ctx = nullptr) {
    if (v.c != p.model_dim) throw std::invalid_argument("mamba_block_forward: channel mismatch");
    if constexpr (!std::is_same_v<T, double>) {
        if (ctx) throw std::logic_error("mamba_block_forward: ctx capture requires 64-bit mode");
    }

    SeqTensorT<T> v1 = layer_norm(v, p.ln_gain, p.ln_bias, ctx ? &ctx->ln : nullptr);
    SeqTensorT<T> main_pre = linear(v1, p.in_proj_main, p.expand_dim);
    SeqTensorT<T> conv_out = conv1d_causal(main_pre, p.conv_w, p.conv_kernel);

    SeqTensorT<T> acts(conv_out.b, conv_out.n, conv_out.c);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(acts.data.size()); ++i)
        acts.data[static_cast<size_t>(i)] = silu(conv_out.data[static_cast<size_t>(i)]);

    SeqTensorT<T> ssm_out = selective_ssm_forward(p.ssm, acts, ctx ? &ctx->ssm : nullptr);
    SeqTensorT<T> gate_pre = linear(v1, p.in_proj_gate, p.expand_dim);

    SeqTensorT<T> gated(ssm_out.b, ssm_out.n, ssm_out.c);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(gated.data.size()); ++i)
        gated.data[static_cast<size_t>(i)] =
            ssm_out.data[static_cast<size_t>(i)] * silu(gate_pre.data[static_cast<size_t>(i)]);

    SeqTensorT<T> out = linear(gated, p.out_proj, p.model_dim);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(out.data.size()); ++i)
        out.data[static_cast<size_t>(i)] += v.data[static_cast<size_t>(i)];

    if constexpr (std::is_same_v<T, double>) {
        if (ctx) {
            ctx->v1 = std::move(v1);
            ctx->main_pre = std::move(main_pre);
            ctx->conv_out = std::move(conv_out);
            ctx->acts = std::move(acts);
            ctx->ssm_out = std::move(ssm_out);
            ctx->gate_pre = std::move(gate_pre);
            ctx->gated = std::move(gated);
        }
    }
    return out;
}

// Accumulates parameter gradients into `grad` and input gradients into `dv`.
void mamba_block_backward(const MambaBlockParams& params, const SequenceTensor& v,
                          const MambaBlockCtx& ctx, const SequenceTensor& upstream,
                          MambaBlockParams& grad, SequenceTensor& dv);

using MambaBlockParamsF = MambaBlockParamsT<float>;

}  // namespace voxseq

#endif
