#include "voxseq/block.hpp"

namespace voxseq {

MambaBlockParams init_mamba_block(int64_t model_dim, int64_t state_dim, Rng& rng,
                                  int64_t expand_dim, int64_t conv_kernel) {
    if (model_dim < 1 || conv_kernel < 1) throw std::invalid_argument("init_mamba_block: bad dims");
    MambaBlockParams p;
    p.model_dim = model_dim;
    p.expand_dim = expand_dim > 0 ? expand_dim : 2 * model_dim;
    p.conv_kernel = conv_kernel;
    p.ln_gain.assign(static_cast<size_t>(model_dim), 1.0);
    p.ln_bias.assign(static_cast<size_t>(model_dim), 0.0);

    auto fill_uniform = [&rng](std::vector<double>& v, int64_t count, int64_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        v.resize(static_cast<size_t>(count));
        for (auto& x : v) x = rng.uniform(-bound, bound);
    };
    fill_uniform(p.in_proj_main, model_dim * p.expand_dim, model_dim);
    fill_uniform(p.in_proj_gate, model_dim * p.expand_dim, model_dim);
    fill_uniform(p.conv_w, p.expand_dim * conv_kernel, conv_kernel);
    p.ssm = init_ssm_params(p.expand_dim, state_dim, rng);
    fill_uniform(p.out_proj, p.expand_dim * model_dim, p.expand_dim);
    return p;
}

void layer_norm_backward(const SequenceTensor& x, const std::vector<double>& gain,
                         const LayerNormCtx& ctx, const SequenceTensor& upstream,
                         SequenceTensor& dx, std::vector<double>& dgain,
                         std::vector<double>& dbias) {
    const int64_t c = x.c;
    // dx writes are token-exclusive and run parallel; the shared dgain/dbias
    // sums run in a second, serial token pass to keep them order-stable.
    std::vector<double> dg_local(static_cast<size_t>(c), 0.0), db_local(static_cast<size_t>(c), 0.0);
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < x.b * x.n; ++t) {
        const double* xi = x.data.data() + t * c;
        const double* up = upstream.data.data() + t * c;
        double* dxi = dx.data.data() + t * c;
        const double mean = ctx.mean[static_cast<size_t>(t)];
        const double inv = ctx.inv_std[static_cast<size_t>(t)];
        double sum_gdy = 0.0, sum_gdy_xhat = 0.0;
        for (int64_t i = 0; i < c; ++i) {
            const double xhat = (xi[i] - mean) * inv;
            const double g = gain[static_cast<size_t>(i)] * up[i];
            sum_gdy += g;
            sum_gdy_xhat += g * xhat;
        }
        const double inv_c = 1.0 / static_cast<double>(c);
        for (int64_t i = 0; i < c; ++i) {
            const double xhat = (xi[i] - mean) * inv;
            const double g = gain[static_cast<size_t>(i)] * up[i];
            dxi[i] += inv * (g - inv_c * sum_gdy - xhat * inv_c * sum_gdy_xhat);
        }
    }
    for (int64_t t = 0; t < x.b * x.n; ++t) {
        const double* xi = x.data.data() + t * c;
        const double* up = upstream.data.data() + t * c;
        const double mean = ctx.mean[static_cast<size_t>(t)];
        const double inv = ctx.inv_std[static_cast<size_t>(t)];
        for (int64_t i = 0; i < c; ++i) {
            dg_local[static_cast<size_t>(i)] += up[i] * (xi[i] - mean) * inv;
            db_local[static_cast<size_t>(i)] += up[i];
        }
    }
    for (int64_t i = 0; i < c; ++i) {
        dgain[static_cast<size_t>(i)] += dg_local[static_cast<size_t>(i)];
        dbias[static_cast<size_t>(i)] += db_local[static_cast<size_t>(i)];
    }
}

void linear_backward(const SequenceTensor& x, const std::vector<double>& w, int64_t out_dim,
                     const SequenceTensor& upstream, SequenceTensor& dx, std::vector<double>& dw) {
    const int64_t in_dim = x.c;
    if (upstream.c != out_dim) throw std::invalid_argument("linear_backward: upstream shape mismatch");
    const int64_t tokens = x.b * x.n;
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < tokens; ++t) {
        const double* up = upstream.data.data() + t * out_dim;
        double* dxi = dx.data.data() + t * in_dim;
        for (int64_t i = 0; i < in_dim; ++i) {
            const double* wr = w.data() + i * out_dim;
            double acc = 0.0;
            for (int64_t o = 0; o < out_dim; ++o) acc += up[o] * wr[o];
            dxi[i] += acc;
        }
    }
    // dw[i][o] = sum_t x[t][i] * up[t][o]; each (i) row is owned by one thread.
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < in_dim; ++i) {
        double* dwr = dw.data() + i * out_dim;
        for (int64_t t = 0; t < tokens; ++t) {
            const double xv = x.data[static_cast<size_t>(t * in_dim + i)];
            const double* up = upstream.data.data() + t * out_dim;
            for (int64_t o = 0; o < out_dim; ++o) dwr[o] += xv * up[o];
        }
    }
}

void conv1d_causal_backward(const SequenceTensor& x, const std::vector<double>& w, int64_t kernel,
                            const SequenceTensor& upstream, SequenceTensor& dx,
                            std::vector<double>& dw) {
    const int64_t c = x.c, n = x.n;
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < x.b * n; ++t) {
        const int64_t bi = t / n, k = t % n;
        const double* up_base = upstream.data.data() + bi * n * c;
        double* dxi = dx.data.data() + t * c;
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* wr = w.data() + ch * kernel;
            double acc = 0.0;
            // in[k] feeds out[k + kernel - 1 - j] through w[j].
            for (int64_t j = 0; j < kernel; ++j) {
                const int64_t dst = k + kernel - 1 - j;
                if (dst < n) acc += wr[j] * up_base[dst * c + ch];
            }
            dxi[ch] += acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        double* dwr = dw.data() + ch * kernel;
        for (int64_t bi = 0; bi < x.b; ++bi) {
            const double* x_base = x.data.data() + bi * n * c;
            const double* up_base = upstream.data.data() + bi * n * c;
            for (int64_t k = 0; k < n; ++k) {
                const double up = up_base[k * c + ch];
                for (int64_t j = 0; j < kernel; ++j) {
                    const int64_t src = k - kernel + 1 + j;
                    if (src >= 0) dwr[j] += up * x_base[src * c + ch];
                }
            }
        }
    }
}

void mamba_block_backward(const MambaBlockParams& params, const SequenceTensor& v,
                          const MambaBlockCtx& ctx, const SequenceTensor& upstream,
                          MambaBlockParams& grad, SequenceTensor& dv) {
    const int64_t b = v.b, n = v.n;
    const int64_t e = params.expand_dim;

    // out = v + gated * W_out
    SequenceTensor dgated(b, n, e);
    std::fill(dgated.data.begin(), dgated.data.end(), 0.0);
    linear_backward(ctx.gated, params.out_proj, params.model_dim, upstream, dgated, grad.out_proj);

    // gated = ssm_out * silu(gate_pre)
    SequenceTensor dssm_out(b, n, e);
    SequenceTensor dgate_pre(b, n, e);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(dgated.data.size()); ++i) {
        const size_t ui = static_cast<size_t>(i);
        dssm_out.data[ui] = dgated.data[ui] * silu(ctx.gate_pre.data[ui]);
        dgate_pre.data[ui] = dgated.data[ui] * ctx.ssm_out.data[ui] * silu_grad(ctx.gate_pre.data[ui]);
    }

    SequenceTensor dacts(b, n, e);
    std::fill(dacts.data.begin(), dacts.data.end(), 0.0);
    selective_ssm_backward(params.ssm, ctx.acts, ctx.ssm, dssm_out, grad.ssm, dacts);

    // acts = silu(conv_out)
    SequenceTensor dconv_out(b, n, e);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(dacts.data.size()); ++i)
        dconv_out.data[static_cast<size_t>(i)] =
            dacts.data[static_cast<size_t>(i)] * silu_grad(ctx.conv_out.data[static_cast<size_t>(i)]);

    SequenceTensor dmain_pre(b, n, e);
    std::fill(dmain_pre.data.begin(), dmain_pre.data.end(), 0.0);
    conv1d_causal_backward(ctx.main_pre, params.conv_w, params.conv_kernel, dconv_out, dmain_pre,
                           grad.conv_w);

    SequenceTensor dv1(b, n, params.model_dim);
    std::fill(dv1.data.begin(), dv1.data.end(), 0.0);
    linear_backward(ctx.v1, params.in_proj_main, e, dmain_pre, dv1, grad.in_proj_main);
    linear_backward(ctx.v1, params.in_proj_gate, e, dgate_pre, dv1, grad.in_proj_gate);

    layer_norm_backward(v, params.ln_gain, ctx.ln, dv1, dv, grad.ln_gain, grad.ln_bias);

    // Residual path.
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(dv.data.size()); ++i)
        dv.data[static_cast<size_t>(i)] += upstream.data[static_cast<size_t>(i)];
}

}  // namespace voxseq
