#include "voxseq/ssm.hpp"

#include <algorithm>

namespace voxseq {

SsmParams init_ssm_params(int64_t channels, int64_t state_dim, Rng& rng) {
    if (channels < 1 || state_dim < 1) throw std::invalid_argument("init_ssm_params: bad dims");
    SsmParams p;
    p.channels = channels;
    p.state_dim = state_dim;
    p.selective = true;
    const int64_t cs = channels * state_dim;
    p.a_log.resize(static_cast<size_t>(cs));
    for (auto& v : p.a_log) v = std::log(rng.uniform(0.5, 1.5));
    const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
    p.w_b.resize(static_cast<size_t>(cs));
    p.w_c.resize(static_cast<size_t>(cs));
    p.w_delta.resize(static_cast<size_t>(channels));
    for (auto& v : p.w_b) v = rng.uniform(-bound, bound);
    for (auto& v : p.w_c) v = rng.uniform(-bound, bound);
    for (auto& v : p.w_delta) v = rng.uniform(-bound, bound);
    // softplus(bias) ~ 0.05 keeps the initial step well inside (0.01, 0.1).
    p.bias_delta = {std::log(std::expm1(0.05))};
    p.b_fixed.assign(static_cast<size_t>(state_dim), 0.0);
    p.c_fixed.assign(static_cast<size_t>(state_dim), 0.0);
    p.delta_fixed = {0.0};
    return p;
}

Discretized discretize(const SsmParams& params, const std::vector<double>& delta_per_channel) {
    const int64_t c = params.channels, s = params.state_dim;
    if (static_cast<int64_t>(delta_per_channel.size()) != c)
        throw std::invalid_argument("discretize: delta must have one entry per channel");
    for (double d : delta_per_channel)
        if (!(d > 0.0)) throw std::invalid_argument("discretize: step size must be positive");
    if (static_cast<int64_t>(params.b_fixed.size()) != s)
        throw std::invalid_argument("discretize: fixed-mode B has wrong size");

    Discretized out;
    out.a_bar.resize(static_cast<size_t>(c * s));
    out.b_bar.resize(static_cast<size_t>(c * s));
    for (int64_t ch = 0; ch < c; ++ch) {
        const double dk = delta_per_channel[static_cast<size_t>(ch)];
        for (int64_t j = 0; j < s; ++j) {
            const double a = -std::exp(params.a_log[static_cast<size_t>(ch * s + j)]);
            out.a_bar[static_cast<size_t>(ch * s + j)] = std::exp(dk * a);
            out.b_bar[static_cast<size_t>(ch * s + j)] = dk * params.b_fixed[static_cast<size_t>(j)];
        }
    }
    return out;
}

SequenceTensor ssm_scan(const std::vector<double>& a_bar, const std::vector<double>& b_bar,
                        const std::vector<double>& c_bar, const SequenceTensor& x, ScanCtx* ctx) {
    const int64_t b = x.b, n = x.n, c = x.c;
    if (a_bar.size() != b_bar.size() || a_bar.size() != c_bar.size() || a_bar.empty() ||
        a_bar.size() % static_cast<size_t>(c) != 0)
        throw std::invalid_argument("ssm_scan: parameter shapes inconsistent with input channels");
    const int64_t s = static_cast<int64_t>(a_bar.size()) / c;

    SequenceTensor y(b, n, c);
    if (ctx) ctx->h.assign(static_cast<size_t>(b * n * c * s), 0.0);
    double* ctx_h = ctx ? ctx->h.data() : nullptr;

#pragma omp parallel for schedule(static)
    for (int64_t bc = 0; bc < b * c; ++bc) {
        const int64_t bi = bc / c, ch = bc % c;
        const double* ar = a_bar.data() + ch * s;
        const double* br = b_bar.data() + ch * s;
        const double* cr = c_bar.data() + ch * s;
        std::vector<double> h(static_cast<size_t>(s), 0.0);
        for (int64_t k = 0; k < n; ++k) {
            const int64_t t = bi * n + k;
            const double xv = x.data[static_cast<size_t>(t * c + ch)];
            double out = 0.0;
            for (int64_t j = 0; j < s; ++j) {
                h[static_cast<size_t>(j)] = ar[j] * h[static_cast<size_t>(j)] + br[j] * xv;
                out += cr[j] * h[static_cast<size_t>(j)];
            }
            y.data[static_cast<size_t>(t * c + ch)] = out;
            if (ctx_h) std::copy(h.begin(), h.end(), ctx_h + (t * c + ch) * s);
        }
    }
    return y;
}

ScanGrads ssm_scan_backward(const std::vector<double>& a_bar, const std::vector<double>& b_bar,
                            const std::vector<double>& c_bar, const SequenceTensor& x,
                            const ScanCtx& ctx, const SequenceTensor& upstream) {
    const int64_t b = x.b, n = x.n, c = x.c;
    const int64_t s = static_cast<int64_t>(a_bar.size()) / c;
    if (upstream.b != b || upstream.n != n || upstream.c != c)
        throw std::invalid_argument("ssm_scan_backward: upstream shape mismatch");

    ScanGrads g;
    g.d_a_bar.assign(a_bar.size(), 0.0);
    g.d_b_bar.assign(b_bar.size(), 0.0);
    g.d_c_bar.assign(c_bar.size(), 0.0);
    g.d_x = SequenceTensor(b, n, c);

    // Adjoint recurrence runs right-to-left; each thread owns one channel's
    // parameter rows and walks the batches serially, so sums stay ordered.
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        const double* ar = a_bar.data() + ch * s;
        const double* br = b_bar.data() + ch * s;
        const double* cr = c_bar.data() + ch * s;
        double* da = g.d_a_bar.data() + ch * s;
        double* db = g.d_b_bar.data() + ch * s;
        double* dc = g.d_c_bar.data() + ch * s;
        std::vector<double> adj(static_cast<size_t>(s));
        for (int64_t bi = 0; bi < b; ++bi) {
            std::fill(adj.begin(), adj.end(), 0.0);
            for (int64_t k = n - 1; k >= 0; --k) {
                const int64_t t = bi * n + k;
                const double up = upstream.data[static_cast<size_t>(t * c + ch)];
                const double xv = x.data[static_cast<size_t>(t * c + ch)];
                const double* hk = ctx.h.data() + (t * c + ch) * s;
                const double* hprev = k > 0 ? ctx.h.data() + ((t - 1) * c + ch) * s : nullptr;
                double dxv = 0.0;
                for (int64_t j = 0; j < s; ++j) {
                    const double gj = up * cr[j] + adj[static_cast<size_t>(j)];
                    dc[j] += up * hk[j];
                    da[j] += gj * (hprev ? hprev[j] : 0.0);
                    db[j] += gj * xv;
                    dxv += gj * br[j];
                    adj[static_cast<size_t>(j)] = ar[j] * gj;
                }
                g.d_x.data[static_cast<size_t>(t * c + ch)] = dxv;
            }
        }
    }
    return g;
}

void selective_ssm_backward(const SsmParams& params, const SequenceTensor& u,
                            const SelectiveSsmCtx& ctx, const SequenceTensor& upstream,
                            SsmParams& grad, SequenceTensor& du) {
    const int64_t b = u.b, n = u.n, c = u.c, s = params.state_dim;
    if (upstream.b != b || upstream.n != n || upstream.c != c)
        throw std::invalid_argument("selective_ssm_backward: upstream shape mismatch");
    if (du.b != b || du.n != n || du.c != c)
        throw std::invalid_argument("selective_ssm_backward: du shape mismatch");

    std::vector<double> a(static_cast<size_t>(c * s));
    for (int64_t i = 0; i < c * s; ++i) a[static_cast<size_t>(i)] = -std::exp(params.a_log[static_cast<size_t>(i)]);

    // Full adjoint dL/dh for every step, then all remaining pieces fall out
    // of saved state with deterministic summation orders.
    std::vector<double> adj(static_cast<size_t>(b * n * c * s));
    std::vector<double> d_delta(static_cast<size_t>(b * n), 0.0);
    std::vector<double> d_bproj(static_cast<size_t>(b * n * s), 0.0);
    std::vector<double> d_cproj(static_cast<size_t>(b * n * s), 0.0);

    for (int64_t bi = 0; bi < b; ++bi) {
#pragma omp parallel for schedule(static)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* arow = a.data() + ch * s;
            std::vector<double> carry(static_cast<size_t>(s), 0.0);
            for (int64_t k = n - 1; k >= 0; --k) {
                const int64_t t = bi * n + k;
                const double up = upstream.data[static_cast<size_t>(t * c + ch)];
                const double* cp = ctx.c_proj.data() + t * s;
                double* gk = adj.data() + (t * c + ch) * s;
                for (int64_t j = 0; j < s; ++j) {
                    gk[j] = up * cp[j] + carry[static_cast<size_t>(j)];
                }
                if (k > 0) {
                    const double dk = ctx.delta[static_cast<size_t>(t)];
                    for (int64_t j = 0; j < s; ++j)
                        carry[static_cast<size_t>(j)] = std::exp(dk * arow[j]) * gk[j];
                }
            }
        }

        // Per-token reductions over channels and states.
#pragma omp parallel for schedule(static)
        for (int64_t k = 0; k < n; ++k) {
            const int64_t t = bi * n + k;
            const double dk = ctx.delta[static_cast<size_t>(t)];
            const double* bp = ctx.b_proj.data() + t * s;
            double dd = 0.0;
            double* dbp = d_bproj.data() + t * s;
            double* dcp = d_cproj.data() + t * s;
            for (int64_t ch = 0; ch < c; ++ch) {
                const double uv = u.data[static_cast<size_t>(t * c + ch)];
                const double up = upstream.data[static_cast<size_t>(t * c + ch)];
                const double* gk = adj.data() + (t * c + ch) * s;
                const double* hk = ctx.h.data() + (t * c + ch) * s;
                const double* hprev = k > 0 ? ctx.h.data() + ((t - 1) * c + ch) * s : nullptr;
                const double* arow = a.data() + ch * s;
                for (int64_t j = 0; j < s; ++j) {
                    const double abar = std::exp(dk * arow[j]);
                    const double dabar = gk[j] * (hprev ? hprev[j] : 0.0);
                    dd += dabar * arow[j] * abar + gk[j] * bp[j] * uv;
                    dbp[j] += gk[j] * dk * uv;
                    dcp[j] += up * hk[j];
                }
            }
            d_delta[static_cast<size_t>(t)] = dd;
        }
    }

    // dp = d_delta * sigmoid(p_raw); token-level inputs and projections.
    std::vector<double> dp(static_cast<size_t>(b * n));
#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < b * n; ++t)
        dp[static_cast<size_t>(t)] = d_delta[static_cast<size_t>(t)] * sigmoid(ctx.p_raw[static_cast<size_t>(t)]);

#pragma omp parallel for schedule(static)
    for (int64_t t = 0; t < b * n; ++t) {
        const double dk = ctx.delta[static_cast<size_t>(t)];
        const double* bp = ctx.b_proj.data() + t * s;
        const double* dbp = d_bproj.data() + t * s;
        const double* dcp = d_cproj.data() + t * s;
        for (int64_t ch = 0; ch < c; ++ch) {
            const double* gk = adj.data() + (t * c + ch) * s;
            const double* wb = params.w_b.data() + ch * s;
            const double* wc = params.w_c.data() + ch * s;
            double acc = dp[static_cast<size_t>(t)] * params.w_delta[static_cast<size_t>(ch)];
            for (int64_t j = 0; j < s; ++j)
                acc += gk[j] * dk * bp[j] + dbp[j] * wb[j] + dcp[j] * wc[j];
            du.data[static_cast<size_t>(t * c + ch)] += acc;
        }
    }

    // Parameter gradients: parallel over parameter slots, serial over tokens.
#pragma omp parallel for schedule(static)
    for (int64_t ch = 0; ch < c; ++ch) {
        const double* arow = a.data() + ch * s;
        double* dwb = grad.w_b.data() + ch * s;
        double* dwc = grad.w_c.data() + ch * s;
        double* dal = grad.a_log.data() + ch * s;
        double dwd = 0.0;
        for (int64_t t = 0; t < b * n; ++t) {
            const int64_t k = t % n;
            const double uv = u.data[static_cast<size_t>(t * c + ch)];
            const double dk = ctx.delta[static_cast<size_t>(t)];
            const double* gk = adj.data() + (t * c + ch) * s;
            const double* hprev = k > 0 ? ctx.h.data() + ((t - 1) * c + ch) * s : nullptr;
            const double* dbp = d_bproj.data() + t * s;
            const double* dcp = d_cproj.data() + t * s;
            dwd += dp[static_cast<size_t>(t)] * uv;
            for (int64_t j = 0; j < s; ++j) {
                dwb[j] += uv * dbp[j];
                dwc[j] += uv * dcp[j];
                const double abar = std::exp(dk * arow[j]);
                const double dabar = gk[j] * (hprev ? hprev[j] : 0.0);
                // dA = dabar * delta * abar, and dA/da_log = A itself.
                dal[j] += dabar * dk * abar * arow[j];
            }
        }
        grad.w_delta[static_cast<size_t>(ch)] += dwd;
    }

    double dbias = 0.0;
    for (int64_t t = 0; t < b * n; ++t) dbias += dp[static_cast<size_t>(t)];
    grad.bias_delta[0] += dbias;
}

}  // namespace voxseq
