#include "voxseq/ref.hpp"

#include <algorithm>
#include <cmath>

namespace voxseq::ref {

SequenceTensor apply_ordering(const FeatureGrid& grid, const Ordering& ordering) {
    if (!grid.dims.same_space(ordering.dims))
        throw std::invalid_argument("ref::apply_ordering: dims mismatch");
    const int64_t n = ordering.dims.voxels(), c = grid.dims.c;
    SequenceTensor out(1, n, c);
    for (int64_t s = 0; s < n; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            out.data[static_cast<size_t>(s * c + ch)] =
                grid.data[static_cast<size_t>(static_cast<int64_t>(ordering.seq_to_linear[static_cast<size_t>(s)]) * c + ch)];
    return out;
}

LocalityReport neighbor_distance_stats(const Ordering& ordering) {
    const GridDims& g = ordering.dims;
    LocalityReport rep;
    rep.scheme = scheme_label(ordering.scheme);
    rep.dims = g;

    std::vector<uint64_t> dist;
    const auto& pos = ordering.linear_to_seq;
    for (int64_t z = 0; z < g.d; ++z)
        for (int64_t y = 0; y < g.h; ++y)
            for (int64_t x = 0; x < g.w; ++x) {
                const int64_t l = x + g.w * (y + g.h * z);
                const uint64_t p = pos[static_cast<size_t>(l)];
                auto push = [&](int64_t other) {
                    const uint64_t q = pos[static_cast<size_t>(other)];
                    dist.push_back(p > q ? p - q : q - p);
                };
                if (x + 1 < g.w) push(l + 1);
                if (y + 1 < g.h) push(l + g.w);
                if (z + 1 < g.d) push(l + g.w * g.h);
            }

    rep.pair_count = dist.size();
    if (dist.empty()) return rep;
    uint64_t total = 0;
    for (uint64_t v : dist) {
        total += v;
        rep.max_neighbor_distance = std::max(rep.max_neighbor_distance, v);
    }
    rep.mean_neighbor_distance = static_cast<double>(total) / static_cast<double>(dist.size());
    std::sort(dist.begin(), dist.end());
    auto rank = [&](double q) {
        const size_t r = static_cast<size_t>(std::max<int64_t>(
            1, static_cast<int64_t>(std::ceil(q * static_cast<double>(dist.size())))));
        return dist[r - 1];
    };
    rep.p50 = rank(0.50);
    rep.p95 = rank(0.95);
    return rep;
}

SequenceTensor ssm_scan(const std::vector<double>& a_bar, const std::vector<double>& b_bar,
                        const std::vector<double>& c_bar, const SequenceTensor& x) {
    const int64_t b = x.b, n = x.n, c = x.c;
    const int64_t s = static_cast<int64_t>(a_bar.size()) / c;
    SequenceTensor y(b, n, c);
    std::vector<double> h(static_cast<size_t>(c * s));
    for (int64_t bi = 0; bi < b; ++bi) {
        std::fill(h.begin(), h.end(), 0.0);
        for (int64_t k = 0; k < n; ++k)
            for (int64_t ch = 0; ch < c; ++ch) {
                const double xv = x.data[static_cast<size_t>((bi * n + k) * c + ch)];
                double out = 0.0;
                for (int64_t j = 0; j < s; ++j) {
                    double& hv = h[static_cast<size_t>(ch * s + j)];
                    hv = a_bar[static_cast<size_t>(ch * s + j)] * hv +
                         b_bar[static_cast<size_t>(ch * s + j)] * xv;
                    out += c_bar[static_cast<size_t>(ch * s + j)] * hv;
                }
                y.data[static_cast<size_t>((bi * n + k) * c + ch)] = out;
            }
    }
    return y;
}

SequenceTensor selective_ssm_forward(const SsmParams& p, const SequenceTensor& u) {
    const int64_t b = u.b, n = u.n, c = u.c, s = p.state_dim;
    SequenceTensor y(b, n, c);
    std::vector<double> h(static_cast<size_t>(c * s));
    std::vector<double> bk(static_cast<size_t>(s)), ck(static_cast<size_t>(s));
    for (int64_t bi = 0; bi < b; ++bi) {
        std::fill(h.begin(), h.end(), 0.0);
        for (int64_t k = 0; k < n; ++k) {
            const double* uk = u.data.data() + (bi * n + k) * c;
            double praw = p.bias_delta[0];
            for (int64_t ch = 0; ch < c; ++ch) praw += uk[ch] * p.w_delta[static_cast<size_t>(ch)];
            const double dk = softplus(praw);
            for (int64_t j = 0; j < s; ++j) {
                bk[static_cast<size_t>(j)] = 0.0;
                ck[static_cast<size_t>(j)] = 0.0;
                for (int64_t ch = 0; ch < c; ++ch) {
                    bk[static_cast<size_t>(j)] += uk[ch] * p.w_b[static_cast<size_t>(ch * s + j)];
                    ck[static_cast<size_t>(j)] += uk[ch] * p.w_c[static_cast<size_t>(ch * s + j)];
                }
            }
            for (int64_t ch = 0; ch < c; ++ch) {
                double out = 0.0;
                for (int64_t j = 0; j < s; ++j) {
                    const double a = -std::exp(p.a_log[static_cast<size_t>(ch * s + j)]);
                    double& hv = h[static_cast<size_t>(ch * s + j)];
                    hv = std::exp(dk * a) * hv + dk * bk[static_cast<size_t>(j)] * uk[ch];
                    out += ck[static_cast<size_t>(j)] * hv;
                }
                y.data[static_cast<size_t>((bi * n + k) * c + ch)] = out;
            }
        }
    }
    return y;
}

SequenceTensor mamba_block_forward(const MambaBlockParams& p, const SequenceTensor& v) {
    const int64_t b = v.b, n = v.n, c = v.c, e = p.expand_dim, kk = p.conv_kernel;
    SequenceTensor v1(b, n, c);
    for (int64_t t = 0; t < b * n; ++t) {
        const double* xi = v.data.data() + t * c;
        double mean = 0.0, var = 0.0;
        for (int64_t i = 0; i < c; ++i) mean += xi[i];
        mean /= static_cast<double>(c);
        for (int64_t i = 0; i < c; ++i) var += (xi[i] - mean) * (xi[i] - mean);
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (int64_t i = 0; i < c; ++i)
            v1.data[static_cast<size_t>(t * c + i)] =
                p.ln_gain[static_cast<size_t>(i)] * (xi[i] - mean) * inv + p.ln_bias[static_cast<size_t>(i)];
    }

    auto matmul = [&](const SequenceTensor& x, const std::vector<double>& w, int64_t out_dim) {
        SequenceTensor y(b, n, out_dim);
        for (int64_t t = 0; t < b * n; ++t)
            for (int64_t o = 0; o < out_dim; ++o) {
                double acc = 0.0;
                for (int64_t i = 0; i < x.c; ++i)
                    acc += x.data[static_cast<size_t>(t * x.c + i)] * w[static_cast<size_t>(i * out_dim + o)];
                y.data[static_cast<size_t>(t * out_dim + o)] = acc;
            }
        return y;
    };

    SequenceTensor main_pre = matmul(v1, p.in_proj_main, e);
    SequenceTensor acts(b, n, e);
    for (int64_t bi = 0; bi < b; ++bi)
        for (int64_t k = 0; k < n; ++k)
            for (int64_t ch = 0; ch < e; ++ch) {
                double acc = 0.0;
                for (int64_t j = 0; j < kk; ++j) {
                    const int64_t src = k - kk + 1 + j;
                    if (src >= 0)
                        acc += p.conv_w[static_cast<size_t>(ch * kk + j)] *
                               main_pre.data[static_cast<size_t>((bi * n + src) * e + ch)];
                }
                acts.data[static_cast<size_t>((bi * n + k) * e + ch)] = silu(acc);
            }

    SequenceTensor ssm_out = selective_ssm_forward(p.ssm, acts);
    SequenceTensor gate = matmul(v1, p.in_proj_gate, e);
    SequenceTensor gated(b, n, e);
    for (size_t i = 0; i < gated.data.size(); ++i)
        gated.data[i] = ssm_out.data[i] * silu(gate.data[i]);
    SequenceTensor out = matmul(gated, p.out_proj, c);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += v.data[i];
    return out;
}

FeatureGrid coarse_to_fine(const FeatureGrid& grid, const GridDims& target) {
    GridDims out_dims = target;
    out_dims.c = grid.dims.c;
    FeatureGrid out(out_dims);
    const GridDims& s = grid.dims;
    auto axis = [](int64_t o, int64_t src, int64_t dst, double& w, int64_t& i0, int64_t& i1) {
        const double pos = (static_cast<double>(o) + 0.5) * static_cast<double>(src) /
                               static_cast<double>(dst) -
                           0.5;
        const double f = std::floor(pos);
        w = pos - f;
        i0 = std::clamp(static_cast<int64_t>(f), int64_t{0}, src - 1);
        i1 = std::clamp(static_cast<int64_t>(f) + 1, int64_t{0}, src - 1);
    };
    for (int64_t z = 0; z < out_dims.d; ++z)
        for (int64_t y = 0; y < out_dims.h; ++y)
            for (int64_t x = 0; x < out_dims.w; ++x) {
                double wx, wy, wz;
                int64_t x0, x1, y0, y1, z0, z1;
                axis(x, s.w, out_dims.w, wx, x0, x1);
                axis(y, s.h, out_dims.h, wy, y0, y1);
                axis(z, s.d, out_dims.d, wz, z0, z1);
                for (int64_t ch = 0; ch < s.c; ++ch) {
                    double acc = 0.0;
                    for (int cz = 0; cz < 2; ++cz)
                        for (int cy = 0; cy < 2; ++cy)
                            for (int cx = 0; cx < 2; ++cx) {
                                const double wgt = (cx ? wx : 1 - wx) * (cy ? wy : 1 - wy) *
                                                   (cz ? wz : 1 - wz);
                                acc += wgt * grid.at(cx ? x1 : x0, cy ? y1 : y0, cz ? z1 : z0, ch);
                            }
                    out.at(x, y, z, ch) = acc;
                }
            }
    return out;
}

}  // namespace voxseq::ref
