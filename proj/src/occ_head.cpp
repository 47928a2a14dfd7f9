#include "voxseq/occ_head.hpp"

#include <algorithm>
#include <cmath>

namespace voxseq {
namespace {

struct AxisSample {
    int64_t i0, i1;
    double frac;
};

AxisSample sample_axis(int64_t o, int64_t src, int64_t dst) {
    const double pos =
        (static_cast<double>(o) + 0.5) * static_cast<double>(src) / static_cast<double>(dst) - 0.5;
    const double f = std::floor(pos);
    AxisSample s;
    s.frac = pos - f;
    s.i0 = std::clamp(static_cast<int64_t>(f), int64_t{0}, src - 1);
    s.i1 = std::clamp(static_cast<int64_t>(f) + 1, int64_t{0}, src - 1);
    return s;
}

}  // namespace

FeatureGrid fuse_concat(const FeatureGrid& v_lidar, const FeatureGrid& v_camera) {
    if (!v_lidar.dims.same_space(v_camera.dims))
        throw std::invalid_argument("fuse_concat: spatial dims mismatch");
    GridDims dims = v_lidar.dims;
    dims.c = v_lidar.dims.c + v_camera.dims.c;
    FeatureGrid out(dims);
    const int64_t n = dims.voxels();
    const int64_t cl = v_lidar.dims.c, cc = v_camera.dims.c;
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        double* dst = out.data.data() + l * dims.c;
        const double* a = v_lidar.data.data() + l * cl;
        const double* b = v_camera.data.data() + l * cc;
        std::copy(a, a + cl, dst);
        std::copy(b, b + cc, dst + cl);
    }
    return out;
}

FeatureGrid coarse_to_fine(const FeatureGrid& grid, const GridDims& target) {
    const GridDims& s = grid.dims;
    if (target.w < s.w || target.h < s.h || target.d < s.d)
        throw std::invalid_argument("coarse_to_fine: target smaller than source");
    GridDims out_dims = target;
    out_dims.c = s.c;
    out_dims.validate();
    FeatureGrid out(out_dims);
    const int64_t n = out_dims.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % out_dims.w;
        const int64_t y = (l / out_dims.w) % out_dims.h;
        const int64_t z = l / (out_dims.w * out_dims.h);
        const AxisSample ax = sample_axis(x, s.w, out_dims.w);
        const AxisSample ay = sample_axis(y, s.h, out_dims.h);
        const AxisSample az = sample_axis(z, s.d, out_dims.d);
        double* dst = out.data.data() + l * s.c;
        for (int64_t ch = 0; ch < s.c; ++ch) {
            double acc = 0.0;
            for (int cz = 0; cz < 2; ++cz)
                for (int cy = 0; cy < 2; ++cy)
                    for (int cx = 0; cx < 2; ++cx) {
                        const double w = (cx ? ax.frac : 1 - ax.frac) * (cy ? ay.frac : 1 - ay.frac) *
                                         (cz ? az.frac : 1 - az.frac);
                        acc += w * grid.at(cx ? ax.i1 : ax.i0, cy ? ay.i1 : ay.i0,
                                           cz ? az.i1 : az.i0, ch);
                    }
            dst[ch] = acc;
        }
    }
    return out;
}

FeatureGrid coarse_to_fine_backward(const GridDims& source, const FeatureGrid& upstream) {
    GridDims src = source;
    src.c = upstream.dims.c;
    FeatureGrid din(src);
    const GridDims& o = upstream.dims;
    // Scatter stays serial: several output voxels share input corners.
    for (int64_t z = 0; z < o.d; ++z)
        for (int64_t y = 0; y < o.h; ++y)
            for (int64_t x = 0; x < o.w; ++x) {
                const AxisSample ax = sample_axis(x, src.w, o.w);
                const AxisSample ay = sample_axis(y, src.h, o.h);
                const AxisSample az = sample_axis(z, src.d, o.d);
                const double* up = upstream.data.data() + upstream.linear(x, y, z) * o.c;
                for (int cz = 0; cz < 2; ++cz)
                    for (int cy = 0; cy < 2; ++cy)
                        for (int cx = 0; cx < 2; ++cx) {
                            const double w = (cx ? ax.frac : 1 - ax.frac) *
                                             (cy ? ay.frac : 1 - ay.frac) *
                                             (cz ? az.frac : 1 - az.frac);
                            if (w == 0.0) continue;
                            double* dst = din.data.data() +
                                          din.linear(cx ? ax.i1 : ax.i0, cy ? ay.i1 : ay.i0,
                                                     cz ? az.i1 : az.i0) *
                                              src.c;
                            for (int64_t ch = 0; ch < src.c; ++ch) dst[ch] += w * up[ch];
                        }
            }
    return din;
}

MlpParams init_mlp(int64_t in_dim, int64_t hidden_dim, int64_t out_dim, Rng& rng) {
    MlpParams p;
    p.in_dim = in_dim;
    p.hidden_dim = hidden_dim;
    p.out_dim = out_dim;
    const double b1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    p.w1.resize(static_cast<size_t>(in_dim * hidden_dim));
    for (auto& v : p.w1) v = rng.uniform(-b1, b1);
    p.b1.assign(static_cast<size_t>(hidden_dim), 0.0);
    p.w2.resize(static_cast<size_t>(hidden_dim * out_dim));
    for (auto& v : p.w2) v = rng.uniform(-b2, b2);
    p.b2.assign(static_cast<size_t>(out_dim), 0.0);
    return p;
}

MlpParams zeros_like(const MlpParams& params) {
    MlpParams g = params;
    for_each_tensor(g, [](auto& t) { std::fill(t.begin(), t.end(), 0.0); });
    return g;
}

OccupancyPrediction classify(const FeatureGrid& grid, const MlpParams& mlp, int64_t num_classes,
                             MlpCtx* ctx) {
    if (grid.dims.c != mlp.in_dim) throw std::invalid_argument("classify: channel width mismatch");
    if (mlp.out_dim != num_classes) throw std::invalid_argument("classify: class count mismatch");
    const int64_t n = grid.dims.voxels();
    OccupancyPrediction pred;
    pred.dims = grid.dims;
    pred.dims.c = num_classes;
    pred.logits.assign(static_cast<size_t>(n * num_classes), 0.0);
    if (ctx) {
        ctx->hidden_pre.resize(static_cast<size_t>(n * mlp.hidden_dim));
        ctx->hidden.resize(static_cast<size_t>(n * mlp.hidden_dim));
    }
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const double* xi = grid.data.data() + l * mlp.in_dim;
        std::vector<double> hpre(static_cast<size_t>(mlp.hidden_dim));
        for (int64_t j = 0; j < mlp.hidden_dim; ++j) hpre[static_cast<size_t>(j)] = mlp.b1[static_cast<size_t>(j)];
        for (int64_t i = 0; i < mlp.in_dim; ++i) {
            const double xv = xi[i];
            const double* wr = mlp.w1.data() + i * mlp.hidden_dim;
            for (int64_t j = 0; j < mlp.hidden_dim; ++j) hpre[static_cast<size_t>(j)] += xv * wr[j];
        }
        double* logits = pred.logits.data() + l * num_classes;
        for (int64_t k = 0; k < num_classes; ++k) logits[k] = mlp.b2[static_cast<size_t>(k)];
        for (int64_t j = 0; j < mlp.hidden_dim; ++j) {
            const double hj = silu(hpre[static_cast<size_t>(j)]);
            const double* wr = mlp.w2.data() + j * num_classes;
            for (int64_t k = 0; k < num_classes; ++k) logits[k] += hj * wr[k];
            if (ctx) {
                ctx->hidden_pre[static_cast<size_t>(l * mlp.hidden_dim + j)] = hpre[static_cast<size_t>(j)];
                ctx->hidden[static_cast<size_t>(l * mlp.hidden_dim + j)] = hj;
            }
        }
    }
    return pred;
}

FeatureGrid classify_backward(const FeatureGrid& grid, const MlpParams& mlp, const MlpCtx& ctx,
                              const std::vector<double>& upstream_logits, MlpParams& grad) {
    const int64_t n = grid.dims.voxels();
    if (static_cast<int64_t>(upstream_logits.size()) != n * mlp.out_dim)
        throw std::invalid_argument("classify_backward: upstream shape mismatch");
    FeatureGrid din(grid.dims);

    std::vector<double> dhidden_pre(static_cast<size_t>(n * mlp.hidden_dim));
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const double* up = upstream_logits.data() + l * mlp.out_dim;
        double* dhp = dhidden_pre.data() + l * mlp.hidden_dim;
        for (int64_t j = 0; j < mlp.hidden_dim; ++j) {
            const double* wr = mlp.w2.data() + j * mlp.out_dim;
            double acc = 0.0;
            for (int64_t k = 0; k < mlp.out_dim; ++k) acc += up[k] * wr[k];
            dhp[j] = acc * silu_grad(ctx.hidden_pre[static_cast<size_t>(l * mlp.hidden_dim + j)]);
        }
        double* dxi = din.data.data() + l * mlp.in_dim;
        for (int64_t i = 0; i < mlp.in_dim; ++i) {
            const double* wr = mlp.w1.data() + i * mlp.hidden_dim;
            double acc = 0.0;
            for (int64_t j = 0; j < mlp.hidden_dim; ++j) acc += dhp[j] * wr[j];
            dxi[i] = acc;
        }
    }

#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < mlp.in_dim; ++i) {
        double* dwr = grad.w1.data() + i * mlp.hidden_dim;
        for (int64_t l = 0; l < n; ++l) {
            const double xv = grid.data[static_cast<size_t>(l * mlp.in_dim + i)];
            const double* dhp = dhidden_pre.data() + l * mlp.hidden_dim;
            for (int64_t j = 0; j < mlp.hidden_dim; ++j) dwr[j] += xv * dhp[j];
        }
    }
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < mlp.hidden_dim; ++j) {
        double* dwr = grad.w2.data() + j * mlp.out_dim;
        double db = 0.0;
        for (int64_t l = 0; l < n; ++l) {
            const double hj = ctx.hidden[static_cast<size_t>(l * mlp.hidden_dim + j)];
            const double* up = upstream_logits.data() + l * mlp.out_dim;
            for (int64_t k = 0; k < mlp.out_dim; ++k) dwr[k] += hj * up[k];
            db += dhidden_pre[static_cast<size_t>(l * mlp.hidden_dim + j)];
        }
        grad.b1[static_cast<size_t>(j)] += db;
    }
    for (int64_t k = 0; k < mlp.out_dim; ++k) {
        double db = 0.0;
        for (int64_t l = 0; l < n; ++l) db += upstream_logits[static_cast<size_t>(l * mlp.out_dim + k)];
        grad.b2[static_cast<size_t>(k)] += db;
    }
    return din;
}

}  // namespace voxseq
