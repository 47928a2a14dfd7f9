#include "voxseq/hierarchy.hpp"

#include <algorithm>

namespace voxseq {

std::vector<int64_t> HierarchyConfig::widths() const {
    if (!level_channels.empty()) {
        if (static_cast<int64_t>(level_channels.size()) != groups)
            throw std::invalid_argument("level_channels must have one entry per group");
        return level_channels;
    }
    std::vector<int64_t> w(static_cast<size_t>(groups));
    for (int64_t l = 0; l < groups; ++l)
        w[static_cast<size_t>(l)] = std::min(base_channels << l, base_channels * 4);
    return w;
}

void HierarchyConfig::validate() const {
    if (groups < 1 || blocks_per_group < 1 || base_channels < 1 || state_dim < 1 || conv_kernel < 1)
        throw std::invalid_argument("hierarchy config fields must be >= 1");
    widths();
}

HierarchyParams init_hierarchy(const HierarchyConfig& config, Rng& rng) {
    config.validate();
    HierarchyParams p;
    p.config = config;
    const auto w = config.widths();
    auto make_level = [&](int64_t width) {
        std::vector<MambaBlockParams> blocks;
        for (int64_t i = 0; i < config.blocks_per_group; ++i)
            blocks.push_back(init_mamba_block(width, config.state_dim, rng, 2 * width,
                                              config.conv_kernel));
        return blocks;
    };
    auto make_map = [&](int64_t c_in, int64_t c_out) {
        std::vector<double> m(static_cast<size_t>(c_in * c_out));
        const double bound = 1.0 / std::sqrt(static_cast<double>(c_in));
        for (auto& v : m) v = rng.uniform(-bound, bound);
        return m;
    };
    for (int64_t l = 0; l < config.groups; ++l) {
        p.enc_blocks.push_back(make_level(w[static_cast<size_t>(l)]));
        p.dec_blocks.push_back(make_level(w[static_cast<size_t>(l)]));
    }
    for (int64_t l = 0; l + 1 < config.groups; ++l) {
        p.enc_channel_map.push_back(make_map(w[static_cast<size_t>(l)], w[static_cast<size_t>(l + 1)]));
        p.dec_channel_map.push_back(make_map(w[static_cast<size_t>(l + 1)], w[static_cast<size_t>(l)]));
    }
    return p;
}

HierarchyParams zeros_like_hierarchy(const HierarchyParams& params) {
    HierarchyParams g = params;
    for_each_tensor(g, [](auto& t) { std::fill(t.begin(), t.end(), 0.0); });
    return g;
}

PoolFactors pool_factors(const GridDims& dims) {
    auto f = [](int64_t v) { return (v > 1 && v % 2 == 0) ? int64_t{2} : int64_t{1}; };
    return {f(dims.w), f(dims.h), f(dims.d)};
}

FeatureGrid avg_pool(const FeatureGrid& grid, PoolFactors f) {
    const GridDims& in = grid.dims;
    GridDims out_dims{in.w / f.fx, in.h / f.fy, in.d / f.fz, in.c};
    FeatureGrid out(out_dims);
    const int64_t n = out_dims.voxels();
    const double inv = 1.0 / static_cast<double>(f.fx * f.fy * f.fz);
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % out_dims.w;
        const int64_t y = (l / out_dims.w) % out_dims.h;
        const int64_t z = l / (out_dims.w * out_dims.h);
        double* dst = out.data.data() + l * in.c;
        for (int64_t dz = 0; dz < f.fz; ++dz)
            for (int64_t dy = 0; dy < f.fy; ++dy)
                for (int64_t dx = 0; dx < f.fx; ++dx) {
                    const double* src =
                        grid.data.data() + grid.linear(x * f.fx + dx, y * f.fy + dy, z * f.fz + dz) * in.c;
                    for (int64_t ch = 0; ch < in.c; ++ch) dst[ch] += src[ch];
                }
        for (int64_t ch = 0; ch < in.c; ++ch) dst[ch] *= inv;
    }
    return out;
}

FeatureGrid avg_pool_backward(const GridDims& in_dims, PoolFactors f, const FeatureGrid& upstream) {
    FeatureGrid din(in_dims);
    const int64_t n = in_dims.voxels();
    const double inv = 1.0 / static_cast<double>(f.fx * f.fy * f.fz);
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % in_dims.w;
        const int64_t y = (l / in_dims.w) % in_dims.h;
        const int64_t z = l / (in_dims.w * in_dims.h);
        const double* up =
            upstream.data.data() + upstream.linear(x / f.fx, y / f.fy, z / f.fz) * in_dims.c;
        double* dst = din.data.data() + l * in_dims.c;
        for (int64_t ch = 0; ch < in_dims.c; ++ch) dst[ch] = up[ch] * inv;
    }
    return din;
}

FeatureGrid upsample_nearest(const FeatureGrid& grid, PoolFactors f) {
    const GridDims& in = grid.dims;
    GridDims out_dims{in.w * f.fx, in.h * f.fy, in.d * f.fz, in.c};
    FeatureGrid out(out_dims);
    const int64_t n = out_dims.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % out_dims.w;
        const int64_t y = (l / out_dims.w) % out_dims.h;
        const int64_t z = l / (out_dims.w * out_dims.h);
        const double* src = grid.data.data() + grid.linear(x / f.fx, y / f.fy, z / f.fz) * in.c;
        std::copy(src, src + in.c, out.data.data() + l * in.c);
    }
    return out;
}

FeatureGrid upsample_nearest_backward(PoolFactors f, const FeatureGrid& upstream) {
    const GridDims& up_dims = upstream.dims;
    GridDims in_dims{up_dims.w / f.fx, up_dims.h / f.fy, up_dims.d / f.fz, up_dims.c};
    FeatureGrid din(in_dims);
    const int64_t n = in_dims.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % in_dims.w;
        const int64_t y = (l / in_dims.w) % in_dims.h;
        const int64_t z = l / (in_dims.w * in_dims.h);
        double* dst = din.data.data() + l * in_dims.c;
        for (int64_t dz = 0; dz < f.fz; ++dz)
            for (int64_t dy = 0; dy < f.fy; ++dy)
                for (int64_t dx = 0; dx < f.fx; ++dx) {
                    const double* up = upstream.data.data() +
                                       upstream.linear(x * f.fx + dx, y * f.fy + dy, z * f.fz + dz) *
                                           in_dims.c;
                    for (int64_t ch = 0; ch < in_dims.c; ++ch) dst[ch] += up[ch];
                }
    }
    return din;
}

FeatureGrid channel_map(const FeatureGrid& grid, const std::vector<double>& w, int64_t out_c) {
    const int64_t in_c = grid.dims.c;
    if (static_cast<int64_t>(w.size()) != in_c * out_c)
        throw std::invalid_argument("channel_map: weight size mismatch");
    GridDims out_dims = grid.dims;
    out_dims.c = out_c;
    FeatureGrid out(out_dims);
    const int64_t n = grid.dims.voxels();
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const double* xi = grid.data.data() + l * in_c;
        double* yi = out.data.data() + l * out_c;
        for (int64_t i = 0; i < in_c; ++i) {
            const double xv = xi[i];
            const double* wr = w.data() + i * out_c;
            for (int64_t o = 0; o < out_c; ++o) yi[o] += xv * wr[o];
        }
    }
    return out;
}

FeatureGrid channel_map_backward(const FeatureGrid& grid, const std::vector<double>& w,
                                 int64_t out_c, const FeatureGrid& upstream,
                                 std::vector<double>& dw) {
    const int64_t in_c = grid.dims.c;
    const int64_t n = grid.dims.voxels();
    FeatureGrid din(grid.dims);
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const double* up = upstream.data.data() + l * out_c;
        double* dxi = din.data.data() + l * in_c;
        for (int64_t i = 0; i < in_c; ++i) {
            const double* wr = w.data() + i * out_c;
            double acc = 0.0;
            for (int64_t o = 0; o < out_c; ++o) acc += up[o] * wr[o];
            dxi[i] = acc;
        }
    }
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < in_c; ++i) {
        double* dwr = dw.data() + i * out_c;
        for (int64_t l = 0; l < n; ++l) {
            const double xv = grid.data[static_cast<size_t>(l * in_c + i)];
            const double* up = upstream.data.data() + l * out_c;
            for (int64_t o = 0; o < out_c; ++o) dwr[o] += xv * up[o];
        }
    }
    return din;
}

FeatureGrid downsample(const FeatureGrid& grid, const std::vector<double>& w, int64_t out_c) {
    return channel_map(avg_pool(grid, pool_factors(grid.dims)), w, out_c);
}

FeatureGrid upsample(const FeatureGrid& grid, const FeatureGrid& skip, const std::vector<double>& w) {
    auto factor_of = [](int64_t coarse, int64_t fine) {
        if (fine == coarse) return int64_t{1};
        if (fine == 2 * coarse) return int64_t{2};
        throw std::invalid_argument("upsample: skip extent is not 1x or 2x the input");
    };
    const PoolFactors f{factor_of(grid.dims.w, skip.dims.w), factor_of(grid.dims.h, skip.dims.h),
                        factor_of(grid.dims.d, skip.dims.d)};
    FeatureGrid mapped = channel_map(upsample_nearest(grid, f), w, skip.dims.c);
    if (mapped.dims.c != skip.dims.c)
        throw std::invalid_argument("upsample: skip channel width mismatch");
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < static_cast<int64_t>(mapped.data.size()); ++i)
        mapped.data[static_cast<size_t>(i)] += skip.data[static_cast<size_t>(i)];
    return mapped;
}

FeatureGrid mamba_group(const FeatureGrid& grid, const std::vector<MambaBlockParams>& blocks,
                        const Ordering& ordering) {
    SequenceTensor seq = apply_ordering(grid, ordering);
    for (const auto& blk : blocks) seq = mamba_block_forward(blk, seq);
    return invert_ordering(seq, ordering);
}

FeatureGrid mamba_group(const FeatureGrid& grid, const std::vector<MambaBlockParams>& blocks,
                        std::shared_ptr<const Ordering> ordering, MambaGroupCtx* ctx) {
    if (!ctx) return mamba_group(grid, blocks, *ordering);
    ctx->ordering = ordering;
    ctx->inputs.clear();
    ctx->block_ctxs.assign(blocks.size(), {});
    SequenceTensor seq = apply_ordering(grid, *ordering);
    for (size_t i = 0; i < blocks.size(); ++i) {
        ctx->inputs.push_back(seq);
        seq = mamba_block_forward(blocks[i], seq, &ctx->block_ctxs[i]);
    }
    return invert_ordering(seq, *ordering);
}

FeatureGrid mamba_group_backward(const std::vector<MambaBlockParams>& blocks,
                                 const MambaGroupCtx& ctx, const FeatureGrid& upstream,
                                 std::vector<MambaBlockParams>& grads) {
    // Gradient of invert_ordering is apply_ordering and vice versa.
    SequenceTensor dseq = apply_ordering(upstream, *ctx.ordering);
    for (size_t i = blocks.size(); i-- > 0;) {
        SequenceTensor din(dseq.b, dseq.n, dseq.c);
        mamba_block_backward(blocks[i], ctx.inputs[i], ctx.block_ctxs[i], dseq, grads[i], din);
        dseq = std::move(din);
    }
    return invert_ordering(dseq, *ctx.ordering);
}

EncoderOut encoder_forward(const HierarchyParams& params, const FeatureGrid& grid,
                           OrderingCache& cache, EncoderCtx* ctx) {
    const auto& cfg = params.config;
    const auto widths = cfg.widths();
    if (grid.dims.c != widths[0])
        throw std::invalid_argument("encoder_forward: grid channels must equal base width");

    EncoderOut out;
    FeatureGrid cur = grid;
    if (ctx) {
        ctx->groups.assign(static_cast<size_t>(cfg.groups), {});
        ctx->pooled.clear();
        ctx->factors.clear();
        ctx->level_dims.clear();
    }
    for (int64_t l = 0; l < cfg.groups; ++l) {
        if (ctx) ctx->level_dims.push_back(cur.dims);
        auto ordering = cache.get(cfg.scheme, cur.dims);
        cur = mamba_group(cur, params.enc_blocks[static_cast<size_t>(l)], ordering,
                          ctx ? &ctx->groups[static_cast<size_t>(l)] : nullptr);
        if (l + 1 < cfg.groups) {
            out.state.skips.push_back(cur);
            const PoolFactors f = pool_factors(cur.dims);
            FeatureGrid pooled = avg_pool(cur, f);
            if (ctx) {
                ctx->factors.push_back(f);
                ctx->pooled.push_back(pooled);
            }
            cur = channel_map(pooled, params.enc_channel_map[static_cast<size_t>(l)],
                              widths[static_cast<size_t>(l + 1)]);
        }
    }
    out.latent = std::move(cur);
    return out;
}

FeatureGrid decoder_forward(const HierarchyParams& params, const FeatureGrid& latent,
                            const HierarchyState& state, OrderingCache& cache, DecoderCtx* ctx) {
    const auto& cfg = params.config;
    const auto widths = cfg.widths();
    if (static_cast<int64_t>(state.skips.size()) != cfg.groups - 1)
        throw std::invalid_argument("decoder_forward: skip count must be groups - 1");

    FeatureGrid cur = latent;
    if (ctx) {
        ctx->groups.assign(static_cast<size_t>(cfg.groups), {});
        ctx->upsampled.assign(static_cast<size_t>(cfg.groups - 1), FeatureGrid{});
    }
    for (int64_t l = cfg.groups - 1; l >= 0; --l) {
        auto ordering = cache.get(cfg.scheme, cur.dims);
        cur = mamba_group(cur, params.dec_blocks[static_cast<size_t>(l)], ordering,
                          ctx ? &ctx->groups[static_cast<size_t>(l)] : nullptr);
        if (l > 0) {
            const FeatureGrid& skip = state.skips[static_cast<size_t>(l - 1)];
            if (ctx) ctx->upsampled[static_cast<size_t>(l - 1)] = cur;
            cur = upsample(cur, skip, params.dec_channel_map[static_cast<size_t>(l - 1)]);
            if (cur.dims.c != widths[static_cast<size_t>(l - 1)])
                throw std::invalid_argument("decoder_forward: skip width mismatch");
        }
    }
    return cur;
}

DecoderGrads decoder_backward(const HierarchyParams& params, const DecoderCtx& ctx,
                              const FeatureGrid& upstream, HierarchyParams& grads) {
    const auto& cfg = params.config;
    DecoderGrads out;
    out.dskips.assign(static_cast<size_t>(cfg.groups - 1), FeatureGrid{});

    FeatureGrid dcur = upstream;
    for (int64_t l = 0; l < cfg.groups; ++l) {
        if (l > 0) {
            // Forward here was: cur = channel_map(nearest(cur)) + skip.
            out.dskips[static_cast<size_t>(l - 1)] = dcur;
            const FeatureGrid& up_in = ctx.upsampled[static_cast<size_t>(l - 1)];
            const PoolFactors f{dcur.dims.w / up_in.dims.w, dcur.dims.h / up_in.dims.h,
                                dcur.dims.d / up_in.dims.d};
            FeatureGrid dnearest =
                channel_map_backward(upsample_nearest(up_in, f),
                                     params.dec_channel_map[static_cast<size_t>(l - 1)],
                                     dcur.dims.c, dcur,
                                     grads.dec_channel_map[static_cast<size_t>(l - 1)]);
            dcur = upsample_nearest_backward(f, dnearest);
        }
        dcur = mamba_group_backward(params.dec_blocks[static_cast<size_t>(l)],
                                    ctx.groups[static_cast<size_t>(l)], dcur,
                                    grads.dec_blocks[static_cast<size_t>(l)]);
    }
    out.dlatent = std::move(dcur);
    return out;
}

FeatureGrid encoder_backward(const HierarchyParams& params, const EncoderCtx& ctx,
                             const FeatureGrid& dlatent, const std::vector<FeatureGrid>& dskips,
                             HierarchyParams& grads) {
    const auto& cfg = params.config;
    FeatureGrid dcur = dlatent;
    for (int64_t l = cfg.groups - 1; l >= 0; --l) {
        if (l + 1 < cfg.groups) {
            FeatureGrid dpooled = channel_map_backward(
                ctx.pooled[static_cast<size_t>(l)], params.enc_channel_map[static_cast<size_t>(l)],
                dcur.dims.c, dcur, grads.enc_channel_map[static_cast<size_t>(l)]);
            GridDims skip_dims = ctx.level_dims[static_cast<size_t>(l)];
            skip_dims.c = dpooled.dims.c;
            FeatureGrid dgroup_out =
                avg_pool_backward(skip_dims, ctx.factors[static_cast<size_t>(l)], dpooled);
            // The group output fed both the pool and the skip connection.
            const FeatureGrid& dskip = dskips[static_cast<size_t>(l)];
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < static_cast<int64_t>(dgroup_out.data.size()); ++i)
                dgroup_out.data[static_cast<size_t>(i)] += dskip.data[static_cast<size_t>(i)];
            dcur = std::move(dgroup_out);
        }
        dcur = mamba_group_backward(params.enc_blocks[static_cast<size_t>(l)],
                                    ctx.groups[static_cast<size_t>(l)], dcur,
                                    grads.enc_blocks[static_cast<size_t>(l)]);
    }
    return dcur;
}

}  // namespace voxseq
