#ifndef VOXSEQ_HIERARCHY_HPP
#define VOXSEQ_HIERARCHY_HPP

#include <memory>

#include "voxseq/block.hpp"
#include "voxseq/ordering.hpp"

namespace voxseq {

struct HierarchyConfig {
    int64_t groups = 4;
    int64_t blocks_per_group = 2;
    OrderingScheme scheme{SchemeKind::HeightPrioritizedHilbert2D, false};
    int64_t base_channels = 16;
    int64_t state_dim = 8;
    int64_t conv_kernel = 4;
    // Optional per-level override; empty means width doubles per level,
    // capped at 4x base.
    std::vector<int64_t> level_channels;

    std::vector<int64_t> widths() const;
    void validate() const;
};

struct HierarchyParams {
    HierarchyConfig config;
    std::vector<std::vector<MambaBlockParams>> enc_blocks;  // [level][block]
    std::vector<std::vector<double>> enc_channel_map;       // [level]: c_l x c_{l+1}
    std::vector<std::vector<MambaBlockParams>> dec_blocks;  // [level][block]
    std::vector<std::vector<double>> dec_channel_map;       // [level]: c_{l+1} x c_l
};

HierarchyParams init_hierarchy(const HierarchyConfig& config, Rng& rng);

template <class F>
void for_each_tensor(HierarchyParams& p, F&& f) {
    for (auto& level : p.enc_blocks)
        for (auto& blk : level) for_each_tensor(blk, f);
    for (auto& m : p.enc_channel_map) f(m);
    for (auto& level : p.dec_blocks)
        for (auto& blk : level) for_each_tensor(blk, f);
    for (auto& m : p.dec_channel_map) f(m);
}

HierarchyParams zeros_like_hierarchy(const HierarchyParams& params);

// Skip features saved on the way down, one per encoder level below the top.
struct HierarchyState {
    std::vector<FeatureGrid> skips;  // groups - 1 entries, finest first
};

// --- pooling / resampling ----------------------------------------------------

// Per-axis pooling factor: 2 where the extent is even and > 1, else 1.
struct PoolFactors {
    int64_t fx = 1, fy = 1, fz = 1;
};
PoolFactors pool_factors(const GridDims& dims);

FeatureGrid avg_pool(const FeatureGrid& grid, PoolFactors f);
FeatureGrid avg_pool_backward(const GridDims& in_dims, PoolFactors f, const FeatureGrid& upstream);

FeatureGrid upsample_nearest(const FeatureGrid& grid, PoolFactors f);
FeatureGrid upsample_nearest_backward(PoolFactors f, const FeatureGrid& upstream);

// 1x1x1 learned channel map; w is c_in x c_out row-major.
FeatureGrid channel_map(const FeatureGrid& grid, const std::vector<double>& w, int64_t out_c);
FeatureGrid channel_map_backward(const FeatureGrid& grid, const std::vector<double>& w,
                                 int64_t out_c, const FeatureGrid& upstream, std::vector<double>& dw);

// Average pooling followed by the learned channel map.
FeatureGrid downsample(const FeatureGrid& grid, const std::vector<double>& w, int64_t out_c);
// Nearest-neighbor expansion to the skip's space, channel map, plus skip.
FeatureGrid upsample(const FeatureGrid& grid, const FeatureGrid& skip, const std::vector<double>& w);

// --- groups and the encoder/decoder ------------------------------------------

struct MambaGroupCtx {
    std::shared_ptr<const Ordering> ordering;
    std::vector<SequenceTensor> inputs;  // input sequence of every block
    std::vector<MambaBlockCtx> block_ctxs;
};

// apply_ordering -> blocks in sequence -> invert_ordering.
FeatureGrid mamba_group(const FeatureGrid& grid, const std::vector<MambaBlockParams>& blocks,
                        const Ordering& ordering);
FeatureGrid mamba_group(const FeatureGrid& grid, const std::vector<MambaBlockParams>& blocks,
                        std::shared_ptr<const Ordering> ordering, MambaGroupCtx* ctx);
FeatureGrid mamba_group_backward(const std::vector<MambaBlockParams>& blocks,
                                 const MambaGroupCtx& ctx, const FeatureGrid& upstream,
                                 std::vector<MambaBlockParams>& grads);

struct EncoderCtx {
    std::vector<MambaGroupCtx> groups;
    std::vector<FeatureGrid> pooled;      // channel-map inputs, per downsample
    std::vector<PoolFactors> factors;     // per downsample
    std::vector<GridDims> level_dims;     // dims entering each level
};

struct DecoderCtx {
    std::vector<MambaGroupCtx> groups;   // indexed by level
    std::vector<FeatureGrid> upsampled;  // channel-map inputs, per upsample
};

struct EncoderOut {
    FeatureGrid latent;
    HierarchyState state;
};

EncoderOut encoder_forward(const HierarchyParams& params, const FeatureGrid& grid,
                           OrderingCache& cache, EncoderCtx* ctx = nullptr);
FeatureGrid decoder_forward(const HierarchyParams& params, const FeatureGrid& latent,
                            const HierarchyState& state, OrderingCache& cache,
                            DecoderCtx* ctx = nullptr);

// dskips is filled with this pass's gradient w.r.t. each skip input.
struct DecoderGrads {
    FeatureGrid dlatent;
    std::vector<FeatureGrid> dskips;
};
DecoderGrads decoder_backward(const HierarchyParams& params, const DecoderCtx& ctx,
                              const FeatureGrid& upstream, HierarchyParams& grads);
FeatureGrid encoder_backward(const HierarchyParams& params, const EncoderCtx& ctx,
                             const FeatureGrid& dlatent, const std::vector<FeatureGrid>& dskips,
                             HierarchyParams& grads);

}  // namespace voxseq

#endif
