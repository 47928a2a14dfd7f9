#ifndef VOXSEQ_OCC_HEAD_HPP
#define VOXSEQ_OCC_HEAD_HPP

#include "voxseq/block.hpp"
#include "voxseq/grid.hpp"

namespace voxseq {

// Per-voxel class logits; class 0 is empty/free.
struct OccupancyPrediction {
    GridDims dims;  // c = number of classes
    std::vector<double> logits;

    int64_t num_classes() const { return dims.c; }
};

// Channel concatenation of two spatially identical volumes, lidar first.
FeatureGrid fuse_concat(const FeatureGrid& v_lidar, const FeatureGrid& v_camera);

// Trilinear interpolation to the target resolution, align-corners-false.
// Target must be >= source on every axis; channels unchanged.
FeatureGrid coarse_to_fine(const FeatureGrid& grid, const GridDims& target);

// Scatter of upstream gradients back through the interpolation weights.
FeatureGrid coarse_to_fine_backward(const GridDims& source, const FeatureGrid& upstream);

// Two-layer per-voxel classifier: linear -> SiLU -> linear.
struct MlpParams {
    int64_t in_dim = 0, hidden_dim = 0, out_dim = 0;
    std::vector<double> w1;  // in*hidden
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden*out
    std::vector<double> b2;  // out
};

template <class F>
void for_each_tensor(MlpParams& p, F&& f) {
    f(p.w1);
    f(p.b1);
    f(p.w2);
    f(p.b2);
}

MlpParams init_mlp(int64_t in_dim, int64_t hidden_dim, int64_t out_dim, Rng& rng);

struct MlpCtx {
    std::vector<double> hidden_pre;  // voxels*hidden, pre-SiLU
    std::vector<double> hidden;      // voxels*hidden
};

OccupancyPrediction classify(const FeatureGrid& grid, const MlpParams& mlp, int64_t num_classes,
                             MlpCtx* ctx = nullptr);

// Accumulates into `grad` and returns d(input grid).
FeatureGrid classify_backward(const FeatureGrid& grid, const MlpParams& mlp, const MlpCtx& ctx,
                              const std::vector<double>& upstream_logits, MlpParams& grad);

MlpParams zeros_like(const MlpParams& params);

}  // namespace voxseq

#endif
