#ifndef VOXSEQ_SYNTH_HPP
#define VOXSEQ_SYNTH_HPP

#include "voxseq/grid.hpp"
#include "voxseq/rng.hpp"

namespace voxseq {

// Procedural occupancy scene: class 1 ground slab at z=0, class 2 boxes,
// class 3 vertical columns, class 0 empty. Features are a fixed linear
// embedding of the one-hot labels plus Gaussian noise. Everything is a pure
// function of (seed, dims, K, options).
struct SceneSample {
    FeatureGrid features;
    LabelGrid labels;
    uint64_t seed = 0;
};

struct GeneratorOptions {
    double noise_sigma = 0.5;
    // Identity embedding maps class k to channel k (requires c >= K);
    // otherwise a fixed Gaussian embedding keyed by (K, c) is used.
    bool identity_embedding = false;
};

// The embedding is shared across all scenes of a given (K, channels) so
// disjoint train/eval seed ranges see the same feature space.
std::vector<double> class_embedding(int64_t num_classes, int64_t channels,
                                    bool identity = false);

SceneSample generate_scene(uint64_t seed, const GridDims& dims, int64_t num_classes,
                           const GeneratorOptions& options = {});

}  // namespace voxseq

#endif
