#ifndef VOXSEQ_TRAINING_HPP
#define VOXSEQ_TRAINING_HPP

#include <string>

#include "voxseq/hierarchy.hpp"
#include "voxseq/losses.hpp"
#include "voxseq/synth.hpp"

namespace voxseq {

struct TrainConfig {
    int64_t steps = 300;
    double learning_rate = 0.4;
    uint64_t seed = 1;
    GridDims dims{16, 16, 8, 16};  // c = base feature channels
    int64_t num_classes = 4;
    int64_t batch = 1;
    HierarchyConfig hierarchy;
    LossWeights weights;
    double noise_sigma = 0.5;
    int64_t eval_every = 50;
    int64_t eval_scenes = 8;

    // Held-out scenes use a disjoint seed range.
    uint64_t eval_seed(int64_t i) const { return seed + 1'000'000 + static_cast<uint64_t>(i); }
    uint64_t train_seed(int64_t step) const { return seed + static_cast<uint64_t>(step); }

    void validate() const;
};

struct Model {
    HierarchyParams hierarchy;
    MlpParams head;
    int64_t num_classes = 0;
    GridDims dims;
    double noise_sigma = 0.5;
};

Model init_model(const TrainConfig& config);

// Full forward pass: fuse the two channel halves, run encoder/decoder,
// interpolate to the label resolution and classify.
OccupancyPrediction model_forward(const Model& model, const FeatureGrid& features,
                                  OrderingCache& cache);

struct TrainResult {
    std::vector<std::string> log_lines;  // line-delimited JSON
    Model model;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    MetricsReport final_eval;
    bool diverged = false;
    int64_t diverged_step = -1;
};

TrainResult train_toy(const TrainConfig& config);

MetricsReport evaluate(const Model& model, const std::vector<uint64_t>& scene_seeds);

// VPRM model file: config header plus every tensor as f64 little-endian.
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace voxseq

#endif
