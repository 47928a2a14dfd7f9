#ifndef VOXSEQ_LOSSES_HPP
#define VOXSEQ_LOSSES_HPP

#include <optional>

#include "voxseq/occ_head.hpp"

namespace voxseq {

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;  // matches the input layout
};

// Mean negative log-softmax of the true class over non-ignored voxels.
// Gradient is with respect to the logits. All-ignored input yields 0.
LossAndGrad cross_entropy(const OccupancyPrediction& logits, const LabelGrid& labels,
                          uint16_t ignore_label = kIgnoreLabel);

// Row-wise softmax over classes; probs layout matches logits.
std::vector<double> softmax_rows(const std::vector<double>& logits, int64_t num_classes);
// dlogits from dprobs for a row-wise softmax.
std::vector<double> softmax_rows_backward(const std::vector<double>& probs,
                                          const std::vector<double>& dprobs, int64_t num_classes);

// Lovász extension of the Jaccard error, averaged over classes present in
// the (non-ignored) labels. Gradient is with respect to the probabilities.
LossAndGrad lovasz_softmax(const std::vector<double>& probs, const GridDims& dims,
                           const LabelGrid& labels, int64_t num_classes,
                           uint16_t ignore_label = kIgnoreLabel);

// Eq-style combiner: L = ce + l1*iou + l2*geo + l3*sem + l4*depth.
struct LossWeights {
    double lambda1 = 1.0, lambda2 = 1.0, lambda3 = 1.0, lambda4 = 1.0;
};

struct LossParts {
    double ce = 0.0;
    double iou = 0.0;
    std::optional<double> geo;    // externally supplied affinity/depth terms
    std::optional<double> sem;
    std::optional<double> depth;
};

double total_loss(const LossParts& parts, const LossWeights& weights);

// K x K counts, rows = ground truth, cols = prediction.
struct ConfusionMatrix {
    int64_t num_classes = 0;
    uint16_t ignore_label = kIgnoreLabel;
    std::vector<uint64_t> counts;  // K*K

    explicit ConfusionMatrix(int64_t k, uint16_t ignore = kIgnoreLabel)
        : num_classes(k), ignore_label(ignore), counts(static_cast<size_t>(k * k), 0) {
        if (k < 2) throw std::invalid_argument("confusion matrix needs K >= 2");
    }

    uint64_t at(int64_t gt, int64_t pred) const {
        return counts[static_cast<size_t>(gt * num_classes + pred)];
    }
};

void confusion_accumulate(ConfusionMatrix& cm, const LabelGrid& prediction, const LabelGrid& gt);
ConfusionMatrix confusion_merge(const ConfusionMatrix& a, const ConfusionMatrix& b);

struct MetricsReport {
    std::vector<double> iou;          // per class; NaN where undefined
    double miou = 0.0;                // mean over semantic classes (class 0 excluded)
    bool miou_defined = false;
    double geometry_iou = 0.0;        // binarized occupied-vs-empty
    bool geometry_defined = false;
    uint64_t total_voxels = 0;
};

MetricsReport iou_from_confusion(const ConfusionMatrix& cm);

}  // namespace voxseq

#endif
