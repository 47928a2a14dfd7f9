#include "voxseq/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace voxseq {

LossAndGrad cross_entropy(const OccupancyPrediction& logits, const LabelGrid& labels,
                          uint16_t ignore_label) {
    const int64_t n = logits.dims.voxels();
    const int64_t k = logits.num_classes();
    if (!logits.dims.same_space(labels.dims))
        throw std::invalid_argument("cross_entropy: spatial dims mismatch");

    LossAndGrad out;
    out.grad.assign(logits.logits.size(), 0.0);

    int64_t counted = 0;
    for (int64_t l = 0; l < n; ++l)
        if (labels.data[static_cast<size_t>(l)] != ignore_label) ++counted;
    if (counted == 0) return out;  // all ignored: loss 0, zero gradient

    const double inv_count = 1.0 / static_cast<double>(counted);
    double loss = 0.0;
    // Serial voxel loop: loss is a single shared sum and n is modest here.
    for (int64_t l = 0; l < n; ++l) {
        const uint16_t y = labels.data[static_cast<size_t>(l)];
        if (y == ignore_label) continue;
        if (y >= k) throw std::invalid_argument("cross_entropy: label out of class range");
        const double* row = logits.logits.data() + l * k;
        double* grow = out.grad.data() + l * k;
        double mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        loss += (std::log(z) + mx - row[y]) * inv_count;
        for (int64_t j = 0; j < k; ++j) {
            const double p = std::exp(row[j] - mx) / z;
            grow[j] = (p - (j == y ? 1.0 : 0.0)) * inv_count;
        }
    }
    out.loss = loss;
    return out;
}

std::vector<double> softmax_rows(const std::vector<double>& logits, int64_t num_classes) {
    std::vector<double> probs(logits.size());
    const int64_t rows = static_cast<int64_t>(logits.size()) / num_classes;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const double* in = logits.data() + r * num_classes;
        double* out = probs.data() + r * num_classes;
        double mx = in[0];
        for (int64_t j = 1; j < num_classes; ++j) mx = std::max(mx, in[j]);
        double z = 0.0;
        for (int64_t j = 0; j < num_classes; ++j) {
            out[j] = std::exp(in[j] - mx);
            z += out[j];
        }
        for (int64_t j = 0; j < num_classes; ++j) out[j] /= z;
    }
    return probs;
}

std::vector<double> softmax_rows_backward(const std::vector<double>& probs,
                                          const std::vector<double>& dprobs, int64_t num_classes) {
    std::vector<double> dlogits(probs.size());
    const int64_t rows = static_cast<int64_t>(probs.size()) / num_classes;
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        const double* p = probs.data() + r * num_classes;
        const double* dp = dprobs.data() + r * num_classes;
        double* dl = dlogits.data() + r * num_classes;
        double dot = 0.0;
        for (int64_t j = 0; j < num_classes; ++j) dot += p[j] * dp[j];
        for (int64_t j = 0; j < num_classes; ++j) dl[j] = p[j] * (dp[j] - dot);
    }
    return dlogits;
}

LossAndGrad lovasz_softmax(const std::vector<double>& probs, const GridDims& dims,
                           const LabelGrid& labels, int64_t num_classes, uint16_t ignore_label) {
    const int64_t n = dims.voxels();
    if (static_cast<int64_t>(probs.size()) != n * num_classes)
        throw std::invalid_argument("lovasz_softmax: probs size mismatch");
    if (!dims.same_space(labels.dims))
        throw std::invalid_argument("lovasz_softmax: spatial dims mismatch");

    LossAndGrad out;
    out.grad.assign(probs.size(), 0.0);

    std::vector<int64_t> kept;
    kept.reserve(static_cast<size_t>(n));
    for (int64_t l = 0; l < n; ++l)
        if (labels.data[static_cast<size_t>(l)] != ignore_label) kept.push_back(l);
    if (kept.empty()) return out;

    std::vector<int64_t> present;
    {
        std::vector<bool> seen(static_cast<size_t>(num_classes), false);
        for (int64_t l : kept) {
            const uint16_t y = labels.data[static_cast<size_t>(l)];
            if (y >= num_classes) throw std::invalid_argument("lovasz_softmax: label out of range");
            seen[y] = true;
        }
        for (int64_t cl = 0; cl < num_classes; ++cl)
            if (seen[static_cast<size_t>(cl)]) present.push_back(cl);
    }

    const double class_weight = 1.0 / static_cast<double>(present.size());
    const size_t m = kept.size();
    std::vector<double> errors(m);
    std::vector<size_t> order(m);
    std::vector<double> jaccard(m);

    double loss = 0.0;
    for (int64_t cl : present) {
        for (size_t i = 0; i < m; ++i) {
            const int64_t l = kept[i];
            const bool fg = labels.data[static_cast<size_t>(l)] == cl;
            const double p = probs[static_cast<size_t>(l * num_classes + cl)];
            errors[i] = fg ? 1.0 - p : p;
        }
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return errors[a] > errors[b]; });

        // Jaccard error of the top-i error set, then its increments.
        uint64_t gts = 0;
        for (size_t i = 0; i < m; ++i)
            if (labels.data[static_cast<size_t>(kept[i])] == cl) ++gts;
        uint64_t inter = gts;  // |GT \ S_i|
        uint64_t uni = gts;    // |GT ∪ S_i|
        for (size_t i = 0; i < m; ++i) {
            const bool fg = labels.data[static_cast<size_t>(kept[order[i]])] == cl;
            if (fg)
                --inter;
            else
                ++uni;
            jaccard[i] = 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
        }
        for (size_t i = 0; i < m; ++i) {
            const double g = i == 0 ? jaccard[0] : jaccard[i] - jaccard[i - 1];
            const size_t idx = order[i];
            loss += class_weight * errors[idx] * g;
            const int64_t l = kept[idx];
            const bool fg = labels.data[static_cast<size_t>(l)] == cl;
            out.grad[static_cast<size_t>(l * num_classes + cl)] += class_weight * (fg ? -g : g);
        }
    }
    out.loss = loss;
    return out;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
    auto warn_negative = [](const char* name, double v) {
        if (v < 0.0) std::fprintf(stderr, "warning: negative %s loss (%g) summed as-is\n", name, v);
    };
    warn_negative("ce", parts.ce);
    warn_negative("iou", parts.iou);
    double total = parts.ce + weights.lambda1 * parts.iou;
    if (parts.geo) {
        warn_negative("geo", *parts.geo);
        total += weights.lambda2 * *parts.geo;
    }
    if (parts.sem) {
        warn_negative("sem", *parts.sem);
        total += weights.lambda3 * *parts.sem;
    }
    if (parts.depth) {
        warn_negative("depth", *parts.depth);
        total += weights.lambda4 * *parts.depth;
    }
    return total;
}

void confusion_accumulate(ConfusionMatrix& cm, const LabelGrid& prediction, const LabelGrid& gt) {
    if (!prediction.dims.same_space(gt.dims))
        throw std::invalid_argument("confusion_accumulate: dims mismatch");
    const int64_t n = gt.dims.voxels();
    const int64_t k = cm.num_classes;
    for (int64_t l = 0; l < n; ++l) {
        const uint16_t y = gt.data[static_cast<size_t>(l)];
        if (y == cm.ignore_label) continue;
        const uint16_t p = prediction.data[static_cast<size_t>(l)];
        if (y >= k || p >= k) throw std::invalid_argument("confusion_accumulate: label out of range");
        ++cm.counts[static_cast<size_t>(y * k + p)];
    }
}

ConfusionMatrix confusion_merge(const ConfusionMatrix& a, const ConfusionMatrix& b) {
    if (a.num_classes != b.num_classes || a.ignore_label != b.ignore_label)
        throw std::invalid_argument("confusion_merge: incompatible matrices");
    ConfusionMatrix out = a;
    for (size_t i = 0; i < out.counts.size(); ++i) out.counts[i] += b.counts[i];
    return out;
}

MetricsReport iou_from_confusion(const ConfusionMatrix& cm) {
    const int64_t k = cm.num_classes;
    MetricsReport rep;
    rep.iou.assign(static_cast<size_t>(k), std::numeric_limits<double>::quiet_NaN());

    uint64_t total = 0;
    for (uint64_t v : cm.counts) total += v;
    rep.total_voxels = total;
    if (total == 0) return rep;  // all ignored: every metric undefined

    double miou_sum = 0.0;
    int64_t miou_classes = 0;
    for (int64_t cl = 0; cl < k; ++cl) {
        uint64_t tp = cm.at(cl, cl), fp = 0, fn = 0;
        for (int64_t other = 0; other < k; ++other) {
            if (other == cl) continue;
            fp += cm.at(other, cl);
            fn += cm.at(cl, other);
        }
        const uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;  // never present, never predicted: excluded
        rep.iou[static_cast<size_t>(cl)] = static_cast<double>(tp) / static_cast<double>(denom);
        if (cl > 0) {
            miou_sum += rep.iou[static_cast<size_t>(cl)];
            ++miou_classes;
        }
    }
    if (miou_classes > 0) {
        rep.miou = miou_sum / static_cast<double>(miou_classes);
        rep.miou_defined = true;
    }

    // Geometry IoU on the occupied-vs-empty binarization.
    uint64_t tp = 0, fp = 0, fn = 0;
    for (int64_t gt = 0; gt < k; ++gt)
        for (int64_t pr = 0; pr < k; ++pr) {
            const uint64_t v = cm.at(gt, pr);
            if (gt > 0 && pr > 0) tp += v;
            if (gt == 0 && pr > 0) fp += v;
            if (gt > 0 && pr == 0) fn += v;
        }
    if (tp + fp + fn > 0) {
        rep.geometry_iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        rep.geometry_defined = true;
    }
    return rep;
}

}  // namespace voxseq
