#include "voxseq/training.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "voxseq/io.hpp"
#include "voxseq/occ_head.hpp"

namespace voxseq {
namespace {

using nlohmann::json;

FeatureGrid slice_channels(const FeatureGrid& grid, int64_t from, int64_t to) {
    GridDims dims = grid.dims;
    dims.c = to - from;
    FeatureGrid out(dims);
    const int64_t n = dims.voxels();
    for (int64_t l = 0; l < n; ++l)
        for (int64_t ch = from; ch < to; ++ch)
            out.data[static_cast<size_t>(l * dims.c + (ch - from))] =
                grid.data[static_cast<size_t>(l * grid.dims.c + ch)];
    return out;
}

LabelGrid argmax_labels(const OccupancyPrediction& pred) {
    LabelGrid out(pred.dims);
    const int64_t n = pred.dims.voxels();
    const int64_t k = pred.num_classes();
    for (int64_t l = 0; l < n; ++l) {
        const double* row = pred.logits.data() + l * k;
        int64_t best = 0;
        for (int64_t j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        out.data[static_cast<size_t>(l)] = static_cast<uint16_t>(best);
    }
    return out;
}

struct StepGrads {
    HierarchyParams hierarchy;
    MlpParams head;
};

void sgd_step(Model& model, StepGrads& grads, double lr) {
    auto update = [lr](std::vector<double>& p, const std::vector<double>& g) {
        for (size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    };
    std::vector<std::vector<double>*> params, gradients;
    for_each_tensor(model.hierarchy, [&](std::vector<double>& t) { params.push_back(&t); });
    for_each_tensor(grads.hierarchy, [&](std::vector<double>& t) { gradients.push_back(&t); });
    for_each_tensor(model.head, [&](std::vector<double>& t) { params.push_back(&t); });
    for_each_tensor(grads.head, [&](std::vector<double>& t) { gradients.push_back(&t); });
    for (size_t i = 0; i < params.size(); ++i) update(*params[i], *gradients[i]);
}

}  // namespace

void TrainConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
    if (!(learning_rate > 0.0) && learning_rate != 0.0)
        throw std::invalid_argument("train config: learning rate must be >= 0");
    if (num_classes < 4) throw std::invalid_argument("train config: K >= 4");
    dims.validate();
    if (dims.c < 2) throw std::invalid_argument("train config: needs at least 2 feature channels");
}

Model init_model(const TrainConfig& config) {
    config.validate();
    Model m;
    HierarchyConfig hcfg = config.hierarchy;
    hcfg.base_channels = config.dims.c;
    Rng rng(mix64(config.seed ^ 0x6d6f64656cULL));  // "model"
    m.hierarchy = init_hierarchy(hcfg, rng);
    m.head = init_mlp(config.dims.c, config.dims.c, config.num_classes, rng);
    m.num_classes = config.num_classes;
    m.dims = config.dims;
    m.noise_sigma = config.noise_sigma;
    return m;
}

OccupancyPrediction model_forward(const Model& model, const FeatureGrid& features,
                                  OrderingCache& cache) {
    const int64_t c = features.dims.c;
    const FeatureGrid v_lidar = slice_channels(features, 0, c / 2);
    const FeatureGrid v_camera = slice_channels(features, c / 2, c);
    const FeatureGrid fused = fuse_concat(v_lidar, v_camera);
    EncoderOut enc = encoder_forward(model.hierarchy, fused, cache);
    FeatureGrid out = decoder_forward(model.hierarchy, enc.latent, enc.state, cache);
    GridDims target = features.dims;
    const FeatureGrid fine = coarse_to_fine(out, target);
    return classify(fine, model.head, model.num_classes);
}

TrainResult train_toy(const TrainConfig& config) {
    config.validate();
    TrainResult result;
    result.model = init_model(config);
    Model& model = result.model;
    OrderingCache cache;
    const GeneratorOptions gen_opts{config.noise_sigma, false};

    auto run_eval = [&]() {
        std::vector<uint64_t> seeds;
        for (int64_t i = 0; i < config.eval_scenes; ++i) seeds.push_back(config.eval_seed(i));
        return evaluate(model, seeds);
    };

    for (int64_t step = 0; step < config.steps; ++step) {
        double loss_sum = 0.0, ce_sum = 0.0, lovasz_sum = 0.0;
        StepGrads grads{zeros_like_hierarchy(model.hierarchy), zeros_like(model.head)};

        for (int64_t bi = 0; bi < config.batch; ++bi) {
            const SceneSample scene = generate_scene(
                config.train_seed(step * config.batch + bi), config.dims, config.num_classes, gen_opts);
            try {

            // Eq. 2: the two modality halves are fused back by concatenation.
            const int64_t c = scene.features.dims.c;
            const FeatureGrid v_lidar = slice_channels(scene.features, 0, c / 2);
            const FeatureGrid v_camera = slice_channels(scene.features, c / 2, c);
            const FeatureGrid fused = fuse_concat(v_lidar, v_camera);

            EncoderCtx enc_ctx;
            DecoderCtx dec_ctx;
            EncoderOut enc = encoder_forward(model.hierarchy, fused, cache, &enc_ctx);
            FeatureGrid decoded =
                decoder_forward(model.hierarchy, enc.latent, enc.state, cache, &dec_ctx);

            const GridDims target{scene.labels.dims.w, scene.labels.dims.h, scene.labels.dims.d,
                                  decoded.dims.c};
            const FeatureGrid fine = coarse_to_fine(decoded, target);
            MlpCtx head_ctx;
            const OccupancyPrediction pred = classify(fine, model.head, model.num_classes, &head_ctx);

            const LossAndGrad ce = cross_entropy(pred, scene.labels);
            const std::vector<double> probs = softmax_rows(pred.logits, model.num_classes);
            const LossAndGrad lov =
                lovasz_softmax(probs, pred.dims, scene.labels, model.num_classes);
            const double loss = total_loss({ce.loss, lov.loss, {}, {}, {}}, config.weights);

            loss_sum += loss;
            ce_sum += ce.loss;
            lovasz_sum += lov.loss;

            if (!std::isfinite(loss)) {
                result.diverged = true;
                result.diverged_step = step;
                result.final_loss = loss;
                return result;
            }

            // Backward through Eq. 6 -> 4 -> 3.
            std::vector<double> dprobs(lov.grad.size());
            for (size_t i = 0; i < dprobs.size(); ++i)
                dprobs[i] = config.weights.lambda1 * lov.grad[i];
            std::vector<double> dlogits = softmax_rows_backward(probs, dprobs, model.num_classes);
            for (size_t i = 0; i < dlogits.size(); ++i) dlogits[i] += ce.grad[i];

            const FeatureGrid dfine = classify_backward(fine, model.head, head_ctx, dlogits, grads.head);
            const FeatureGrid ddecoded = coarse_to_fine_backward(decoded.dims, dfine);
            DecoderGrads dg = decoder_backward(model.hierarchy, dec_ctx, ddecoded, grads.hierarchy);
            encoder_backward(model.hierarchy, enc_ctx, dg.dlatent, dg.dskips, grads.hierarchy);
            } catch (const std::domain_error&) {
                // Overflow inside a kernel: same abort contract as a NaN loss.
                result.diverged = true;
                result.diverged_step = step;
                result.final_loss = std::numeric_limits<double>::quiet_NaN();
                return result;
            }
        }

        const double loss = loss_sum / static_cast<double>(config.batch);
        if (step == 0) result.initial_loss = loss;
        result.final_loss = loss;

        if (config.learning_rate > 0.0) sgd_step(model, grads, config.learning_rate / static_cast<double>(config.batch));

        json line = {{"step", step},
                     {"loss", loss},
                     {"ce", ce_sum / static_cast<double>(config.batch)},
                     {"lovasz", lovasz_sum / static_cast<double>(config.batch)}};
        const bool eval_now =
            config.eval_scenes > 0 &&
            (step + 1 == config.steps || (config.eval_every > 0 && (step + 1) % config.eval_every == 0));
        if (eval_now) {
            const MetricsReport rep = run_eval();
            if (rep.miou_defined) line["miou"] = rep.miou;
            if (step + 1 == config.steps) result.final_eval = rep;
        }
        result.log_lines.push_back(line.dump());
    }
    return result;
}

MetricsReport evaluate(const Model& model, const std::vector<uint64_t>& scene_seeds) {
    ConfusionMatrix cm(model.num_classes);
    if (scene_seeds.empty()) return iou_from_confusion(cm);  // undefined-metrics flag
    OrderingCache cache;
    const GeneratorOptions gen_opts{model.noise_sigma, false};
    for (uint64_t seed : scene_seeds) {
        const SceneSample scene = generate_scene(seed, model.dims, model.num_classes, gen_opts);
        const OccupancyPrediction pred = model_forward(model, scene.features, cache);
        confusion_accumulate(cm, argmax_labels(pred), scene.labels);
    }
    return iou_from_confusion(cm);
}

void save_model(const std::string& path, const Model& model) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    detail::ByteWriter w(f);
    w.bytes("VPRM", 4);
    w.u8(1);
    const HierarchyConfig& h = model.hierarchy.config;
    w.u32(static_cast<uint32_t>(model.num_classes));
    w.u32(static_cast<uint32_t>(model.dims.w));
    w.u32(static_cast<uint32_t>(model.dims.h));
    w.u32(static_cast<uint32_t>(model.dims.d));
    w.u32(static_cast<uint32_t>(model.dims.c));
    w.u32(static_cast<uint32_t>(h.groups));
    w.u32(static_cast<uint32_t>(h.blocks_per_group));
    w.u8(static_cast<uint8_t>(h.scheme.kind));
    w.u8(h.scheme.z_snake ? 1 : 0);
    w.u32(static_cast<uint32_t>(h.state_dim));
    w.u32(static_cast<uint32_t>(h.conv_kernel));
    w.f64(model.noise_sigma);
    size_t count = 0;
    auto save_tensor = [&](std::vector<double>& t) {
        w.u64(t.size());
        for (double v : t) w.f64(v);
        ++count;
    };
    for_each_tensor(const_cast<HierarchyParams&>(model.hierarchy), save_tensor);
    for_each_tensor(const_cast<MlpParams&>(model.head), save_tensor);
    w.u64(count);
    if (!f) throw std::runtime_error("write failed: " + path);
}

Model load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path, 0, "cannot open file");
    detail::ByteReader r(f, path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "VPRM") throw FormatError(path, 0, "bad magic, expected VPRM");
    if (r.u8() != 1) throw FormatError(path, 4, "unsupported version");

    TrainConfig cfg;
    cfg.num_classes = r.u32();
    cfg.dims.w = r.u32();
    cfg.dims.h = r.u32();
    cfg.dims.d = r.u32();
    cfg.dims.c = r.u32();
    cfg.hierarchy.groups = r.u32();
    cfg.hierarchy.blocks_per_group = r.u32();
    cfg.hierarchy.scheme.kind = static_cast<SchemeKind>(r.u8());
    cfg.hierarchy.scheme.z_snake = r.u8() != 0;
    cfg.hierarchy.state_dim = r.u32();
    cfg.hierarchy.conv_kernel = r.u32();
    cfg.noise_sigma = r.f64();
    cfg.hierarchy.base_channels = cfg.dims.c;

    Model model = init_model(cfg);
    model.noise_sigma = cfg.noise_sigma;
    size_t count = 0;
    auto load_tensor = [&](std::vector<double>& t) {
        const uint64_t len = r.u64();
        if (len != t.size())
            throw FormatError(path, r.offset(), "tensor length mismatch against config");
        for (auto& v : t) v = r.f64();
        ++count;
    };
    for_each_tensor(model.hierarchy, load_tensor);
    for_each_tensor(model.head, load_tensor);
    if (r.u64() != count) throw FormatError(path, r.offset(), "tensor count mismatch");
    return model;
}

}  // namespace voxseq
