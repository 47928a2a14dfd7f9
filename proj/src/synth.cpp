#include "voxseq/synth.hpp"

#include <algorithm>
#include <stdexcept>

namespace voxseq {
namespace {

constexpr uint64_t kEmbeddingKey = 0x766f7873656d6264ULL;  // "voxsembd"

}  // namespace

std::vector<double> class_embedding(int64_t num_classes, int64_t channels, bool identity) {
    std::vector<double> e(static_cast<size_t>(num_classes * channels), 0.0);
    if (identity) {
        if (channels < num_classes)
            throw std::invalid_argument("class_embedding: identity needs channels >= K");
        for (int64_t k = 0; k < num_classes; ++k) e[static_cast<size_t>(k * channels + k)] = 1.0;
        return e;
    }
    Rng rng(mix64(kEmbeddingKey ^ mix64(static_cast<uint64_t>(num_classes) * 0x10001ULL +
                                        static_cast<uint64_t>(channels))));
    for (auto& v : e) v = rng.normal();
    return e;
}

SceneSample generate_scene(uint64_t seed, const GridDims& dims, int64_t num_classes,
                           const GeneratorOptions& options) {
    dims.validate();
    if (num_classes < 4) throw std::invalid_argument("generate_scene: needs K >= 4");
    if (num_classes >= kIgnoreLabel) throw std::invalid_argument("generate_scene: K must stay below 255");

    SceneSample sample;
    sample.seed = seed;
    sample.labels = LabelGrid(dims);
    Rng rng(seed);

    const int64_t w = dims.w, h = dims.h, d = dims.d;
    auto& labels = sample.labels;

    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) labels.at(x, y, 0) = 1;

    // Obstacles live strictly above the slab; a d=1 grid stays slab-only.
    int64_t px = 0, py = 0, pz = 0;
    bool have_box = false;
    if (d >= 2) {
        const int64_t boxes = 1 + static_cast<int64_t>(rng.below(4));
        for (int64_t bi = 0; bi < boxes; ++bi) {
            // Sizes capped at half each extent so empty space always survives.
            const int64_t sx = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(std::max<int64_t>(1, w / 2))));
            const int64_t sy = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(std::max<int64_t>(1, h / 2))));
            const int64_t sz = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(std::max<int64_t>(1, (d - 1) / 2))));
            const int64_t x0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(w - sx + 1)));
            const int64_t y0 = static_cast<int64_t>(rng.below(static_cast<uint64_t>(h - sy + 1)));
            const int64_t z0 = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(d - sz)));
            for (int64_t z = z0; z < z0 + sz; ++z)
                for (int64_t y = y0; y < y0 + sy; ++y)
                    for (int64_t x = x0; x < x0 + sx; ++x) labels.at(x, y, z) = 2;
            if (bi == 0) {
                px = x0;
                py = y0;
                pz = z0;
                have_box = true;
            }
        }

        // Columns go last and may carve through boxes, except one protected
        // box voxel so every class stays represented.
        const int64_t columns = 2 + static_cast<int64_t>(rng.below(3));
        int64_t column_voxels = 0;
        for (int64_t ci = 0; ci < columns; ++ci) {
            const int64_t cx = static_cast<int64_t>(rng.below(static_cast<uint64_t>(w)));
            const int64_t cy = static_cast<int64_t>(rng.below(static_cast<uint64_t>(h)));
            const int64_t height = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(d - 1)));
            for (int64_t z = 1; z <= height; ++z) {
                if (have_box && cx == px && cy == py && z == pz) continue;
                labels.at(cx, cy, z) = 3;
                ++column_voxels;
            }
        }
        if (column_voxels == 0 && w >= 2) labels.at((px + 1) % w, py, 1) = 3;
    }

    GridDims feat_dims = dims;
    if (feat_dims.c < 1) throw std::invalid_argument("generate_scene: feature channels must be >= 1");
    sample.features = FeatureGrid(feat_dims);
    const std::vector<double> embed =
        class_embedding(num_classes, feat_dims.c, options.identity_embedding);

    const int64_t n = dims.voxels();
    for (int64_t l = 0; l < n; ++l) {
        const uint16_t y = labels.data[static_cast<size_t>(l)];
        const double* row = embed.data() + static_cast<int64_t>(y) * feat_dims.c;
        double* dst = sample.features.data.data() + l * feat_dims.c;
        for (int64_t ch = 0; ch < feat_dims.c; ++ch)
            dst[ch] = row[ch] + (options.noise_sigma > 0.0 ? options.noise_sigma * rng.normal() : 0.0);
    }
    return sample;
}

}  // namespace voxseq
