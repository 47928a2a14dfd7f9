#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "voxseq/occ_head.hpp"
#include "voxseq/ref.hpp"

using namespace voxseq;

namespace {

FeatureGrid random_grid(GridDims dims, uint64_t seed) {
    FeatureGrid g(dims);
    Rng rng(seed);
    for (auto& v : g.data) v = rng.uniform(-1.0, 1.0);
    return g;
}

}  // namespace

TEST_CASE("fuse_concat: channel concatenation, lidar first") {
    FeatureGrid a({1, 1, 1, 2});
    a.data = {1.0, 2.0};
    FeatureGrid b({1, 1, 1, 3});
    b.data = {3.0, 4.0, 5.0};
    const FeatureGrid out = fuse_concat(a, b);
    CHECK(out.dims.c == 5);
    CHECK(out.data == std::vector<double>{1, 2, 3, 4, 5});

    FeatureGrid empty({1, 1, 1, 0});
    CHECK(fuse_concat(empty, b).data == b.data);
    CHECK(fuse_concat(a, empty).data == a.data);

    FeatureGrid wrong({2, 1, 1, 1});
    CHECK_THROWS_AS(fuse_concat(a, wrong), std::invalid_argument);
}

TEST_CASE("fuse_concat preserves every value on random volumes") {
    const FeatureGrid a = random_grid({4, 3, 2, 3}, 0xf1);
    const FeatureGrid b = random_grid({4, 3, 2, 2}, 0xf2);
    const FeatureGrid out = fuse_concat(a, b);
    for (int64_t l = 0; l < a.dims.voxels(); ++l) {
        for (int64_t ch = 0; ch < 3; ++ch)
            CHECK(out.data[static_cast<size_t>(l * 5 + ch)] ==
                  a.data[static_cast<size_t>(l * 3 + ch)]);
        for (int64_t ch = 0; ch < 2; ++ch)
            CHECK(out.data[static_cast<size_t>(l * 5 + 3 + ch)] ==
                  b.data[static_cast<size_t>(l * 2 + ch)]);
    }
}

TEST_CASE("coarse_to_fine: identity, constants, pinned 1D ramp") {
    const FeatureGrid g = random_grid({3, 4, 2, 2}, 0xc2f);
    const FeatureGrid same = coarse_to_fine(g, g.dims);
    CHECK(same.data == g.data);

    FeatureGrid constant({2, 2, 2, 1});
    std::fill(constant.data.begin(), constant.data.end(), 7.5);
    const FeatureGrid big = coarse_to_fine(constant, {5, 7, 3, 0});
    for (double v : big.data) CHECK(v == doctest::Approx(7.5).epsilon(1e-14));

    FeatureGrid line({2, 1, 1, 1});
    line.data = {0.0, 2.0};
    const FeatureGrid up = coarse_to_fine(line, {4, 1, 1, 0});
    REQUIRE(up.data.size() == 4);
    CHECK(up.data[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(up.data[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(up.data[2] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(up.data[3] == doctest::Approx(2.0).epsilon(1e-14));

    CHECK_THROWS_AS(coarse_to_fine(g, {2, 4, 2, 0}), std::invalid_argument);
}

TEST_CASE("coarse_to_fine preserves per-channel bounds and matches the reference") {
    const FeatureGrid g = random_grid({4, 4, 3, 3}, 0xb0);
    const GridDims target{9, 8, 5, 0};
    const FeatureGrid out = coarse_to_fine(g, target);
    for (int64_t ch = 0; ch < 3; ++ch) {
        double lo = 1e300, hi = -1e300;
        for (int64_t l = 0; l < g.dims.voxels(); ++l) {
            lo = std::min(lo, g.data[static_cast<size_t>(l * 3 + ch)]);
            hi = std::max(hi, g.data[static_cast<size_t>(l * 3 + ch)]);
        }
        for (int64_t l = 0; l < out.dims.voxels(); ++l) {
            CHECK(out.data[static_cast<size_t>(l * 3 + ch)] >= lo - 1e-12);
            CHECK(out.data[static_cast<size_t>(l * 3 + ch)] <= hi + 1e-12);
        }
    }
    const FeatureGrid slow = ref::coarse_to_fine(g, target);
    for (size_t i = 0; i < out.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(slow.data[i]).epsilon(1e-13));
}

TEST_CASE("coarse_to_fine gradient matches central differences") {
    Rng rng(0xc2f6);
    const GridDims src{3, 2, 2, 2};
    const GridDims dst{5, 3, 2, 0};
    FeatureGrid g = random_grid(src, 0x91);
    const FeatureGrid out = coarse_to_fine(g, dst);
    std::vector<double> upstream(out.data.size());
    for (auto& v : upstream) v = rng.uniform(-1, 1);

    auto eval = [&](const std::vector<double>& th) {
        FeatureGrid gg = g;
        gg.data = th;
        const FeatureGrid o = coarse_to_fine(gg, dst);
        double acc = 0;
        for (size_t i = 0; i < o.data.size(); ++i) acc += o.data[i] * upstream[i];
        return acc;
    };
    FeatureGrid up(out.dims);
    up.data = upstream;
    const FeatureGrid din = coarse_to_fine_backward(src, up);
    CHECK(voxseq::testsupport::grad_check(eval, g.data, din.data).max_rel_err < 1e-5);
}

TEST_CASE("classify: zero weights, channel-copying config, shape contract") {
    SUBCASE("zero weights and bias produce uniform logits") {
        MlpParams mlp;
        mlp.in_dim = 3;
        mlp.hidden_dim = 3;
        mlp.out_dim = 4;
        mlp.w1.assign(9, 0.0);
        mlp.b1.assign(3, 0.0);
        mlp.w2.assign(12, 0.0);
        mlp.b2.assign(4, 0.0);
        const FeatureGrid g = random_grid({2, 2, 1, 3}, 0x92);
        const OccupancyPrediction pred = classify(g, mlp, 4);
        for (double v : pred.logits) CHECK(v == 0.0);
    }
    SUBCASE("identity first layer and one-hot second layer copy channels") {
        // Nonnegative input keeps SiLU invertible by scaling: silu(x) for the
        // chosen constants is computed explicitly below.
        MlpParams mlp;
        mlp.in_dim = 2;
        mlp.hidden_dim = 2;
        mlp.out_dim = 2;
        mlp.w1 = {1, 0, 0, 1};
        mlp.b1 = {0, 0};
        mlp.w2 = {1, 0, 0, 1};
        mlp.b2 = {0, 0};
        FeatureGrid g({1, 1, 1, 2});
        g.data = {2.0, 0.5};
        const OccupancyPrediction pred = classify(g, mlp, 2);
        CHECK(pred.logits[0] == doctest::Approx(silu(2.0)).epsilon(1e-15));
        CHECK(pred.logits[1] == doctest::Approx(silu(0.5)).epsilon(1e-15));
    }
    SUBCASE("shape: (8,8,4,16) with K=5 gives (8,8,4,5) logits") {
        Rng rng(0x93);
        const MlpParams mlp = init_mlp(16, 16, 5, rng);
        const FeatureGrid g = random_grid({8, 8, 4, 16}, 0x94);
        const OccupancyPrediction pred = classify(g, mlp, 5);
        CHECK(pred.dims.w == 8);
        CHECK(pred.dims.c == 5);
        CHECK(pred.logits.size() == static_cast<size_t>(8 * 8 * 4 * 5));
    }
    SUBCASE("width mismatch is rejected") {
        Rng rng(0x95);
        const MlpParams mlp = init_mlp(16, 16, 5, rng);
        const FeatureGrid g = random_grid({2, 2, 2, 8}, 0x96);
        CHECK_THROWS_AS(classify(g, mlp, 5), std::invalid_argument);
    }
}

TEST_CASE("classify gradient matches central differences") {
    Rng rng(0x97);
    MlpParams mlp = init_mlp(3, 4, 2, rng);
    const FeatureGrid g = random_grid({2, 2, 1, 3}, 0x98);
    std::vector<double> upstream(static_cast<size_t>(g.dims.voxels() * 2));
    for (auto& v : upstream) v = rng.uniform(-1, 1);

    std::vector<double> theta;
    for_each_tensor(mlp, [&](std::vector<double>& t) { theta.insert(theta.end(), t.begin(), t.end()); });
    const size_t param_len = theta.size();
    theta.insert(theta.end(), g.data.begin(), g.data.end());

    auto eval = [&](const std::vector<double>& th) {
        MlpParams mm = mlp;
        size_t i = 0;
        for_each_tensor(mm, [&](std::vector<double>& t) {
            std::copy(th.begin() + static_cast<int64_t>(i), th.begin() + static_cast<int64_t>(i + t.size()), t.begin());
            i += t.size();
        });
        FeatureGrid gg = g;
        std::copy(th.begin() + static_cast<int64_t>(param_len), th.end(), gg.data.begin());
        const OccupancyPrediction pred = classify(gg, mm, 2);
        double acc = 0;
        for (size_t j = 0; j < pred.logits.size(); ++j) acc += pred.logits[j] * upstream[j];
        return acc;
    };

    MlpCtx ctx;
    (void)classify(g, mlp, 2, &ctx);
    MlpParams grads = zeros_like(mlp);
    const FeatureGrid din = classify_backward(g, mlp, ctx, upstream, grads);
    std::vector<double> grad;
    for_each_tensor(grads, [&](std::vector<double>& t) { grad.insert(grad.end(), t.begin(), t.end()); });
    grad.insert(grad.end(), din.data.begin(), din.data.end());
    CHECK(voxseq::testsupport::grad_check(eval, theta, grad).max_rel_err < 1e-5);
}

TEST_CASE("full head pipeline yields finite logits at ground-truth resolution") {
    Rng rng(0x99);
    const FeatureGrid lidar = random_grid({16, 16, 8, 5}, 0x9a);
    const FeatureGrid camera = random_grid({16, 16, 8, 3}, 0x9b);
    const FeatureGrid fused = fuse_concat(lidar, camera);
    const FeatureGrid fine = coarse_to_fine(fused, {32, 32, 16, 0});
    const MlpParams mlp = init_mlp(8, 8, 4, rng);
    const OccupancyPrediction pred = classify(fine, mlp, 4);
    CHECK(pred.dims.w == 32);
    CHECK(pred.dims.h == 32);
    CHECK(pred.dims.d == 16);
    for (double v : pred.logits) REQUIRE(std::isfinite(v));
}
