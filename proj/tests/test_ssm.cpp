#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "voxseq/ref.hpp"
#include "voxseq/ssm.hpp"

using namespace voxseq;

namespace {

SsmParams scalar_params(double a_log, double w_b, double w_c, double w_delta, double bias) {
    SsmParams p;
    p.channels = 1;
    p.state_dim = 1;
    p.selective = true;
    p.a_log = {a_log};
    p.w_b = {w_b};
    p.w_c = {w_c};
    p.w_delta = {w_delta};
    p.bias_delta = {bias};
    p.b_fixed = {0.0};
    p.c_fixed = {0.0};
    p.delta_fixed = {0.0};
    return p;
}

}  // namespace

TEST_CASE("discretize: closed forms and the small-step limit") {
    SsmParams p = scalar_params(0.0, 0, 0, 0, 0);  // A = -exp(0) = -1
    p.b_fixed = {1.0};

    SUBCASE("A=-1, delta=ln 2 gives abar exactly 0.5") {
        const Discretized d = discretize(p, {std::log(2.0)});
        CHECK(d.a_bar[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("A=-1, B=1, delta=0.1 gives (e^-0.1, 0.1)") {
        const Discretized d = discretize(p, {0.1});
        CHECK(d.a_bar[0] == doctest::Approx(std::exp(-0.1)).epsilon(1e-15));
        CHECK(d.b_bar[0] == doctest::Approx(0.1).epsilon(1e-15));
    }
    SUBCASE("delta -> 0+ drives abar -> 1 and bbar -> 0") {
        const Discretized d = discretize(p, {1e-12});
        CHECK(d.a_bar[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(d.b_bar[0] == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("nonpositive step is rejected") {
        CHECK_THROWS_AS(discretize(p, {0.0}), std::invalid_argument);
        CHECK_THROWS_AS(discretize(p, {-0.5}), std::invalid_argument);
    }
}

TEST_CASE("ssm_scan: hand recurrences") {
    SUBCASE("abar=0 collapses to a memoryless map") {
        SequenceTensor x(1, 5, 1);
        Rng rng(0x5ca);
        for (auto& v : x.data) v = rng.uniform(-2, 2);
        const SequenceTensor y = ssm_scan({0.0}, {0.7}, {1.3}, x);
        for (int64_t k = 0; k < 5; ++k)
            CHECK(y.data[static_cast<size_t>(k)] ==
                  doctest::Approx(1.3 * 0.7 * x.data[static_cast<size_t>(k)]).epsilon(1e-15));
    }
    SUBCASE("abar=0.5, bbar=cbar=1, x=[1,0,1] -> y=[1, 0.5, 1.25]") {
        SequenceTensor x(1, 3, 1);
        x.data = {1, 0, 1};
        const SequenceTensor y = ssm_scan({0.5}, {1.0}, {1.0}, x);
        CHECK(y.data[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(y.data[1] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(y.data[2] == doctest::Approx(1.25).epsilon(1e-12));
    }
    SUBCASE("abar=1 turns the scan into a running sum") {
        SequenceTensor x(1, 4, 1);
        x.data = {1, 1, 1, 1};
        const SequenceTensor y = ssm_scan({1.0}, {1.0}, {1.0}, x);
        CHECK(y.data == std::vector<double>{1, 2, 3, 4});
    }
}

TEST_CASE("ssm_scan: linearity at 64-bit") {
    Rng rng(0x11e4);
    const int64_t n = 32, c = 3, s = 4;
    std::vector<double> abar(c * s), bbar(c * s), cbar(c * s);
    for (auto& v : abar) v = rng.uniform(0.0, 0.99);
    for (auto& v : bbar) v = rng.uniform(-1, 1);
    for (auto& v : cbar) v = rng.uniform(-1, 1);
    SequenceTensor x1(2, n, c), x2(2, n, c);
    for (auto& v : x1.data) v = rng.uniform(-1, 1);
    for (auto& v : x2.data) v = rng.uniform(-1, 1);
    const double alpha = 1.7, beta = -0.3;
    SequenceTensor mix(2, n, c);
    for (size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = alpha * x1.data[i] + beta * x2.data[i];
    const SequenceTensor y1 = ssm_scan(abar, bbar, cbar, x1);
    const SequenceTensor y2 = ssm_scan(abar, bbar, cbar, x2);
    const SequenceTensor ym = ssm_scan(abar, bbar, cbar, mix);
    for (size_t i = 0; i < ym.data.size(); ++i)
        CHECK(std::abs(ym.data[i] - (alpha * y1.data[i] + beta * y2.data[i])) < 1e-12);
}

TEST_CASE("ssm_scan: causality is exact") {
    Rng rng(0xca05e);
    const int64_t n = 24, c = 2, s = 3;
    std::vector<double> abar(c * s), bbar(c * s), cbar(c * s);
    for (auto& v : abar) v = rng.uniform(0.0, 0.95);
    for (auto& v : bbar) v = rng.uniform(-1, 1);
    for (auto& v : cbar) v = rng.uniform(-1, 1);
    SequenceTensor x(1, n, c);
    for (auto& v : x.data) v = rng.uniform(-1, 1);
    const SequenceTensor y = ssm_scan(abar, bbar, cbar, x);
    const int64_t kp = 13;
    SequenceTensor xp = x;
    xp.data[static_cast<size_t>(kp * c + 1)] += 5.0;
    const SequenceTensor yp = ssm_scan(abar, bbar, cbar, xp);
    for (int64_t k = 0; k < kp; ++k)
        for (int64_t ch = 0; ch < c; ++ch)
            CHECK(y.data[static_cast<size_t>(k * c + ch)] ==
                  yp.data[static_cast<size_t>(k * c + ch)]);
}

TEST_CASE("ssm_scan: bounded state under contractive abar") {
    Rng rng(0x57ab);
    const int64_t n = 512;
    const double abar = 0.9, bbar = 0.8;
    SequenceTensor x(1, n, 1);
    double max_x = 0;
    for (auto& v : x.data) {
        v = rng.uniform(-3, 3);
        max_x = std::max(max_x, std::abs(v));
    }
    ScanCtx ctx;
    (void)ssm_scan({abar}, {bbar}, {1.0}, x, &ctx);
    const double bound = std::abs(bbar) * max_x / (1.0 - abar);
    for (double h : ctx.h) CHECK(std::abs(h) <= bound + 1e-12);
}

TEST_CASE("selective ssm: zero readout projections give zero output") {
    SsmParams p = scalar_params(0.2, 0.0, 0.0, 0.3, -1.0);
    SequenceTensor u(1, 6, 1);
    Rng rng(0x3e0);
    for (auto& v : u.data) v = rng.uniform(-1, 1);
    const SequenceTensor y = selective_ssm_forward(p, u);
    for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("selective ssm on constant input reduces to the fixed-parameter scan") {
    // s=1, constant u: B, C, delta are the same at every step, so the result
    // must match ssm_scan with those induced constants.
    const double uval = 0.8;
    SsmParams p = scalar_params(0.1, 0.9, 1.1, 0.4, -0.7);
    SequenceTensor u(1, 10, 1);
    std::fill(u.data.begin(), u.data.end(), uval);
    const SequenceTensor y = selective_ssm_forward(p, u);

    const double delta = softplus(uval * 0.4 + -0.7);
    const double a = -std::exp(0.1);
    const double abar = std::exp(delta * a);
    const double bbar = delta * (uval * 0.9);
    const double cbar = uval * 1.1;
    const SequenceTensor expected = ssm_scan({abar}, {bbar}, {cbar}, u);
    for (size_t i = 0; i < y.data.size(); ++i)
        CHECK(y.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-14));
}

TEST_CASE("selective ssm single token: y = sum_j C_j * delta * B_j * u") {
    Rng rng(0x1707);
    const int64_t c = 3, s = 4;
    SsmParams p = init_ssm_params(c, s, rng);
    SequenceTensor u(1, 1, c);
    for (auto& v : u.data) v = rng.uniform(-1, 1);

    const SequenceTensor y = selective_ssm_forward(p, u);
    double praw = p.bias_delta[0];
    for (int64_t ch = 0; ch < c; ++ch) praw += u.data[static_cast<size_t>(ch)] * p.w_delta[static_cast<size_t>(ch)];
    const double delta = softplus(praw);
    for (int64_t ch = 0; ch < c; ++ch) {
        double expect = 0.0;
        for (int64_t j = 0; j < s; ++j) {
            double bj = 0, cj = 0;
            for (int64_t i = 0; i < c; ++i) {
                bj += u.data[static_cast<size_t>(i)] * p.w_b[static_cast<size_t>(i * s + j)];
                cj += u.data[static_cast<size_t>(i)] * p.w_c[static_cast<size_t>(i * s + j)];
            }
            expect += cj * delta * bj * u.data[static_cast<size_t>(ch)];
        }
        CHECK(y.data[static_cast<size_t>(ch)] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("selective ssm rejects non-finite input") {
    SsmParams p = scalar_params(0.0, 1, 1, 0, 0);
    SequenceTensor u(1, 3, 1);
    u.data = {1.0, std::numeric_limits<double>::quiet_NaN(), 0.0};
    CHECK_THROWS_AS(selective_ssm_forward(p, u), std::domain_error);
    u.data = {1.0, std::numeric_limits<double>::infinity(), 0.0};
    CHECK_THROWS_AS(selective_ssm_forward(p, u), std::domain_error);
}

TEST_CASE("parallel kernels match the serial references") {
    Rng rng(0x9a9a);
    const int64_t b = 2, n = 40, c = 6, s = 5;
    SsmParams p = init_ssm_params(c, s, rng);
    SequenceTensor u(b, n, c);
    for (auto& v : u.data) v = rng.uniform(-1, 1);
    const SequenceTensor fast = selective_ssm_forward(p, u);
    const SequenceTensor slow = ref::selective_ssm_forward(p, u);
    for (size_t i = 0; i < fast.data.size(); ++i)
        CHECK(fast.data[i] == doctest::Approx(slow.data[i]).epsilon(1e-14));

    std::vector<double> abar(c * s), bbar(c * s), cbar(c * s);
    for (auto& v : abar) v = rng.uniform(0, 0.99);
    for (auto& v : bbar) v = rng.uniform(-1, 1);
    for (auto& v : cbar) v = rng.uniform(-1, 1);
    const SequenceTensor y1 = ssm_scan(abar, bbar, cbar, u);
    const SequenceTensor y2 = ref::ssm_scan(abar, bbar, cbar, u);
    CHECK(y1.data == y2.data);
}

TEST_CASE("float fast mode stays close to the 64-bit path") {
    Rng rng(0xf107);
    const int64_t n = 64, c = 8, s = 4;
    SsmParams p = init_ssm_params(c, s, rng);
    SequenceTensor u(1, n, c);
    for (auto& v : u.data) v = rng.uniform(-1, 1);
    const SequenceTensor y64 = selective_ssm_forward(p, u);

    const auto pf = p.cast<float>();
    SequenceTensorF uf(1, n, c);
    for (size_t i = 0; i < u.data.size(); ++i) uf.data[i] = static_cast<float>(u.data[i]);
    const SequenceTensorF y32 = selective_ssm_forward(pf, uf);
    for (size_t i = 0; i < y64.data.size(); ++i)
        CHECK(static_cast<double>(y32.data[i]) == doctest::Approx(y64.data[i]).epsilon(1e-4));
}
