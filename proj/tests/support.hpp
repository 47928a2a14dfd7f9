#ifndef VOXSEQ_TESTS_SUPPORT_HPP
#define VOXSEQ_TESTS_SUPPORT_HPP

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "voxseq/rng.hpp"

namespace voxseq::testsupport {

// Independent 2D Hilbert generator: classic rotate-and-reflect recursion on
// cell frames. Emits the full coordinate sequence for a 2^order square with
// origin (0,0) and first step along +y.
inline void hilbert2d_recursive(double x0, double y0, double xi, double xj, double yi, double yj,
                                int depth, std::vector<std::pair<uint64_t, uint64_t>>& out) {
    if (depth <= 0) {
        out.emplace_back(static_cast<uint64_t>(x0 + (xi + yi) / 2),
                         static_cast<uint64_t>(y0 + (xj + yj) / 2));
        return;
    }
    hilbert2d_recursive(x0, y0, yi / 2, yj / 2, xi / 2, xj / 2, depth - 1, out);
    hilbert2d_recursive(x0 + xi / 2, y0 + xj / 2, xi / 2, xj / 2, yi / 2, yj / 2, depth - 1, out);
    hilbert2d_recursive(x0 + xi / 2 + yi / 2, y0 + xj / 2 + yj / 2, xi / 2, xj / 2, yi / 2, yj / 2,
                        depth - 1, out);
    hilbert2d_recursive(x0 + xi / 2 + yi, y0 + xj / 2 + yj, -yi / 2, -yj / 2, -xi / 2, -xj / 2,
                        depth - 1, out);
}

inline std::vector<std::pair<uint64_t, uint64_t>> hilbert2d_sequence(int order) {
    const double side = static_cast<double>(uint64_t{1} << order);
    std::vector<std::pair<uint64_t, uint64_t>> out;
    // x-frame along +y first so the order-1 walk is (0,0),(0,1),(1,1),(1,0).
    hilbert2d_recursive(0, 0, 0, side, side, 0, order, out);
    return out;
}

// Central-difference gradient check harness. `eval` maps a flat parameter
// vector to a scalar; `grad` is the analytic gradient at `theta`.
struct GradCheckResult {
    double max_rel_err = 0.0;
    size_t worst_index = 0;
};

inline GradCheckResult grad_check(const std::function<double(const std::vector<double>&)>& eval,
                                  const std::vector<double>& theta,
                                  const std::vector<double>& grad, double step = 1e-5) {
    GradCheckResult res;
    std::vector<double> probe = theta;
    for (size_t i = 0; i < theta.size(); ++i) {
        probe[i] = theta[i] + step;
        const double up = eval(probe);
        probe[i] = theta[i] - step;
        const double down = eval(probe);
        probe[i] = theta[i];
        const double fd = (up - down) / (2.0 * step);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
        const double rel = std::abs(fd - grad[i]) / scale;
        if (rel > res.max_rel_err) {
            res.max_rel_err = rel;
            res.worst_index = i;
        }
    }
    return res;
}

}  // namespace voxseq::testsupport

#endif
