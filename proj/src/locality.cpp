#include "voxseq/locality.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace voxseq {
namespace {

uint64_t nearest_rank(std::vector<uint64_t>& dist, double q) {
    // Nearest-rank percentile: the ceil(q*P)-th smallest, 1-indexed.
    const size_t rank = static_cast<size_t>(std::max<int64_t>(
        1, static_cast<int64_t>(std::ceil(q * static_cast<double>(dist.size())))));
    std::nth_element(dist.begin(), dist.begin() + static_cast<int64_t>(rank - 1), dist.end());
    return dist[rank - 1];
}

}  // namespace

LocalityReport neighbor_distance_stats(const Ordering& ordering) {
    const GridDims& g = ordering.dims;
    const int64_t w = g.w, h = g.h, d = g.d;
    const uint64_t pair_count = static_cast<uint64_t>(3 * w * h * d - w * h - h * d - w * d);

    LocalityReport rep;
    rep.scheme = scheme_label(ordering.scheme);
    rep.dims = g;
    rep.pair_count = pair_count;
    if (pair_count == 0) return rep;  // statistics defined as 0 on pairless grids

    const auto& pos = ordering.linear_to_seq;
    std::vector<uint64_t> dist(pair_count);
    // Pair slots: x-steps first, then y-steps, then z-steps, each in linear
    // voxel order, so every pair has a fixed slot and threads never collide.
    const uint64_t x_pairs = static_cast<uint64_t>((w - 1) * h * d);
    const uint64_t y_pairs = static_cast<uint64_t>(w * (h - 1) * d);

    const int64_t n = g.voxels();
    uint64_t total = 0;
    uint64_t max_dist = 0;
#pragma omp parallel for schedule(static) reduction(+ : total) reduction(max : max_dist)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % w;
        const int64_t y = (l / w) % h;
        const int64_t z = l / (w * h);
        const uint64_t p = pos[static_cast<size_t>(l)];
        if (x + 1 < w) {
            const uint64_t q = pos[static_cast<size_t>(l + 1)];
            const uint64_t dd = p > q ? p - q : q - p;
            dist[static_cast<size_t>(x + (w - 1) * (y + h * z))] = dd;
            total += dd;
            max_dist = std::max(max_dist, dd);
        }
        if (y + 1 < h) {
            const uint64_t q = pos[static_cast<size_t>(l + w)];
            const uint64_t dd = p > q ? p - q : q - p;
            dist[static_cast<size_t>(x_pairs) + static_cast<size_t>(x + w * (y + (h - 1) * z))] = dd;
            total += dd;
            max_dist = std::max(max_dist, dd);
        }
        if (z + 1 < d) {
            const uint64_t q = pos[static_cast<size_t>(l + w * h)];
            const uint64_t dd = p > q ? p - q : q - p;
            dist[static_cast<size_t>(x_pairs + y_pairs) + static_cast<size_t>(x + w * (y + h * z))] = dd;
            total += dd;
            max_dist = std::max(max_dist, dd);
        }
    }

    rep.mean_neighbor_distance = static_cast<double>(total) / static_cast<double>(pair_count);
    rep.max_neighbor_distance = max_dist;
    rep.p50 = nearest_rank(dist, 0.50);
    rep.p95 = nearest_rank(dist, 0.95);
    return rep;
}

std::vector<LocalityReport> compare_schemes(const GridDims& dims,
                                            const std::vector<OrderingScheme>& schemes) {
    if (schemes.empty()) throw std::invalid_argument("compare_schemes: empty scheme list");
    std::vector<LocalityReport> out;
    out.reserve(schemes.size());
    for (const auto& s : schemes) out.push_back(neighbor_distance_stats(build_ordering(s, dims)));
    return out;
}

std::string locality_csv(const std::vector<LocalityReport>& reports) {
    std::string out = "scheme,w,h,d,mean,max,p50,p95,pairs\n";
    char line[256];
    for (const auto& r : reports) {
        std::snprintf(line, sizeof(line),
                      "%s,%" PRId64 ",%" PRId64 ",%" PRId64 ",%.6f,%" PRIu64 ",%" PRIu64 ",%" PRIu64
                      ",%" PRIu64 "\n",
                      r.scheme.c_str(), r.dims.w, r.dims.h, r.dims.d, r.mean_neighbor_distance,
                      r.max_neighbor_distance, r.p50, r.p95, r.pair_count);
        out += line;
    }
    return out;
}

}  // namespace voxseq
