#ifndef VOXSEQ_LOCALITY_HPP
#define VOXSEQ_LOCALITY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "voxseq/ordering.hpp"

namespace voxseq {

// Sequence-distance statistics over all 6-adjacent voxel pairs: how far an
// ordering pulls spatial neighbors apart in the 1D sequence.
struct LocalityReport {
    std::string scheme;
    GridDims dims;
    double mean_neighbor_distance = 0.0;
    uint64_t max_neighbor_distance = 0;
    uint64_t p50 = 0;
    uint64_t p95 = 0;
    uint64_t pair_count = 0;
};

LocalityReport neighbor_distance_stats(const Ordering& ordering);

std::vector<LocalityReport> compare_schemes(const GridDims& dims,
                                            const std::vector<OrderingScheme>& schemes);

// CSV with header `scheme,w,h,d,mean,max,p50,p95,pairs`.
std::string locality_csv(const std::vector<LocalityReport>& reports);

}  // namespace voxseq

#endif
