#ifndef VOXSEQ_REF_HPP
#define VOXSEQ_REF_HPP

#include "voxseq/block.hpp"
#include "voxseq/locality.hpp"
#include "voxseq/ordering.hpp"

// Serial reference implementations. Deliberately plain loops, kept as the
// ground truth the OpenMP kernels are tested and benchmarked against.
namespace voxseq::ref {

SequenceTensor apply_ordering(const FeatureGrid& grid, const Ordering& ordering);

// O(N*6) per-voxel pair enumerator.
LocalityReport neighbor_distance_stats(const Ordering& ordering);

SequenceTensor ssm_scan(const std::vector<double>& a_bar, const std::vector<double>& b_bar,
                        const std::vector<double>& c_bar, const SequenceTensor& x);

SequenceTensor selective_ssm_forward(const SsmParams& params, const SequenceTensor& u);

SequenceTensor mamba_block_forward(const MambaBlockParams& params, const SequenceTensor& v);

FeatureGrid coarse_to_fine(const FeatureGrid& grid, const GridDims& target);

}  // namespace voxseq::ref

#endif
