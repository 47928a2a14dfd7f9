#ifndef VOXSEQ_ORDERING_HPP
#define VOXSEQ_ORDERING_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "voxseq/grid.hpp"

namespace voxseq {

enum class SchemeKind : uint8_t {
    RasterXYZ = 0,
    RasterZXY = 1,
    Morton3D = 2,
    Hilbert3D = 3,
    HeightPrioritizedHilbert2D = 4,
    HeightPrioritizedMorton2D = 5,
};

struct OrderingScheme {
    SchemeKind kind = SchemeKind::RasterXYZ;
    // Alternate z direction per visited column; only meaningful for the
    // height-prioritized schemes.
    bool z_snake = false;
};

// CLI spellings: raster-xyz, raster-zxy, morton3d, hilbert3d, hp-hilbert2d,
// hp-morton2d. Throws std::invalid_argument on unknown names.
SchemeKind parse_scheme(const std::string& name);
std::string scheme_name(SchemeKind kind);
std::string scheme_label(const OrderingScheme& scheme);  // name plus "+zsnake" when set

// A bijection between grid linear indices and 1D sequence positions.
struct Ordering {
    OrderingScheme scheme;
    GridDims dims;  // c is irrelevant to the permutation and kept as given
    std::vector<uint64_t> seq_to_linear;
    std::vector<uint64_t> linear_to_seq;
};

Ordering build_ordering(OrderingScheme scheme, const GridDims& dims);

// out[s][ch] = grid[seq_to_linear[s]][ch], batch size 1.
SequenceTensor apply_ordering(const FeatureGrid& grid, const Ordering& ordering);
FeatureGrid invert_ordering(const SequenceTensor& seq, const Ordering& ordering);

// VORD file: magic "VORD", u8 version=1, u8 scheme code, u8 z_snake,
// u32 w,h,d little-endian, then N u64 little-endian seq_to_linear entries.
void write_ordering(const std::string& path, const Ordering& ordering);
Ordering read_ordering(const std::string& path);

// Per-(scheme, dims) cache; values are immutable and shareable.
class OrderingCache {
public:
    std::shared_ptr<const Ordering> get(OrderingScheme scheme, const GridDims& dims);

private:
    using Key = std::tuple<uint8_t, bool, int64_t, int64_t, int64_t>;
    std::map<Key, std::shared_ptr<const Ordering>> cache_;
    std::mutex mutex_;
};

}  // namespace voxseq

#endif
