#ifndef VOXSEQ_SFC_HPP
#define VOXSEQ_SFC_HPP

#include <cstdint>
#include <utility>

namespace voxseq {

// Recursion depth of a curve; side length is 2^bits per axis.
struct CurveOrder {
    int bits;
};

inline constexpr int kMaxCurveBits = 21;  // 3 * 21 = 63 index bits

// 2D Hilbert curve, classic rotate-and-reflect orientation: the order-1 cell
// sequence is (0,0), (0,1), (1,1), (1,0).
uint64_t hilbert2d_index(uint64_t x, uint64_t y, CurveOrder order);
std::pair<uint64_t, uint64_t> hilbert2d_coord(uint64_t index, CurveOrder order);

// 3D Hilbert curve. Consecutive indices are always unit steps.
uint64_t hilbert3d_index(uint64_t x, uint64_t y, uint64_t z, CurveOrder order);
struct Coord3 {
    uint64_t x, y, z;
};
Coord3 hilbert3d_coord(uint64_t index, CurveOrder order);

// Morton (Z-order): bit i of x lands on output bit 2i (2D) or 3i (3D),
// y and z on the following interleave slots.
uint64_t morton2d_index(uint64_t x, uint64_t y);
std::pair<uint64_t, uint64_t> morton2d_coord(uint64_t index);
uint64_t morton3d_index(uint64_t x, uint64_t y, uint64_t z);
Coord3 morton3d_coord(uint64_t index);

}  // namespace voxseq

#endif
