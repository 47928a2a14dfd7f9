#include "voxseq/sfc.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace voxseq {
namespace {

void check_order(CurveOrder order) {
    if (order.bits < 1 || order.bits > kMaxCurveBits)
        throw std::out_of_range("curve order must be in [1, " + std::to_string(kMaxCurveBits) +
                                "], got " + std::to_string(order.bits));
}

void check_coord(uint64_t v, int bits, const char* axis) {
    if (v >> bits)
        throw std::out_of_range(std::string("coordinate ") + axis + " out of range for order " +
                                std::to_string(bits));
}

// Skilling's transpose transform ("Programming the Hilbert curve", 2004).
// Axes -> transposed Hilbert bits, in place.
template <size_t N>
void axes_to_transpose(std::array<uint64_t, N>& x, int bits) {
    for (uint64_t q = uint64_t{1} << (bits - 1); q > 1; q >>= 1) {
        uint64_t p = q - 1;
        if (x[0] & q) x[0] ^= p;
        for (size_t i = 1; i < N; ++i) {
            if (x[i] & q) {
                x[0] ^= p;
            } else {
                uint64_t t = (x[0] ^ x[i]) & p;
                x[0] ^= t;
                x[i] ^= t;
            }
        }
    }
    for (size_t i = 1; i < N; ++i) x[i] ^= x[i - 1];
    uint64_t t = 0;
    for (uint64_t q = uint64_t{1} << (bits - 1); q > 1; q >>= 1)
        if (x[N - 1] & q) t ^= q - 1;
    for (size_t i = 0; i < N; ++i) x[i] ^= t;
}

template <size_t N>
void transpose_to_axes(std::array<uint64_t, N>& x, int bits) {
    uint64_t t = x[N - 1] >> 1;
    for (size_t i = N - 1; i > 0; --i) x[i] ^= x[i - 1];
    x[0] ^= t;
    for (uint64_t q = 2; q != uint64_t{2} << (bits - 1); q <<= 1) {
        uint64_t p = q - 1;
        for (size_t i = N - 1; i > 0; --i) {
            if (x[i] & q) {
                x[0] ^= p;
            } else {
                uint64_t w = (x[0] ^ x[i]) & p;
                x[0] ^= w;
                x[i] ^= w;
            }
        }
        if (x[0] & q) x[0] ^= p;
    }
}

// Interleave the transpose form into a single index, axis 0 most significant
// within each bit plane.
template <size_t N>
uint64_t transpose_to_index(const std::array<uint64_t, N>& x, int bits) {
    uint64_t index = 0;
    for (int b = bits - 1; b >= 0; --b)
        for (size_t i = 0; i < N; ++i) index = (index << 1) | ((x[i] >> b) & 1);
    return index;
}

template <size_t N>
std::array<uint64_t, N> index_to_transpose(uint64_t index, int bits) {
    std::array<uint64_t, N> x{};
    int pos = bits * N;
    for (int b = bits - 1; b >= 0; --b)
        for (size_t i = 0; i < N; ++i) x[i] |= ((index >> --pos) & 1) << b;
    return x;
}

uint64_t spread2(uint64_t v) {
    v &= 0xffffffffULL;
    v = (v | (v << 16)) & 0x0000ffff0000ffffULL;
    v = (v | (v << 8)) & 0x00ff00ff00ff00ffULL;
    v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0fULL;
    v = (v | (v << 2)) & 0x3333333333333333ULL;
    v = (v | (v << 1)) & 0x5555555555555555ULL;
    return v;
}

uint64_t compact2(uint64_t v) {
    v &= 0x5555555555555555ULL;
    v = (v | (v >> 1)) & 0x3333333333333333ULL;
    v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0fULL;
    v = (v | (v >> 4)) & 0x00ff00ff00ff00ffULL;
    v = (v | (v >> 8)) & 0x0000ffff0000ffffULL;
    v = (v | (v >> 16)) & 0x00000000ffffffffULL;
    return v;
}

uint64_t spread3(uint64_t v) {
    v &= 0x1fffffULL;  // 21 bits
    v = (v | (v << 32)) & 0x001f00000000ffffULL;
    v = (v | (v << 16)) & 0x001f0000ff0000ffULL;
    v = (v | (v << 8)) & 0x100f00f00f00f00fULL;
    v = (v | (v << 4)) & 0x10c30c30c30c30c3ULL;
    v = (v | (v << 2)) & 0x1249249249249249ULL;
    return v;
}

uint64_t compact3(uint64_t v) {
    v &= 0x1249249249249249ULL;
    v = (v ^ (v >> 2)) & 0x10c30c30c30c30c3ULL;
    v = (v ^ (v >> 4)) & 0x100f00f00f00f00fULL;
    v = (v ^ (v >> 8)) & 0x001f0000ff0000ffULL;
    v = (v ^ (v >> 16)) & 0x001f00000000ffffULL;
    v = (v ^ (v >> 32)) & 0x00000000001fffffULL;
    return v;
}

}  // namespace

uint64_t hilbert2d_index(uint64_t x, uint64_t y, CurveOrder order) {
    check_order(order);
    check_coord(x, order.bits, "x");
    check_coord(y, order.bits, "y");
    std::array<uint64_t, 2> v{x, y};
    axes_to_transpose(v, order.bits);
    return transpose_to_index(v, order.bits);
}

std::pair<uint64_t, uint64_t> hilbert2d_coord(uint64_t index, CurveOrder order) {
    check_order(order);
    if (order.bits < 32 && (index >> (2 * order.bits)))
        throw std::out_of_range("hilbert2d index out of range");
    auto v = index_to_transpose<2>(index, order.bits);
    transpose_to_axes(v, order.bits);
    return {v[0], v[1]};
}

uint64_t hilbert3d_index(uint64_t x, uint64_t y, uint64_t z, CurveOrder order) {
    check_order(order);
    check_coord(x, order.bits, "x");
    check_coord(y, order.bits, "y");
    check_coord(z, order.bits, "z");
    std::array<uint64_t, 3> v{x, y, z};
    axes_to_transpose(v, order.bits);
    return transpose_to_index(v, order.bits);
}

Coord3 hilbert3d_coord(uint64_t index, CurveOrder order) {
    check_order(order);
    if (index >> (3 * order.bits)) throw std::out_of_range("hilbert3d index out of range");
    auto v = index_to_transpose<3>(index, order.bits);
    transpose_to_axes(v, order.bits);
    return {v[0], v[1], v[2]};
}

uint64_t morton2d_index(uint64_t x, uint64_t y) {
    if ((x >> 32) || (y >> 32)) throw std::out_of_range("morton2d coordinate exceeds 32 bits");
    return spread2(x) | (spread2(y) << 1);
}

std::pair<uint64_t, uint64_t> morton2d_coord(uint64_t index) {
    return {compact2(index), compact2(index >> 1)};
}

uint64_t morton3d_index(uint64_t x, uint64_t y, uint64_t z) {
    if ((x >> kMaxCurveBits) || (y >> kMaxCurveBits) || (z >> kMaxCurveBits))
        throw std::out_of_range("morton3d coordinate exceeds 21 bits");
    return spread3(x) | (spread3(y) << 1) | (spread3(z) << 2);
}

Coord3 morton3d_coord(uint64_t index) {
    if (index >> 63) throw std::out_of_range("morton3d index exceeds 63 bits");
    return {compact3(index), compact3(index >> 1), compact3(index >> 2)};
}

}  // namespace voxseq
