#ifndef VOXSEQ_GRID_HPP
#define VOXSEQ_GRID_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace voxseq {

// Spatial extents plus channel count of a voxel volume.
struct GridDims {
    int64_t w = 0, h = 0, d = 0;
    int64_t c = 0;

    int64_t voxels() const { return w * h * d; }

    bool same_space(const GridDims& o) const { return w == o.w && h == o.h && d == o.d; }

    void validate() const {
        if (w < 1 || h < 1 || d < 1) throw std::out_of_range("grid dims must be positive");
        if (c < 0) throw std::out_of_range("channel count must be >= 0");
        // w*h*d <= 2^40 keeps linear indices well inside 64 bits.
        if (w > (int64_t{1} << 40) / h / d) throw std::out_of_range("grid has more than 2^40 voxels");
    }
};

// Dense voxel feature volume. Linear voxel index L = x + w*(y + h*z);
// channels are contiguous per voxel: data[L*c + ch].
struct FeatureGrid {
    GridDims dims;
    std::vector<double> data;

    FeatureGrid() = default;
    explicit FeatureGrid(GridDims g) : dims(g) {
        dims.validate();
        data.assign(static_cast<size_t>(g.voxels() * g.c), 0.0);
    }

    int64_t linear(int64_t x, int64_t y, int64_t z) const { return x + dims.w * (y + dims.h * z); }

    double& at(int64_t x, int64_t y, int64_t z, int64_t ch) {
        return data[static_cast<size_t>(linear(x, y, z) * dims.c + ch)];
    }
    double at(int64_t x, int64_t y, int64_t z, int64_t ch) const {
        return data[static_cast<size_t>(linear(x, y, z) * dims.c + ch)];
    }
};

// Per-voxel class labels; 255 marks ignored voxels.
inline constexpr uint16_t kIgnoreLabel = 255;

struct LabelGrid {
    GridDims dims;  // c is unused and kept 0
    std::vector<uint16_t> data;

    LabelGrid() = default;
    explicit LabelGrid(GridDims g) : dims{g.w, g.h, g.d, 0} {
        dims.validate();
        data.assign(static_cast<size_t>(dims.voxels()), 0);
    }

    uint16_t& at(int64_t x, int64_t y, int64_t z) {
        return data[static_cast<size_t>(x + dims.w * (y + dims.h * z))];
    }
    uint16_t at(int64_t x, int64_t y, int64_t z) const {
        return data[static_cast<size_t>(x + dims.w * (y + dims.h * z))];
    }
};

// B x N x C sequence batch, the Mamba-domain view of a reordered grid.
// 64-bit scalars in test mode, 32-bit in fast mode.
template <class T>
struct SeqTensorT {
    int64_t b = 0, n = 0, c = 0;
    std::vector<T> data;

    SeqTensorT() = default;
    SeqTensorT(int64_t b_, int64_t n_, int64_t c_) : b(b_), n(n_), c(c_) {
        if (b < 1 || n < 1 || c < 1) throw std::out_of_range("sequence tensor dims must be >= 1");
        data.assign(static_cast<size_t>(b * n * c), T{});
    }

    T* row(int64_t bi, int64_t k) { return data.data() + (bi * n + k) * c; }
    const T* row(int64_t bi, int64_t k) const { return data.data() + (bi * n + k) * c; }
};

using SequenceTensor = SeqTensorT<double>;
using SequenceTensorF = SeqTensorT<float>;

}  // namespace voxseq

#endif
