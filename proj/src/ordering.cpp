#include "voxseq/ordering.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "voxseq/io.hpp"
#include "voxseq/sfc.hpp"

namespace voxseq {
namespace {

int order_for_side(int64_t max_side) {
    int bits = 1;
    while ((int64_t{1} << bits) < max_side) ++bits;
    return bits;
}

// Column expansion shared by all height-prioritized schemes: visit (x,y)
// cells by ascending 2D key, emit each full z column contiguously.
void build_height_prioritized(const GridDims& dims, std::vector<uint64_t>& keys,
                              bool z_snake, std::vector<uint64_t>& out) {
    const int64_t wh = dims.w * dims.h;
    std::vector<std::pair<uint64_t, int64_t>> cols(static_cast<size_t>(wh));
    for (int64_t i = 0; i < wh; ++i) cols[static_cast<size_t>(i)] = {keys[static_cast<size_t>(i)], i};
    std::sort(cols.begin(), cols.end());

    out.resize(static_cast<size_t>(dims.voxels()));
    int64_t s = 0;
    for (int64_t ci = 0; ci < wh; ++ci) {
        const int64_t cell = cols[static_cast<size_t>(ci)].second;
        const int64_t x = cell % dims.w, y = cell / dims.w;
        const bool descending = z_snake && (ci & 1);
        for (int64_t zi = 0; zi < dims.d; ++zi) {
            const int64_t z = descending ? dims.d - 1 - zi : zi;
            out[static_cast<size_t>(s++)] = static_cast<uint64_t>(x + dims.w * (y + dims.h * z));
        }
    }
}

// 3D curve over the padded power-of-two bounding cube: rank in-range cells
// by curve index, positions compacted.
void build_curve3d(const GridDims& dims, bool hilbert, std::vector<uint64_t>& out) {
    const CurveOrder order{order_for_side(std::max({dims.w, dims.h, dims.d}))};
    const int64_t n = dims.voxels();
    std::vector<std::pair<uint64_t, int64_t>> cells(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const int64_t x = l % dims.w;
        const int64_t y = (l / dims.w) % dims.h;
        const int64_t z = l / (dims.w * dims.h);
        const uint64_t key = hilbert ? hilbert3d_index(static_cast<uint64_t>(x),
                                                       static_cast<uint64_t>(y),
                                                       static_cast<uint64_t>(z), order)
                                     : morton3d_index(static_cast<uint64_t>(x),
                                                      static_cast<uint64_t>(y),
                                                      static_cast<uint64_t>(z));
        cells[static_cast<size_t>(l)] = {key, l};
    }
    std::sort(cells.begin(), cells.end());
    out.resize(static_cast<size_t>(n));
    for (int64_t s = 0; s < n; ++s) out[static_cast<size_t>(s)] = static_cast<uint64_t>(cells[static_cast<size_t>(s)].second);
}

}  // namespace

SchemeKind parse_scheme(const std::string& name) {
    if (name == "raster-xyz") return SchemeKind::RasterXYZ;
    if (name == "raster-zxy") return SchemeKind::RasterZXY;
    if (name == "morton3d") return SchemeKind::Morton3D;
    if (name == "hilbert3d") return SchemeKind::Hilbert3D;
    if (name == "hp-hilbert2d") return SchemeKind::HeightPrioritizedHilbert2D;
    if (name == "hp-morton2d") return SchemeKind::HeightPrioritizedMorton2D;
    throw std::invalid_argument("unknown ordering scheme: " + name);
}

std::string scheme_name(SchemeKind kind) {
    switch (kind) {
        case SchemeKind::RasterXYZ: return "raster-xyz";
        case SchemeKind::RasterZXY: return "raster-zxy";
        case SchemeKind::Morton3D: return "morton3d";
        case SchemeKind::Hilbert3D: return "hilbert3d";
        case SchemeKind::HeightPrioritizedHilbert2D: return "hp-hilbert2d";
        case SchemeKind::HeightPrioritizedMorton2D: return "hp-morton2d";
    }
    throw std::invalid_argument("unknown scheme code");
}

std::string scheme_label(const OrderingScheme& scheme) {
    std::string s = scheme_name(scheme.kind);
    if (scheme.z_snake) s += "+zsnake";
    return s;
}

Ordering build_ordering(OrderingScheme scheme, const GridDims& dims) {
    dims.validate();
    Ordering o;
    o.scheme = scheme;
    o.dims = dims;
    const int64_t n = dims.voxels();

    switch (scheme.kind) {
        case SchemeKind::RasterXYZ: {
            // x fastest, then y, then z: identical to the native linear layout.
            o.seq_to_linear.resize(static_cast<size_t>(n));
            for (int64_t s = 0; s < n; ++s) o.seq_to_linear[static_cast<size_t>(s)] = static_cast<uint64_t>(s);
            break;
        }
        case SchemeKind::RasterZXY: {
            o.seq_to_linear.resize(static_cast<size_t>(n));
            int64_t s = 0;
            for (int64_t y = 0; y < dims.h; ++y)
                for (int64_t x = 0; x < dims.w; ++x)
                    for (int64_t z = 0; z < dims.d; ++z)
                        o.seq_to_linear[static_cast<size_t>(s++)] =
                            static_cast<uint64_t>(x + dims.w * (y + dims.h * z));
            break;
        }
        case SchemeKind::Morton3D:
            build_curve3d(dims, /*hilbert=*/false, o.seq_to_linear);
            break;
        case SchemeKind::Hilbert3D:
            build_curve3d(dims, /*hilbert=*/true, o.seq_to_linear);
            break;
        case SchemeKind::HeightPrioritizedHilbert2D:
        case SchemeKind::HeightPrioritizedMorton2D: {
            const bool hilbert = scheme.kind == SchemeKind::HeightPrioritizedHilbert2D;
            const CurveOrder order{order_for_side(std::max(dims.w, dims.h))};
            std::vector<uint64_t> keys(static_cast<size_t>(dims.w * dims.h));
#pragma omp parallel for schedule(static)
            for (int64_t i = 0; i < dims.w * dims.h; ++i) {
                const uint64_t x = static_cast<uint64_t>(i % dims.w);
                const uint64_t y = static_cast<uint64_t>(i / dims.w);
                keys[static_cast<size_t>(i)] = hilbert ? hilbert2d_index(x, y, order) : morton2d_index(x, y);
            }
            build_height_prioritized(dims, keys, scheme.z_snake, o.seq_to_linear);
            break;
        }
    }

    o.linear_to_seq.resize(static_cast<size_t>(n));
    for (int64_t s = 0; s < n; ++s)
        o.linear_to_seq[static_cast<size_t>(o.seq_to_linear[static_cast<size_t>(s)])] = static_cast<uint64_t>(s);
    return o;
}

SequenceTensor apply_ordering(const FeatureGrid& grid, const Ordering& ordering) {
    if (!grid.dims.same_space(ordering.dims))
        throw std::invalid_argument("apply_ordering: grid dims do not match ordering dims");
    const int64_t n = ordering.dims.voxels();
    const int64_t c = grid.dims.c;
    SequenceTensor out(1, n, c);
#pragma omp parallel for schedule(static)
    for (int64_t s = 0; s < n; ++s) {
        const double* src = grid.data.data() + static_cast<int64_t>(ordering.seq_to_linear[static_cast<size_t>(s)]) * c;
        std::copy(src, src + c, out.data.data() + s * c);
    }
    return out;
}

FeatureGrid invert_ordering(const SequenceTensor& seq, const Ordering& ordering) {
    const int64_t n = ordering.dims.voxels();
    if (seq.b != 1 || seq.n != n)
        throw std::invalid_argument("invert_ordering: sequence length does not match ordering");
    GridDims dims = ordering.dims;
    dims.c = seq.c;
    FeatureGrid grid(dims);
#pragma omp parallel for schedule(static)
    for (int64_t l = 0; l < n; ++l) {
        const double* src = seq.data.data() + static_cast<int64_t>(ordering.linear_to_seq[static_cast<size_t>(l)]) * seq.c;
        std::copy(src, src + seq.c, grid.data.data() + l * seq.c);
    }
    return grid;
}

void write_ordering(const std::string& path, const Ordering& ordering) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    detail::ByteWriter w(f);
    w.bytes("VORD", 4);
    w.u8(1);
    w.u8(static_cast<uint8_t>(ordering.scheme.kind));
    w.u8(ordering.scheme.z_snake ? 1 : 0);
    w.u32(static_cast<uint32_t>(ordering.dims.w));
    w.u32(static_cast<uint32_t>(ordering.dims.h));
    w.u32(static_cast<uint32_t>(ordering.dims.d));
    for (uint64_t v : ordering.seq_to_linear) w.u64(v);
    if (!f) throw std::runtime_error("write failed: " + path);
}

Ordering read_ordering(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path, 0, "cannot open file");
    detail::ByteReader r(f, path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "VORD") throw FormatError(path, 0, "bad magic, expected VORD");
    if (r.u8() != 1) throw FormatError(path, 4, "unsupported version");
    const uint8_t code = r.u8();
    if (code > 5) throw FormatError(path, 5, "unknown scheme code");
    Ordering o;
    o.scheme.kind = static_cast<SchemeKind>(code);
    o.scheme.z_snake = r.u8() != 0;
    o.dims.w = r.u32();
    o.dims.h = r.u32();
    o.dims.d = r.u32();
    o.dims.c = 0;
    o.dims.validate();
    const int64_t n = o.dims.voxels();
    o.seq_to_linear.resize(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) o.seq_to_linear[static_cast<size_t>(i)] = r.u64();
    // Rebuild the inverse and reject non-permutations.
    o.linear_to_seq.assign(static_cast<size_t>(n), UINT64_MAX);
    for (int64_t s = 0; s < n; ++s) {
        const uint64_t l = o.seq_to_linear[static_cast<size_t>(s)];
        if (l >= static_cast<uint64_t>(n) || o.linear_to_seq[static_cast<size_t>(l)] != UINT64_MAX)
            throw FormatError(path, 19 + 8 * s, "entries are not a permutation");
        o.linear_to_seq[static_cast<size_t>(l)] = static_cast<uint64_t>(s);
    }
    return o;
}

std::shared_ptr<const Ordering> OrderingCache::get(OrderingScheme scheme, const GridDims& dims) {
    const Key key{static_cast<uint8_t>(scheme.kind), scheme.z_snake, dims.w, dims.h, dims.d};
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto built = std::make_shared<const Ordering>(build_ordering(scheme, dims));
    cache_.emplace(key, built);
    return built;
}

}  // namespace voxseq
