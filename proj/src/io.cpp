#include "voxseq/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace voxseq {
namespace detail {

void ByteWriter::bytes(const char* p, size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

void ByteWriter::u8(uint8_t v) { bytes(reinterpret_cast<const char*>(&v), 1); }

void ByteWriter::u32(uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    bytes(b, 4);
}

void ByteWriter::u64(uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
    bytes(b, 8);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
void ByteWriter::f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

void ByteReader::bytes(char* p, size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (static_cast<size_t>(in_.gcount()) != n)
        throw FormatError(path_, offset_, "truncated payload");
    offset_ += static_cast<int64_t>(n);
}

uint8_t ByteReader::u8() {
    char b;
    bytes(&b, 1);
    return static_cast<uint8_t>(b);
}

uint16_t ByteReader::u16() {
    unsigned char b[2];
    bytes(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t ByteReader::u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t ByteReader::u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

bool ByteReader::at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

}  // namespace detail

namespace {

void write_voxg_header(detail::ByteWriter& w, VoxgDtype dtype, const GridDims& dims) {
    w.bytes("VOXG", 4);
    w.u8(1);
    w.u8(static_cast<uint8_t>(dtype));
    w.u32(static_cast<uint32_t>(dims.w));
    w.u32(static_cast<uint32_t>(dims.h));
    w.u32(static_cast<uint32_t>(dims.d));
    w.u32(static_cast<uint32_t>(dims.c));
}

struct VoxgHeader {
    VoxgDtype dtype;
    GridDims dims;
};

VoxgHeader read_voxg_header(detail::ByteReader& r, const std::string& path) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "VOXG") throw FormatError(path, 0, "bad magic, expected VOXG");
    if (r.u8() != 1) throw FormatError(path, 4, "unsupported version");
    const uint8_t dt = r.u8();
    if (dt < 1 || dt > 3) throw FormatError(path, 5, "unknown dtype code");
    VoxgHeader h;
    h.dtype = static_cast<VoxgDtype>(dt);
    h.dims.w = r.u32();
    h.dims.h = r.u32();
    h.dims.d = r.u32();
    h.dims.c = r.u32();
    h.dims.validate();
    return h;
}

}  // namespace

void write_grid(const std::string& path, const FeatureGrid& grid, VoxgDtype dtype) {
    if (dtype == VoxgDtype::U16) throw std::invalid_argument("write_grid: use write_labels for u16");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    detail::ByteWriter w(f);
    write_voxg_header(w, dtype, grid.dims);
    if (dtype == VoxgDtype::F64) {
        for (double v : grid.data) w.f64(v);
    } else {
        for (double v : grid.data) w.f32(static_cast<float>(v));
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

FeatureGrid read_grid(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path, 0, "cannot open file");
    detail::ByteReader r(f, path);
    const VoxgHeader h = read_voxg_header(r, path);
    if (h.dtype == VoxgDtype::U16)
        throw FormatError(path, 5, "dtype mismatch: label payload, expected features");
    FeatureGrid grid(h.dims);
    const size_t count = grid.data.size();
    for (size_t i = 0; i < count; ++i)
        grid.data[i] = h.dtype == VoxgDtype::F64 ? r.f64() : static_cast<double>(r.f32());
    if (!r.at_eof()) throw FormatError(path, r.offset(), "trailing bytes after payload");
    return grid;
}

void write_labels(const std::string& path, const LabelGrid& labels) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    detail::ByteWriter w(f);
    GridDims dims = labels.dims;
    dims.c = 1;
    write_voxg_header(w, VoxgDtype::U16, dims);
    for (uint16_t v : labels.data) {
        char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
        w.bytes(b, 2);
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

LabelGrid read_labels(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw FormatError(path, 0, "cannot open file");
    detail::ByteReader r(f, path);
    const VoxgHeader h = read_voxg_header(r, path);
    if (h.dtype != VoxgDtype::U16)
        throw FormatError(path, 5, "dtype mismatch: feature payload, expected labels");
    if (h.dims.c != 1) throw FormatError(path, 18, "label grids carry exactly one channel");
    LabelGrid labels(h.dims);
    for (auto& v : labels.data) v = r.u16();
    if (!r.at_eof()) throw FormatError(path, r.offset(), "trailing bytes after payload");
    return labels;
}

}  // namespace voxseq
