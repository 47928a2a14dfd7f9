#ifndef VOXSEQ_IO_HPP
#define VOXSEQ_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "voxseq/grid.hpp"

namespace voxseq {

// Malformed file, with the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& path, int64_t offset, const std::string& what)
        : std::runtime_error(path + " @ byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    int64_t offset() const { return offset_; }

private:
    int64_t offset_;
};

enum class VoxgDtype : uint8_t { F32 = 1, F64 = 2, U16 = 3 };

// VOXG file: magic "VOXG", u8 version=1, u8 dtype, u32 w,h,d,c little-endian,
// raw little-endian payload in layout L = x + w*(y + h*z), channels
// contiguous per voxel.
void write_grid(const std::string& path, const FeatureGrid& grid, VoxgDtype dtype = VoxgDtype::F64);
FeatureGrid read_grid(const std::string& path);

void write_labels(const std::string& path, const LabelGrid& labels);
LabelGrid read_labels(const std::string& path);

namespace detail {

// Little-endian scalar I/O on streams, independent of host byte order.
class ByteWriter {
public:
    explicit ByteWriter(std::ostream& out) : out_(out) {}
    void bytes(const char* p, size_t n);
    void u8(uint8_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f32(float v);
    void f64(double v);

private:
    std::ostream& out_;
};

class ByteReader {
public:
    ByteReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
    void bytes(char* p, size_t n);
    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    float f32();
    double f64();
    int64_t offset() const { return offset_; }
    bool at_eof();

private:
    std::istream& in_;
    std::string path_;
    int64_t offset_ = 0;
};

}  // namespace detail
}  // namespace voxseq

#endif
