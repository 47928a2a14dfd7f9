#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "voxseq/io.hpp"
#include "voxseq/synth.hpp"

using namespace voxseq;

namespace {

uint32_t file_crc32(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return static_cast<uint32_t>(
        crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

}  // namespace

TEST_CASE("noiseless identity embedding reproduces exact one-hot features") {
    const GridDims dims{6, 6, 4, 5};
    const SceneSample s = generate_scene(7, dims, 4, {0.0, true});
    for (int64_t l = 0; l < dims.voxels(); ++l) {
        const uint16_t y = s.labels.data[static_cast<size_t>(l)];
        for (int64_t ch = 0; ch < dims.c; ++ch)
            CHECK(s.features.data[static_cast<size_t>(l * dims.c + ch)] == (ch == y ? 1.0 : 0.0));
    }
}

TEST_CASE("same seed regenerates a bit-identical sample") {
    const GridDims dims{8, 8, 6, 7};
    const SceneSample a = generate_scene(42, dims, 4, {});
    const SceneSample b = generate_scene(42, dims, 4, {});
    CHECK(a.labels.data == b.labels.data);
    CHECK(a.features.data == b.features.data);
    const SceneSample c = generate_scene(43, dims, 4, {});
    CHECK(a.labels.data != c.labels.data);
}

TEST_CASE("16x16x8 scenes contain every class 0..3") {
    const GridDims dims{16, 16, 8, 4};
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const SceneSample s = generate_scene(seed, dims, 4, {});
        std::set<uint16_t> seen(s.labels.data.begin(), s.labels.data.end());
        REQUIRE(seen.count(0) == 1);
        REQUIRE(seen.count(1) == 1);
        REQUIRE(seen.count(2) == 1);
        REQUIRE(seen.count(3) == 1);
    }
}

TEST_CASE("generator contracts: slab at z=0, labels below K, K >= 4") {
    const GridDims dims{10, 9, 5, 4};
    const SceneSample s = generate_scene(3, dims, 5, {});
    for (int64_t y = 0; y < dims.h; ++y)
        for (int64_t x = 0; x < dims.w; ++x) CHECK(s.labels.at(x, y, 0) == 1);
    for (uint16_t v : s.labels.data) CHECK(v < 5);
    CHECK_THROWS_AS(generate_scene(0, dims, 3, {}), std::invalid_argument);
}

TEST_CASE("embedding is fixed across seeds for a given (K, channels)") {
    const auto e1 = class_embedding(4, 16);
    const auto e2 = class_embedding(4, 16);
    CHECK(e1 == e2);
    const auto e3 = class_embedding(5, 16);
    CHECK(e1 != e3);
}

TEST_CASE("VOXG grid round trip is bit exact for f64 and labels") {
    const std::string path = "/tmp/voxseq_grid.voxg";
    const GridDims dims{5, 4, 3, 2};
    FeatureGrid g(dims);
    Rng rng(0x10);
    for (auto& v : g.data) v = rng.uniform(-100, 100);
    write_grid(path, g);
    const FeatureGrid back = read_grid(path);
    CHECK(back.dims.w == 5);
    CHECK(back.dims.c == 2);
    CHECK(back.data == g.data);

    LabelGrid labels(dims);
    for (auto& v : labels.data) v = static_cast<uint16_t>(rng.below(300));
    const std::string lpath = "/tmp/voxseq_labels.voxg";
    write_labels(lpath, labels);
    const LabelGrid lback = read_labels(lpath);
    CHECK(lback.data == labels.data);
    std::remove(path.c_str());
    std::remove(lpath.c_str());
}

TEST_CASE("zero-channel grid writes a header-only payload and round-trips") {
    const std::string path = "/tmp/voxseq_empty.voxg";
    FeatureGrid g({3, 3, 3, 0});
    write_grid(path, g);
    {
        std::ifstream f(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        CHECK(bytes.size() == 22);  // magic+version+dtype+4 dims, no payload
    }
    const FeatureGrid back = read_grid(path);
    CHECK(back.dims.c == 0);
    CHECK(back.data.empty());
    std::remove(path.c_str());
}

TEST_CASE("hand-built 1x1x1x1 f64 file reads back the value 1.0") {
    const std::string path = "/tmp/voxseq_hand.voxg";
    {
        std::ofstream f(path, std::ios::binary);
        detail::ByteWriter w(f);
        w.bytes("VOXG", 4);
        w.u8(1);
        w.u8(2);  // f64
        w.u32(1);
        w.u32(1);
        w.u32(1);
        w.u32(1);
        w.f64(1.0);
    }
    const FeatureGrid g = read_grid(path);
    CHECK(g.dims.voxels() == 1);
    CHECK(g.data == std::vector<double>{1.0});
    std::remove(path.c_str());
}

TEST_CASE("format errors carry byte offsets") {
    const std::string path = "/tmp/voxseq_bad.voxg";
    {
        std::ofstream f(path, std::ios::binary);
        f << "VOXGxx";
    }
    try {
        (void)read_grid(path);
        CHECK(false);
    } catch (const FormatError& e) {
        CHECK(e.offset() == 4);  // bad version byte
    }
    {
        std::ofstream f(path, std::ios::binary);
        detail::ByteWriter w(f);
        w.bytes("VOXG", 4);
        w.u8(1);
        w.u8(2);
        w.u32(2);
        w.u32(1);
        w.u32(1);
        w.u32(1);
        w.f64(1.0);  // second voxel missing
    }
    CHECK_THROWS_AS(read_grid(path), FormatError);

    // dtype mismatch: label file through read_grid.
    {
        LabelGrid labels({1, 1, 1, 0});
        write_labels(path, labels);
    }
    CHECK_THROWS_AS(read_grid(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("f32 files widen losslessly") {
    const std::string path = "/tmp/voxseq_f32.voxg";
    FeatureGrid g({2, 2, 1, 1});
    g.data = {0.5, -1.25, 3.0, 100.125};  // exactly representable in f32
    write_grid(path, g, VoxgDtype::F32);
    const FeatureGrid back = read_grid(path);
    CHECK(back.data == g.data);
    std::remove(path.c_str());
}

TEST_CASE("fixed-seed scene files have a stable CRC across two generations") {
    const GridDims dims{16, 16, 8, 6};
    const std::string pa = "/tmp/voxseq_scene_a.voxg", pb = "/tmp/voxseq_scene_b.voxg";
    const SceneSample a = generate_scene(123, dims, 4, {});
    write_grid(pa, a.features);
    const SceneSample b = generate_scene(123, dims, 4, {});
    write_grid(pb, b.features);
    CHECK(file_crc32(pa) == file_crc32(pb));
    std::remove(pa.c_str());
    std::remove(pb.c_str());
}
