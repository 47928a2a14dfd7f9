// Serial-vs-OpenMP comparison for the hot kernels. The reference
// implementations are the same ones the unit tests check against.

#include <chrono>
#include <cstdio>
#include <string>

#include "voxseq/occ_head.hpp"
#include "voxseq/ref.hpp"
#include "voxseq/threads.hpp"

using namespace voxseq;

namespace {

template <class F>
double time_ms(F&& fn, int repeats) {
    fn();  // warmup
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double serial_ms, double parallel_ms) {
    std::printf("%-28s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
    apply_thread_env();
    std::printf("threads: %d\n", thread_limit());

    Rng rng(0xbe11c);
    const GridDims dims{64, 64, 16, 8};
    FeatureGrid grid(dims);
    for (auto& v : grid.data) v = rng.uniform(-1.0, 1.0);

    const Ordering ordering = build_ordering({SchemeKind::HeightPrioritizedHilbert2D, false}, dims);
    report("apply_ordering",
           time_ms([&] { (void)ref::apply_ordering(grid, ordering); }, 5),
           time_ms([&] { (void)apply_ordering(grid, ordering); }, 5));

    report("neighbor_distance_stats",
           time_ms([&] { (void)ref::neighbor_distance_stats(ordering); }, 5),
           time_ms([&] { (void)neighbor_distance_stats(ordering); }, 5));

    const int64_t n = 16384, c = 32, s = 8;
    SequenceTensor x(1, n, c);
    for (auto& v : x.data) v = rng.uniform(-1.0, 1.0);
    Rng prng(0x9a1a);
    const SsmParams ssm = init_ssm_params(c, s, prng);
    report("selective_ssm_forward",
           time_ms([&] { (void)ref::selective_ssm_forward(ssm, x); }, 3),
           time_ms([&] { (void)selective_ssm_forward(ssm, x); }, 3));

    const MambaBlockParams block = init_mamba_block(c, s, prng);
    report("mamba_block_forward",
           time_ms([&] { (void)ref::mamba_block_forward(block, x); }, 3),
           time_ms([&] { (void)mamba_block_forward(block, x); }, 3));

    const GridDims coarse{16, 16, 8, 16};
    FeatureGrid small(coarse);
    for (auto& v : small.data) v = rng.uniform(-1.0, 1.0);
    const GridDims fine{64, 64, 32, 0};
    report("coarse_to_fine",
           time_ms([&] { (void)ref::coarse_to_fine(small, fine); }, 5),
           time_ms([&] { (void)voxseq::coarse_to_fine(small, fine); }, 5));
    return 0;
}
