#ifndef VOXSEQ_THREADS_HPP
#define VOXSEQ_THREADS_HPP

namespace voxseq {

// Reads VOXSEQ_THREADS and applies it as the OpenMP thread cap.
// 0 or unset means auto (hardware default). No-op without OpenMP.
void apply_thread_env();

// Current worker-thread cap.
int thread_limit();

// Force a specific cap (used by tests and the single-thread budget checks).
void set_thread_limit(int n);

}  // namespace voxseq

#endif
