#include "voxseq/threads.hpp"

#include <cstdlib>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace voxseq {

void apply_thread_env() {
    const char* env = std::getenv("VOXSEQ_THREADS");
    if (env == nullptr) return;
    int n = std::atoi(env);
    if (n > 0) set_thread_limit(n);
}

int thread_limit() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_thread_limit(int n) {
    if (n < 1) n = 1;
#ifdef _OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

}  // namespace voxseq
