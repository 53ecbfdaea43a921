#include "prefflow/kern/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "prefflow/common/util.hpp"

namespace prefflow::kern {
namespace {

std::atomic<const Ops*> g_active{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const Ops* resolve() {
    const char* env = std::getenv("PREFFLOW_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_ops();
    if (env && std::strcmp(env, "avx2") == 0) {
        if (!avx2_supported() || !avx2_ops())
            throw PrefflowError("PREFFLOW_KERNELS=avx2 requested but AVX2 is unavailable");
        return avx2_ops();
    }
    if (avx2_supported() && avx2_ops()) return avx2_ops();
    return &scalar_ops();
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Ops& active() {
    const Ops* ops = g_active.load(std::memory_order_acquire);
    if (!ops) {
        ops = resolve();
        g_active.store(ops, std::memory_order_release);
        g_backend.store(ops == &scalar_ops() ? Backend::scalar : Backend::avx2,
                        std::memory_order_release);
    }
    return *ops;
}

Backend active_backend() {
    active();
    return g_backend.load(std::memory_order_acquire);
}

void force_backend(Backend backend) {
    if (backend == Backend::avx2) {
        if (!avx2_supported() || !avx2_ops())
            throw PrefflowError("AVX2 backend unavailable on this machine");
        g_active.store(avx2_ops(), std::memory_order_release);
    } else {
        g_active.store(&scalar_ops(), std::memory_order_release);
    }
    g_backend.store(backend, std::memory_order_release);
}

}  // namespace prefflow::kern
