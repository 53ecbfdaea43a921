#pragma once

#include <cstddef>
#include <span>

// Dense double-precision kernels behind the field evaluation and training
// loops. A scalar reference implementation always exists; an AVX2 variant is
// compiled on x86-64 and picked at runtime when the CPU supports it. The two
// are equivalence-tested against each other. Backend choice is per-process,
// so every run is internally consistent and reproducible.
namespace prefflow::kern {

enum class Backend { scalar, avx2 };

struct Ops {
    const char* name;
    // sum_i x[i]*y[i]
    double (*dot)(const double* x, const double* y, size_t n);
    // y[i] += a*x[i]
    void (*axpy)(double a, const double* x, double* y, size_t n);
    // sum_i (x[i]-y[i])^2
    double (*sq_dist)(const double* x, const double* y, size_t n);
    // out[r] = bias[r] + sum_c w[r*cols+c]*x[c]   (bias may be null)
    void (*matvec)(const double* w, size_t rows, size_t cols, const double* x,
                   const double* bias, double* out);
    // acc[c] += sum_r w[r*cols+c]*g[r]
    void (*matvec_t_acc)(const double* w, size_t rows, size_t cols, const double* g, double* acc);
    // w[r*cols+c] += g[r]*x[c]
    void (*ger_acc)(double* w, size_t rows, size_t cols, const double* g, const double* x);
};

const Ops& scalar_ops();
const Ops* avx2_ops();  // null when not compiled in
bool avx2_supported();  // runtime CPU check

// Resolved once per process: PREFFLOW_KERNELS=scalar|avx2 overrides, else
// the best supported backend wins.
const Ops& active();
Backend active_backend();

// Test hook; throws PrefflowError if the backend is unavailable.
void force_backend(Backend backend);

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), x.size());
}
inline double sq_dist(std::span<const double> x, std::span<const double> y) {
    return active().sq_dist(x.data(), y.data(), x.size());
}

}  // namespace prefflow::kern
