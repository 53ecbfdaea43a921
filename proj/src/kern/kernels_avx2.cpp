// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// only ever executed after a runtime cpuid check (see dispatch.cpp).
#include "prefflow/kern/kernels.hpp"

#if defined(PREFFLOW_BUILD_AVX2)

#include <immintrin.h>

namespace prefflow::kern {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot_avx2(const double* x, const double* y, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) sum += x[i] * y[i];
    return sum;
}

void axpy_avx2(double a, const double* x, double* y, size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double sq_dist_avx2(const double* x, const double* y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        sum += d * d;
    }
    return sum;
}

void matvec_avx2(const double* w, size_t rows, size_t cols, const double* x,
                 const double* bias, double* out) {
    for (size_t r = 0; r < rows; ++r) {
        const double d = dot_avx2(w + r * cols, x, cols);
        out[r] = bias ? bias[r] + d : d;
    }
}

void matvec_t_acc_avx2(const double* w, size_t rows, size_t cols, const double* g, double* acc) {
    for (size_t r = 0; r < rows; ++r) axpy_avx2(g[r], w + r * cols, acc, cols);
}

void ger_acc_avx2(double* w, size_t rows, size_t cols, const double* g, const double* x) {
    for (size_t r = 0; r < rows; ++r) axpy_avx2(g[r], x, w + r * cols, cols);
}

}  // namespace

const Ops* avx2_ops() {
    static const Ops ops{
        "avx2",        dot_avx2,          axpy_avx2,
        sq_dist_avx2,  matvec_avx2,       matvec_t_acc_avx2,
        ger_acc_avx2,
    };
    return &ops;
}

}  // namespace prefflow::kern

#else

namespace prefflow::kern {
const Ops* avx2_ops() { return nullptr; }
}  // namespace prefflow::kern

#endif
