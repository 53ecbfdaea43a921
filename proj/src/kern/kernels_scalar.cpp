#include "prefflow/kern/kernels.hpp"

namespace prefflow::kern {
namespace {

double dot_scalar(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sq_dist_scalar(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void matvec_scalar(const double* w, size_t rows, size_t cols, const double* x,
                   const double* bias, double* out) {
    for (size_t r = 0; r < rows; ++r) {
        double acc = bias ? bias[r] : 0.0;
        const double* row = w + r * cols;
        for (size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        out[r] = acc;
    }
}

void matvec_t_acc_scalar(const double* w, size_t rows, size_t cols, const double* g, double* acc) {
    for (size_t r = 0; r < rows; ++r) axpy_scalar(g[r], w + r * cols, acc, cols);
}

void ger_acc_scalar(double* w, size_t rows, size_t cols, const double* g, const double* x) {
    for (size_t r = 0; r < rows; ++r) axpy_scalar(g[r], x, w + r * cols, cols);
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops ops{
        "scalar",         dot_scalar,          axpy_scalar,
        sq_dist_scalar,   matvec_scalar,       matvec_t_acc_scalar,
        ger_acc_scalar,
    };
    return ops;
}

}  // namespace prefflow::kern
