#include "vfrl/kernels.hpp"

namespace vfrl::kernels::scalar {

void gemv(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = a + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

void gemv_t(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = a + r * cols;
        const double xr = x[r];
        for (std::size_t c = 0; c < cols; ++c) y[c] += xr * row[c];
    }
}

void ger(std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y, double* a) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = a + r * cols;
        const double ax = alpha * x[r];
        for (std::size_t c = 0; c < cols; ++c) row[c] += ax * y[c];
    }
}

double dot(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sq_dist(std::size_t n, const double* x, const double* y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace vfrl::kernels::scalar
