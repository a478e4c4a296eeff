// AVX2 variants. This translation unit is the only one compiled with -mavx2;
// callers reach it through the runtime dispatch table in kernels.cpp.

#include "vfrl/kernels.hpp"

#if defined(VFRL_HAVE_AVX2)

#include <immintrin.h>

namespace vfrl::kernels::avx2 {

namespace {

inline double hsum256(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d sum2 = _mm_add_pd(lo, hi);
    const __m128d swapped = _mm_unpackhi_pd(sum2, sum2);
    return _mm_cvtsd_f64(_mm_add_sd(sum2, swapped));
}

inline double dot_row(std::size_t n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i] * y[i];
    return hsum256(acc) + tail;
}

}  // namespace

void gemv(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_row(cols, a + r * cols, x);
}

void gemv_t(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) _mm256_storeu_pd(y + c, _mm256_setzero_pd());
    for (; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = a + r * cols;
        const __m256d xr = _mm256_set1_pd(x[r]);
        std::size_t i = 0;
        for (; i + 4 <= cols; i += 4) {
            const __m256d acc = _mm256_fmadd_pd(xr, _mm256_loadu_pd(row + i), _mm256_loadu_pd(y + i));
            _mm256_storeu_pd(y + i, acc);
        }
        for (; i < cols; ++i) y[i] += x[r] * row[i];
    }
}

void ger(std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y, double* a) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = a + r * cols;
        const double ax = alpha * x[r];
        const __m256d vax = _mm256_set1_pd(ax);
        std::size_t i = 0;
        for (; i + 4 <= cols; i += 4) {
            const __m256d acc = _mm256_fmadd_pd(vax, _mm256_loadu_pd(y + i), _mm256_loadu_pd(row + i));
            _mm256_storeu_pd(row + i, acc);
        }
        for (; i < cols; ++i) row[i] += ax * y[i];
    }
}

double dot(std::size_t n, const double* x, const double* y) { return dot_row(n, x, y); }

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, acc);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

double sq_dist(std::size_t n, const double* x, const double* y) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        tail += d * d;
    }
    return hsum256(acc) + tail;
}

}  // namespace vfrl::kernels::avx2

#endif  // VFRL_HAVE_AVX2
