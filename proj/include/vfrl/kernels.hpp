#pragma once

#include <cstddef>
#include <string>

// Dense double-precision kernels behind the approximators, the embedding
// distances and the DTMC sweeps. A scalar reference implementation is always
// available; an AVX2 variant is selected at runtime when the CPU supports it.
// The two are equivalence-tested against each other (tests/test_kernels.cpp).

namespace vfrl::kernels {

enum class Isa { Scalar, Avx2 };

// The instruction set currently driving the dispatched entry points.
Isa active();
const char* isa_name(Isa isa);

// Overrides dispatch (tests, or the VFRL_KERNELS=scalar|avx2|auto env var,
// read once at startup). Forcing Avx2 on a CPU without it throws.
void force(Isa isa);
void force_auto();

// y = A x, A row-major (rows x cols).
void gemv(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
// y = A^T x, A row-major (rows x cols); x has rows elements, y has cols.
void gemv_t(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
// A += alpha * x y^T, A row-major (rows x cols).
void ger(std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y, double* a);
double dot(std::size_t n, const double* x, const double* y);
// y += alpha * x
void axpy(std::size_t n, double alpha, const double* x, double* y);
// Squared Euclidean distance.
double sq_dist(std::size_t n, const double* x, const double* y);

namespace scalar {
void gemv(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
void gemv_t(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
void ger(std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y, double* a);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double sq_dist(std::size_t n, const double* x, const double* y);
}  // namespace scalar

#if defined(VFRL_HAVE_AVX2)
namespace avx2 {
void gemv(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
void gemv_t(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y);
void ger(std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y, double* a);
double dot(std::size_t n, const double* x, const double* y);
void axpy(std::size_t n, double alpha, const double* x, double* y);
double sq_dist(std::size_t n, const double* x, const double* y);
}  // namespace avx2
#endif

// True when the running CPU can execute the AVX2 variant.
bool cpu_has_avx2();

}  // namespace vfrl::kernels
