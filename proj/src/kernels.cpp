#include "vfrl/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace vfrl::kernels {

bool cpu_has_avx2() {
#if defined(VFRL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

namespace {

Isa resolve_default() {
    if (const char* env = std::getenv("VFRL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::Scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Isa::Avx2;
        // "auto" or anything unrecognized falls through to detection
    }
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

Isa g_isa = resolve_default();

}  // namespace

Isa active() { return g_isa; }

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

void force(Isa isa) {
    if (isa == Isa::Avx2 && !cpu_has_avx2())
        throw std::runtime_error("kernels: AVX2 requested but not supported by this CPU");
    g_isa = isa;
}

void force_auto() { g_isa = resolve_default(); }

#if defined(VFRL_HAVE_AVX2)
#define VFRL_DISPATCH(fn, ...) \
    return g_isa == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define VFRL_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void gemv(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    VFRL_DISPATCH(gemv, rows, cols, a, x, y);
}

void gemv_t(std::size_t rows, std::size_t cols, const double* a, const double* x, double* y) {
    VFRL_DISPATCH(gemv_t, rows, cols, a, x, y);
}

void ger(std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y, double* a) {
    VFRL_DISPATCH(ger, rows, cols, alpha, x, y, a);
}

double dot(std::size_t n, const double* x, const double* y) { VFRL_DISPATCH(dot, n, x, y); }

void axpy(std::size_t n, double alpha, const double* x, double* y) {
    VFRL_DISPATCH(axpy, n, alpha, x, y);
}

double sq_dist(std::size_t n, const double* x, const double* y) { VFRL_DISPATCH(sq_dist, n, x, y); }

#undef VFRL_DISPATCH

}  // namespace vfrl::kernels
