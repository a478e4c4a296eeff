#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "vfrl/kernels.hpp"
#include "vfrl/rng.hpp"

using namespace vfrl;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

bool close(double a, double b, double tol = 1e-11) {
    return std::fabs(a - b) <= tol * (1.0 + std::max(std::fabs(a), std::fabs(b)));
}

}  // namespace

TEST_CASE("scalar kernels match hand values") {
    const std::vector<double> x{1.0, 2.0, 3.0};
    const std::vector<double> y{4.0, -5.0, 6.0};
    CHECK(kernels::scalar::dot(3, x.data(), y.data()) == doctest::Approx(12.0));
    CHECK(kernels::scalar::sq_dist(3, x.data(), y.data()) == doctest::Approx(9.0 + 49.0 + 9.0));

    const std::vector<double> a{1.0, 0.0, 0.0, 2.0, 0.0, -1.0};  // 2x3
    std::vector<double> out(2);
    kernels::scalar::gemv(2, 3, a.data(), x.data(), out.data());
    CHECK(out[0] == doctest::Approx(1.0));
    CHECK(out[1] == doctest::Approx(2.0 * 1.0 - 1.0 * 3.0));

    std::vector<double> outT(3);
    const std::vector<double> w{2.0, -1.0};
    kernels::scalar::gemv_t(2, 3, a.data(), w.data(), outT.data());
    CHECK(outT[0] == doctest::Approx(2.0 * 1.0 - 1.0 * 2.0));
    CHECK(outT[1] == doctest::Approx(0.0));
    CHECK(outT[2] == doctest::Approx(1.0));
}

TEST_CASE("axpy and ger accumulate") {
    std::vector<double> y{1.0, 1.0};
    const std::vector<double> x{2.0, -3.0};
    kernels::scalar::axpy(2, 0.5, x.data(), y.data());
    CHECK(y[0] == doctest::Approx(2.0));
    CHECK(y[1] == doctest::Approx(-0.5));

    std::vector<double> a(4, 0.0);
    const std::vector<double> u{1.0, 2.0};
    const std::vector<double> v{3.0, 4.0};
    kernels::scalar::ger(2, 2, 2.0, u.data(), v.data(), a.data());
    CHECK(a[0] == doctest::Approx(6.0));
    CHECK(a[1] == doctest::Approx(8.0));
    CHECK(a[2] == doctest::Approx(12.0));
    CHECK(a[3] == doctest::Approx(16.0));
}

#if defined(VFRL_HAVE_AVX2)
TEST_CASE("avx2 variants agree with the scalar reference") {
    if (!kernels::cpu_has_avx2()) {
        MESSAGE("cpu lacks avx2; skipping equivalence");
        return;
    }
    Rng rng(7);
    // Sweep sizes around the vector width to cover remainder lanes.
    for (std::size_t n : {1u, 3u, 4u, 5u, 8u, 15u, 16u, 33u, 64u, 129u}) {
        const auto x = random_vec(n, rng);
        const auto y = random_vec(n, rng);
        CHECK(close(kernels::avx2::dot(n, x.data(), y.data()),
                    kernels::scalar::dot(n, x.data(), y.data())));
        CHECK(close(kernels::avx2::sq_dist(n, x.data(), y.data()),
                    kernels::scalar::sq_dist(n, x.data(), y.data())));

        auto y1 = y, y2 = y;
        kernels::avx2::axpy(n, 0.37, x.data(), y1.data());
        kernels::scalar::axpy(n, 0.37, x.data(), y2.data());
        for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i]));
    }
    for (std::size_t rows : {1u, 2u, 7u, 32u}) {
        for (std::size_t cols : {1u, 5u, 16u, 33u}) {
            const auto a = random_vec(rows * cols, rng);
            const auto x = random_vec(cols, rng);
            const auto w = random_vec(rows, rng);
            std::vector<double> o1(rows), o2(rows);
            kernels::avx2::gemv(rows, cols, a.data(), x.data(), o1.data());
            kernels::scalar::gemv(rows, cols, a.data(), x.data(), o2.data());
            for (std::size_t i = 0; i < rows; ++i) CHECK(close(o1[i], o2[i]));

            std::vector<double> t1(cols), t2(cols);
            kernels::avx2::gemv_t(rows, cols, a.data(), w.data(), t1.data());
            kernels::scalar::gemv_t(rows, cols, a.data(), w.data(), t2.data());
            for (std::size_t i = 0; i < cols; ++i) CHECK(close(t1[i], t2[i]));

            auto g1 = a, g2 = a;
            kernels::avx2::ger(rows, cols, -1.3, w.data(), x.data(), g1.data());
            kernels::scalar::ger(rows, cols, -1.3, w.data(), x.data(), g2.data());
            for (std::size_t i = 0; i < rows * cols; ++i) CHECK(close(g1[i], g2[i]));
        }
    }
}
#endif

TEST_CASE("dispatch can be forced to scalar and back") {
    const kernels::Isa before = kernels::active();
    kernels::force(kernels::Isa::Scalar);
    CHECK(kernels::active() == kernels::Isa::Scalar);
    const std::vector<double> x{1.0, 2.0};
    CHECK(kernels::dot(2, x.data(), x.data()) == doctest::Approx(5.0));
    kernels::force_auto();
    if (kernels::cpu_has_avx2()) CHECK(kernels::active() == kernels::Isa::Avx2);
    kernels::force(before);
}
