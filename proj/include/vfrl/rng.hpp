#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vfrl {

// Seeded random source. Every sampling routine in the toolkit draws from an
// explicit Rng so that a run is fully determined by its seed. Gaussian and
// uniform transforms are implemented here instead of via std distributions,
// which are not bit-stable across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : chain_(mix(seed)), gen_(mix(seed)) {}

    // Derives an independent stream. Forking depends only on the parent's
    // seed chain and the stream id, never on how much the parent consumed.
    Rng fork(std::uint64_t stream) const { return Rng(combine(chain_, stream), 0); }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    // Standard normal via Box-Muller, one spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

private:
    Rng(std::uint64_t chain, int) : chain_(chain), gen_(chain) {}

    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t combine(std::uint64_t chain, std::uint64_t stream) {
        return mix(chain ^ mix(stream + 0x123456789abcdefULL));
    }

    std::uint64_t chain_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace vfrl
