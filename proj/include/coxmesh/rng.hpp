#ifndef COXMESH_RNG_HPP
#define COXMESH_RNG_HPP

#include <cmath>
#include <cstdint>

namespace coxmesh {

/// Counter-based generator (splitmix64 core). std::mt19937 plus the
/// distributions in <random> are not bit-stable across standard libraries,
/// so all sampling goes through this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on (0,1): 53-bit mantissa, never returns 0 or 1.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. The spare is cached.
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_uniform();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Poisson count by exponential inter-arrival times. O(mean), fine for
    /// the per-triangle means this project produces.
    std::uint64_t next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        std::uint64_t k = 0;
        double t = -std::log(next_uniform());
        while (t < mean) {
            ++k;
            t += -std::log(next_uniform());
        }
        return k;
    }

    /// Decorrelated substream keyed on (seed, key); used to give each
    /// triangle its own stream so point counts do not depend on traversal
    /// order.
    static Rng substream(std::uint64_t seed, std::uint64_t key) {
        Rng mix(seed ^ (0x9e3779b97f4a7c15ULL * (key + 1)));
        mix.next_u64();
        return mix;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace coxmesh

#endif
