#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mimmu::num {

// splitmix64 finalizer, used for seed derivation
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic child seed from a base seed plus structural labels
// (node index, chain index, ...). Every random consumer in the repo
// derives its seed this way; there is no ambient randomness.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> labels) {
    std::uint64_t s = mix64(base);
    for (auto l : labels) s = mix64(s ^ mix64(l + 0x51ed270b1a24f90dULL));
    return s;
}

// mt19937_64 with a hand-rolled Box-Muller normal. std::normal_distribution
// is implementation-defined, which would break the bit-identical artifact
// contract across standard libraries.
class Rng {
   public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() {
        return (engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in (0, 1]
    double uniform_pos() {
        return ((engine_() >> 11) + 1) * 0x1.0p-53;
    }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u = uniform_pos();
        double v = uniform();
        double r = std::sqrt(-2.0 * std::log(u));
        double a = 6.283185307179586476925286766559 * v;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    void fill_normal(std::vector<double>& out) {
        for (auto& v : out) v = normal();
    }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> v(n);
        fill_normal(v);
        return v;
    }

   private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mimmu::num
