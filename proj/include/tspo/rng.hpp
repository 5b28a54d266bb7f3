#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace tspo {

// Deterministic random stream. Raw engine output is the standardized mt19937_64
// sequence; all transforms (uniform, gaussian, gumbel) are hand-rolled so that
// byte-reproducibility does not depend on the standard library's distribution
// implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derive an independent child stream; splitmix64 decorrelates nearby ids.
    Rng child(std::uint64_t stream_id) const {
        std::uint64_t z = seed_mix_ + stream_id * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return Rng(z ^ (z >> 31));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on (0, 1); never returns 0 so log(u) is always finite.
    double uniform01() {
        double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return u > 0.0 ? u : 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via Box-Muller (no cached spare; keeps state minimal).
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    double gumbel() { return -std::log(-std::log(uniform01())); }

    void save(std::ostream& os) const { os << engine_; }
    void load(std::istream& is) { is >> engine_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_ = engine_();  // consumed once; also salts child()
};

}  // namespace tspo
