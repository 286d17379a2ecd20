#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sls {

// splitmix64: used for deriving independent seeds from a master seed.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Derive a stream seed from (master, tag). Not used for the per-edge seeds,
// which are the documented master^k contract; this is for internal streams
// (batch shuffling, glue init, per-round FL seeds) that must not collide
// with each other.
inline uint64_t derive_seed(uint64_t master, uint64_t tag) {
    return splitmix64(master ^ splitmix64(tag));
}

// Deterministic RNG. mt19937_64 has a standard-specified sequence and all
// real-valued mappings below are implemented here rather than with
// std::*_distribution (whose outputs are implementation-defined), so streams
// are reproducible bit-for-bit for a fixed seed.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform on [0, 1) with 53 random bits.
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Standard normal via Box-Muller. No spare caching: two draws per value.
    double normal() {
        const double u1 = 1.0 - u01(); // (0, 1]
        const double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Index below n. Modulo bias is irrelevant here; determinism is the contract.
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(next_u64() % n); }

    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = below(i);
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace sls
