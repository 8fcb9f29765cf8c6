#pragma once

#include <cstdint>
#include <numbers>
#include <string_view>

#include "wmerge/numkit/grid.hpp"

namespace wmerge::numkit {

// xoshiro256++ seeded through splitmix64. Gaussian samples use the plain
// Box-Muller transform (two uniforms per sample, cosine branch only), so the
// full stream is defined by this header alone and reproduces bit-for-bit on
// any IEEE-754 platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& si : s_) si = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53 random mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller: sqrt(-2 ln u1) * cos(2 pi u2),
    // with u1 nudged away from 0.
    double gaussian() {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1 + 1e-300));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    Grid gaussian_grid(Eigen::Index rows, Eigen::Index cols) {
        Grid g(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = gaussian();
        return g;
    }

    Grid uniform_grid(Eigen::Index rows, Eigen::Index cols, double lo = 0.0, double hi = 1.0) {
        Grid g(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = uniform(lo, hi);
        return g;
    }

    // Independent child stream keyed by a purpose label (and optional index).
    // Used so dataset workers and samplers stay deterministic regardless of
    // evaluation order.
    static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                     std::uint64_t index = 0) {
        std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
        for (char ch : label) {
            h ^= static_cast<unsigned char>(ch);
            h *= 0x100000001b3ull;
        }
        h ^= index + 0x9e3779b97f4a7c15ull;
        return splitmix64(h);
    }

    Rng derive(std::string_view label, std::uint64_t index = 0) const {
        return Rng(derive_seed(seed_fingerprint(), label, index));
    }

private:
    std::uint64_t seed_fingerprint() const { return s_[0] ^ rotl(s_[1], 13) ^ rotl(s_[2], 29) ^ s_[3]; }

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t s_[4];
};

}  // namespace wmerge::numkit

namespace wmerge {
using numkit::Rng;
}
