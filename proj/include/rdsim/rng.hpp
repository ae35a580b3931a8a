#pragma once

// Counter-based splittable RNG. The algorithm is pinned so ports reproduce
// sequences bit for bit:
//
//   mix(z):  z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;
//            z ^= z >> 27;  z *= 0x94D049BB133111EB;
//            z ^= z >> 31;  return z           (the SplitMix64 finalizer)
//   root        = mix(seed ^ (0xA0761D6478BD642F * (stream_index + 1)))
//   word(c)     = mix(root + 0x9E3779B97F4A7C15 * (c + 1))
//
// Distinct stream indices give statistically independent sequences; a draw at
// a given (seed, stream, counter) never depends on who else is drawing, so
// trial workers can consume streams concurrently without coordination.

#include <cmath>
#include <cstdint>

namespace rdsim {

namespace detail {

inline std::uint64_t splitmix_fin(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}

}  // namespace detail

struct RngStream {
    std::uint64_t root_seed = 0;
    std::uint64_t stream_index = 0;
    std::uint64_t counter = 0;

    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t seed, std::uint64_t stream)
        : root_seed(seed),
          stream_index(stream),
          root_(detail::splitmix_fin(seed ^ (0xA0761D6478BD642Full * (stream + 1)))) {}

    std::uint64_t next_u64() {
        return detail::splitmix_fin(root_ + 0x9E3779B97F4A7C15ull * (++counter));
    }

    // Uniform on [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a logarithm argument.
    double uniform_open() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller. Each draw consumes exactly two words and
    // the sine partner is discarded, so stream positions stay deterministic.
    double gaussian() {
        const double u1 = uniform_open();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    std::uint64_t root_ = 0;
};

}  // namespace rdsim
