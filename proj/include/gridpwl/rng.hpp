#pragma once

#include <cstdint>
#include <random>

namespace gridpwl {

// splitmix64; used to derive independent engine seeds from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Deterministic uniform stream backed by std::mt19937_64 (fully specified by
// the standard, so cross-platform reproducible). Uniform doubles take the top
// 53 bits of a draw rather than going through std::uniform_real_distribution,
// whose output is implementation-defined.
class RngStream {
  public:
    explicit RngStream(std::uint64_t seed) : eng_(seed) {}

    // Per-index stream: one independent engine per sample.
    RngStream(std::uint64_t seed, std::uint64_t index)
        : eng_(splitmix64(seed ^ splitmix64(index + 1))) {}

    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    std::uint64_t next_u64() { return eng_(); }

    // Fisher-Yates index for shuffling: uniform integer in [0, bound) via
    // rejection-free modulo of a 64-bit draw (bias negligible at these sizes,
    // and exactly reproducible).
    std::size_t index_below(std::size_t bound) {
        return static_cast<std::size_t>(eng_() % bound);
    }

  private:
    std::mt19937_64 eng_;
};

}  // namespace gridpwl
