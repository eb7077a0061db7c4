#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace walklab {

// Counter-based stream built on the splitmix64 finalizer. Every replicate
// gets its own stream derived from (master seed, replicate index), so results
// never depend on how replicates are distributed over worker threads, and any
// value of a stream can be addressed by absolute counter position.

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class RandomStream {
  public:
    explicit constexpr RandomStream(std::uint64_t key) : key_(key) {}

    // Stream for one replicate. The key is a mixed function of the index, so
    // neighbouring replicates do not see shifted copies of one sequence.
    static constexpr RandomStream for_replicate(std::uint64_t seed, std::uint64_t replicate) {
        return RandomStream(mix64(mix64(seed + golden_gamma) + replicate));
    }

    // Value at an absolute position, independent of the cursor.
    constexpr std::uint64_t at(std::uint64_t i) const { return mix64(key_ + (i + 1) * golden_gamma); }

    std::uint64_t next_u64() { return at(cursor_++); }

    static constexpr double to_u01(std::uint64_t v) {
        return static_cast<double>(v >> 11) * 0x1.0p-53;  // [0, 1)
    }

    double next_u01() { return to_u01(next_u64()); }

    // Decorrelated child stream; consumes one value from this stream.
    RandomStream derive() { return RandomStream(mix64(key_ ^ next_u64())); }

    constexpr std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
    std::uint64_t cursor_ = 0;
};

// Standard normal draw via Box-Muller; consumes exactly two stream values.
inline double next_gaussian(RandomStream& rs) {
    double u1 = (static_cast<double>(rs.next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = rs.next_u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace walklab
