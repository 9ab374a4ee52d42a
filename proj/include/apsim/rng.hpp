#ifndef APSIM_RNG_HPP
#define APSIM_RNG_HPP

#include <cstdint>
#include <string_view>

namespace apsim {

// splitmix64 step; also used as a mixing/hash function.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
    return splitmix64(s);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

// Deterministic generator with explicit, platform-independent draw
// algorithms (std distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return splitmix64(state_); }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n]; n+1 need not divide 2^64 but the bias is
    // negligible for backoff-sized ranges.
    std::uint32_t below_inclusive(std::uint32_t n) {
        return static_cast<std::uint32_t>(next() % (static_cast<std::uint64_t>(n) + 1));
    }

    // Two independent N(0,1) draws folded into one (Box-Muller, first term).
    double normal01();

    double exponential(double mean);

private:
    std::uint64_t state_;
};

} // namespace apsim

#endif
