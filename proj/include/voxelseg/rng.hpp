#ifndef VOXELSEG_RNG_HPP
#define VOXELSEG_RNG_HPP

#include <cmath>
#include <cstdint>

namespace voxelseg {

// SplitMix64 (Steele, Lea & Flood 2014). Chosen because the whole generator
// state is a single u64, the output function is pure integer arithmetic, and
// the stream is therefore identical on every platform. The i-th output after
// seeding with s is mix64(s + (i+1)*GOLDEN), which also gives O(1) random
// access into the stream; dropout masks use that to stay order-independent
// under parallel generation.
class Rng {
public:
    static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

    std::uint64_t next_u64() {
        state_ += kGolden;
        return mix64(state_);
    }

    // i-th element of the stream seeded at `seed`, without advancing anything.
    static std::uint64_t at(std::uint64_t seed, std::uint64_t i) {
        return mix64(seed + (i + 1) * kGolden);
    }

    // uniform in [0, 1), 53 mantissa bits
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    static double to_unit_double(std::uint64_t bits) {
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    // uniform integer in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        // modulo bias is < 2^-53 for any n we ever pass; not worth rejection
        return next_u64() % n;
    }

    // standard normal via Box-Muller; consumes two draws, returns one
    double next_normal() {
        double u1 = 1.0 - next_double(); // (0, 1], keeps log finite
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // independent substream seed, e.g. one per dropout call
    std::uint64_t fork() { return next_u64(); }

private:
    std::uint64_t state_;
};

} // namespace voxelseg

#endif
