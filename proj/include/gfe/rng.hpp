#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace gfe {

// Counter-based generator: a keyed bijection of a 256-bit counter block.
// Draw k of stream s under seed q is a pure function of (q, s, k), so any
// slice of work can be replayed in isolation and trials never share state.
struct Philox4x64 {
    static constexpr std::uint64_t mul_hi_const0 = 0xD2E7470EE14C6C93ull;
    static constexpr std::uint64_t mul_hi_const1 = 0xCA5A826395121157ull;
    static constexpr std::uint64_t weyl0 = 0x9E3779B97F4A7C15ull;
    static constexpr std::uint64_t weyl1 = 0xBB67AE8584CAA73Bull;

    static std::array<std::uint64_t, 4> block(std::uint64_t seed, std::uint64_t stream,
                                              std::uint64_t counter) {
        std::uint64_t c0 = counter, c1 = stream, c2 = seed, c3 = 0x1BD11BDAA9FC1A22ull;
        std::uint64_t k0 = seed, k1 = stream;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 p0 = static_cast<unsigned __int128>(mul_hi_const0) * c0;
            const unsigned __int128 p1 = static_cast<unsigned __int128>(mul_hi_const1) * c2;
            const std::uint64_t hi0 = static_cast<std::uint64_t>(p0 >> 64);
            const std::uint64_t lo0 = static_cast<std::uint64_t>(p0);
            const std::uint64_t hi1 = static_cast<std::uint64_t>(p1 >> 64);
            const std::uint64_t lo1 = static_cast<std::uint64_t>(p1);
            c0 = hi1 ^ c1 ^ k0;
            c1 = lo1;
            c2 = hi0 ^ c3 ^ k1;
            c3 = lo0;
            k0 += weyl0;
            k1 += weyl1;
        }
        return {c0, c1, c2, c3};
    }
};

// Sequential view over one (seed, stream) pair.  Uniform doubles have 53
// random bits; normals come from Box-Muller pairs, one cached.
class Rng {
  public:
    Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::uint64_t next_u64() {
        if (pos_ == 4) {
            buf_ = Philox4x64::block(seed_, stream_, counter_++);
            pos_ = 0;
        }
        return buf_[pos_++];
    }

    // Uniform on (0,1]; never 0, so log() is safe.
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Uniform on [0,1).
    double uniform_co() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Unbiased draw from {0, 1, ..., bound-1} via 128-bit multiply-shift
    // with rejection of the short tail.
    std::uint64_t below(std::uint64_t bound) {
        for (;;) {
            const std::uint64_t x = next_u64();
            const unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
            const std::uint64_t lo = static_cast<std::uint64_t>(m);
            if (lo >= bound || lo >= static_cast<std::uint64_t>(-bound) % bound)
                return static_cast<std::uint64_t>(m >> 64);
        }
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform_co();
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential() { return -std::log(uniform()); }

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 4> buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Stream-space layout.  The top byte tags the purpose so independent parts
// of an experiment can never collide; the low bits index within a purpose.
namespace streams {

inline constexpr std::uint64_t tag(std::uint64_t purpose, std::uint64_t index) {
    return (purpose << 48) | (index & ((1ull << 48) - 1));
}

inline constexpr std::uint64_t trial(std::uint64_t i) { return tag(1, i); }
inline constexpr std::uint64_t pilot(std::uint64_t i) { return tag(2, i); }
inline constexpr std::uint64_t bootstrap(std::uint64_t i) { return tag(3, i); }
inline constexpr std::uint64_t inner(std::uint64_t i) { return tag(4, i); }
inline constexpr std::uint64_t aux(std::uint64_t i) { return tag(5, i); }

// Companion stream for the independent second leg of a coupling.
inline constexpr std::uint64_t companion(std::uint64_t s) { return s ^ (1ull << 63); }

} // namespace streams

} // namespace gfe
