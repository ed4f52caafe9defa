#pragma once

#include <cstdint>

namespace tsf {

// xoshiro256++ with splitmix64 seed expansion (Blackman & Vigna).
// One integer seed fully determines the stream. All dropout and
// initialization randomness is drawn from explicitly passed instances,
// so a run is reproducible from its seed alone.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            word = splitmix64(x);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), n > 0. Lemire's multiply-shift reduction.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

  private:
    static std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
};

}  // namespace tsf
