#pragma once

// Deterministic per-stream random number generation. Each (seed, stream_id)
// pair identifies an independent xoshiro256++ stream whose state is derived
// through splitmix64, so streams never share state and reproduce bit-for-bit.

#include <cmath>
#include <cstdint>

namespace bmclt {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t sm = seed;
        sm ^= detail::splitmix64(stream_id) + 0x9E3779B97F4A7C15ULL;
        for (auto& word : state_) word = detail::splitmix64(sm);
        // xoshiro must not start from the all-zero state
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl64(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl64(state_[3], 45);
        return result;
    }

    // Uniform on (0, 1); never returns exactly 0 or 1.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the Marsaglia polar method, spare cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double factor = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * factor;
        has_spare_ = true;
        return u * factor;
    }

  private:
    std::uint64_t state_[4];
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace bmclt
