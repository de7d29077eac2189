#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "matcap/mat.hpp"

namespace matcap {

/// Seeded counter-based RNG (xoshiro256++ seeded via splitmix64). The engine and the
/// double/normal draws below are implemented here so the same (algorithm, seed) yields
/// the same sequence on every platform, independent of the standard library.
class SeededRng {
  public:
    explicit SeededRng(uint64_t seed) : seed_(seed) {
        uint64_t x = seed;
        for (auto& s : state_) {
            // splitmix64
            x += 0x9e3779b97f4a7c15ull;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
            s = z ^ (z >> 31);
        }
    }

    std::string algorithm() const { return "xoshiro256++"; }
    uint64_t seed() const { return seed_; }
    uint64_t position() const { return position_; }

    uint64_t next_u64() {
        ++position_;
        uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (lo, hi); resamples the (measure-zero) exact endpoints.
    double uniform_open(double lo, double hi) {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return lo + u * (hi - lo);
    }

    /// Uniform integer in {lo, ..., hi} inclusive.
    int uniform_int(int lo, int hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    /// Standard normal via the polar method.
    double normal() {
        if (cached_) {
            cached_ = false;
            return cache_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double f = std::sqrt(-2.0 * std::log(s) / s);
        cache_ = v * f;
        cached_ = true;
        return u * f;
    }

    Mat normal_mat(int rows, int cols) {
        Mat m(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = normal();
        return m;
    }

    /// Derive an independent deterministic stream (for per-trial parallel sweeps).
    SeededRng spawn(uint64_t stream_index) const {
        return SeededRng(seed_ ^ (0x5851f42d4c957f2dull * (stream_index + 1)));
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t seed_ = 0;
    uint64_t position_ = 0;
    std::array<uint64_t, 4> state_{};
    bool cached_ = false;
    double cache_ = 0.0;
};

}  // namespace matcap
