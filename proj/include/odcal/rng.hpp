#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

// Counter-based random number utilities. Every random draw in the library is
// keyed by an explicit (seed, entity) tuple so results never depend on call
// order or thread count.

namespace odcal::rng {

// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t combine(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// FNV-1a, for mixing string tags into keys.
inline std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class... Rest>
std::uint64_t key_of(std::uint64_t first, Rest... rest) {
    std::uint64_t k = mix64(first);
    ((k = combine(k, static_cast<std::uint64_t>(rest))), ...);
    return k;
}

// Deterministic stream of pseudo-random numbers derived from a key
// (splitmix64 sequence). Cheap to construct; make one per entity.
class Stream {
  public:
    explicit Stream(std::uint64_t key) : state_(key) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1].
    double next_double_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Standard normal via Box-Muller.
    double normal() {
        const double u1 = next_double_pos();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double exponential() { return -std::log(next_double_pos()); }

    // Exact Poisson draw (sum of unit exponentials), O(lambda).
    std::uint64_t poisson(double lambda) {
        if (!(lambda > 0.0)) return 0;
        double t = exponential();
        std::uint64_t n = 0;
        while (t <= lambda) {
            ++n;
            t += exponential();
        }
        return n;
    }

    // Index drawn with the given (normalized) probabilities.
    std::size_t categorical(std::span<const double> probs) {
        const double u = next_double();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

  private:
    std::uint64_t state_;
};

}  // namespace odcal::rng
