#pragma once

#include <cmath>
#include <cstdint>

namespace xct {

// splitmix64 output function; also used to derive independent substreams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t hash_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return hash_seed(hash_seed(a, b), c);
}

// Small counter-based generator. Streams derived from (seed, index) pairs
// are independent, which keeps frame generation reproducible under any
// parallel decomposition: identical seed, identical output, in any order.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; safe as a log() argument
    double next_unit_open() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double next_normal() {
        // Box-Muller, one value per call (the spare is discarded to keep the
        // stream position a pure function of call count)
        const double u1 = next_unit_open();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

  private:
    std::uint64_t state_;
};

namespace detail {

// Hoermann's PTRD transformed-rejection sampler, valid for mean >= 10.
inline long poisson_ptrd(Rng& rng, double mu) {
    const double smu = std::sqrt(mu);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    const double log_mu = std::log(mu);
    for (;;) {
        double v = rng.next_unit_open();
        double u;
        if (v <= 0.86 * v_r) {
            // fast acceptance region
            u = v / v_r - 0.43;
            return static_cast<long>(std::floor((2.0 * a / (0.5 - std::abs(u)) + b) * u + mu + 0.445));
        }
        if (v >= v_r) {
            u = rng.next_unit() - 0.5;
        } else {
            u = v / v_r - 0.93;
            u = (u < 0 ? -0.5 : 0.5) - u;
            v = rng.next_unit_open() * v_r;
        }
        const double us = 0.5 - std::abs(u);
        if (us < 0.013 && v > us) continue;
        const double k = std::floor((2.0 * a / us + b) * u + mu + 0.445);
        v = v * inv_alpha / (a / (us * us) + b);
        if (k >= 10.0) {
            if (std::log(v * smu) <= (k + 0.5) * std::log(mu / k) - mu - 0.9189385332046727 +
                                         k - (1.0 / 12.0 - 1.0 / (360.0 * k * k)) / k)
                return static_cast<long>(k);
        } else if (k >= 0.0) {
            if (std::log(v) <= k * log_mu - mu - std::lgamma(k + 1.0)) return static_cast<long>(k);
        }
    }
}

} // namespace detail

// Poisson deviate; deterministic given the generator state. Knuth product
// method below mean 10, PTRD above.
inline double sample_poisson(Rng& rng, double mean) {
    if (mean <= 0.0) return 0.0;
    if (mean < 10.0) {
        const double limit = std::exp(-mean);
        long k = 0;
        double prod = rng.next_unit_open();
        while (prod > limit) {
            prod *= rng.next_unit_open();
            ++k;
        }
        return static_cast<double>(k);
    }
    return static_cast<double>(detail::poisson_ptrd(rng, mean));
}

} // namespace xct
