#ifndef HPSIM_RNG_HPP
#define HPSIM_RNG_HPP

#include <cstdint>
#include <span>

namespace hpsim::rng {

// Purpose tags keep the logical stream spaces of the different consumers
// disjoint under one master seed.
enum class Purpose : uint64_t {
    PortfolioGen = 1,
    HistoryGen = 2,
    Scenario = 3,
    Bootstrap = 4,
    Test = 99,
};

inline uint64_t mix64(uint64_t z) {
    // splitmix64 finalizer (Steele, Lea, Flood 2014)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256++ stream whose state is derived from (master seed, purpose,
// index pair) by a counter-based splitmix64 chain. Two calls to derive()
// with the same arguments yield identical streams, independent of thread
// count or call order; this is what makes parallel runs bit-reproducible.
class Stream {
  public:
    static Stream derive(uint64_t master_seed, Purpose purpose, uint64_t index0,
                         uint64_t index1 = 0) {
        uint64_t key = mix64(master_seed + 0x9E3779B97F4A7C15ULL * (static_cast<uint64_t>(purpose) + 1));
        key = mix64(key ^ (index0 + 0xBF58476D1CE4E5B9ULL));
        key = mix64(key ^ (index1 + 0x94D049BB133111EBULL));
        Stream st;
        uint64_t sm = key;
        for (auto& w : st.state_) {
            sm += 0x9E3779B97F4A7C15ULL;
            w = mix64(sm);
        }
        return st;
    }

    uint64_t next_u64() {
        uint64_t* s = state_;
        const uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // Uniform on [0,1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0,1); safe under log() and quantile
    // transforms.
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t state_[4] = {1, 2, 3, 4};
};

// Standard normal quantile (Wichura's AS241, double precision).
double standard_normal_quantile(double p);

inline double standard_normal(Stream& s) { return standard_normal_quantile(s.uniform_open()); }

// Gamma(shape, scale=1): Marsaglia-Tsang for shape >= 1, boosted by
// U^(1/shape) below 1.
double gamma_draw(Stream& s, double shape);

// Poisson(lambda): Knuth product-of-uniforms below lambda = 10, Hormann's
// PTRS transformed rejection above.
int64_t poisson_draw(Stream& s, double lambda);

// Negative binomial with mean mu and size kappa (variance mu + mu^2/kappa),
// drawn as a Gamma(kappa, mu/kappa)-mixed Poisson.
int64_t negbin_draw(Stream& s, double mu, double kappa);

// Index k with probability cumulative[k] - cumulative[k-1]; cumulative must
// be nondecreasing with back() ~ 1. Returns the first k with u < cumulative[k].
int categorical_draw(Stream& s, std::span<const double> cumulative);

}  // namespace hpsim::rng

#endif  // HPSIM_RNG_HPP
