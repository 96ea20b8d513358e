#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace ctf {

// All randomness in the library flows from one root seed. Stages derive
// their own seed by hashing a stage tag, so adding a stage never shifts
// the streams of the others.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull ^ root;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    // splitmix64 finalizer, avoids near-zero states
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

// Thin wrapper over mt19937_64 with our own scalar conversions. The
// standard distributions are implementation-defined, so identical seeds
// could give different streams across libstdc++ versions; these helpers
// pin the mapping.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // modulo bias is irrelevant at our scales (n << 2^64)
        return n == 0 ? 0 : next_u64() % n;
    }

    int range(int lo, int hi) { // inclusive ends
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // standard normal via Box-Muller (one value per call, cache the pair)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    Rng fork(std::string_view tag) { return Rng(derive_seed(next_u64(), tag)); }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace ctf
