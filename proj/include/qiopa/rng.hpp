#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qiopa {

/// Counter-based pseudo-random generator.
///
/// Output word i of stream s under seed k is mix(k, s, i), where mix is a
/// fixed 64-bit avalanche function. The generator therefore has no hidden
/// state beyond the counter: the same (seed, stream) always reproduces the
/// same sequence, substreams obtained via split() are disjoint by key, and
/// values are identical across platforms (pure integer arithmetic).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        std::uint64_t z = mix(seed_ + 0x9e3779b97f4a7c15ULL * (counter_++));
        z ^= mix(stream_ ^ 0x1234567887654321ULL);
        return mix(z);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Independent generator for a disjoint substream.
    CounterRng split(std::uint64_t substream) const {
        return CounterRng(mix(seed_ ^ mix(substream + 0x0b4c1db1ULL)),
                          mix(stream_ + 0x9e3779b97f4a7c15ULL * (substream + 1)));
    }

    /// Index drawn from a cumulative distribution (cdf.back() ~ total mass).
    std::size_t sample_cdf(std::span<const double> cdf) {
        const double u = uniform01() * cdf.back();
        std::size_t lo = 0, hi = cdf.size() - 1;
        while (lo < hi) {
            const std::size_t mid = (lo + hi) / 2;
            if (cdf[mid] <= u) lo = mid + 1; else hi = mid;
        }
        return lo;
    }

private:
    // splitmix64 finalizer (Stafford mix 13)
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30; z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27; z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
};

/// Running cumulative sum, for sample_cdf.
inline std::vector<double> cumulative(std::span<const double> weights) {
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cdf[i] = acc;
    }
    return cdf;
}

} // namespace qiopa
