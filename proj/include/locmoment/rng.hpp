#pragma once

#include <cstdint>

namespace locmoment {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so realizations indexed by (stream, site) can be produced in any
// order, on any number of threads, with bit-identical results.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {}

    // k-th variate of this stream, uniform on [0,1).
    double uniform(std::uint64_t counter) const {
        return to_unit(hash(counter));
    }

    std::uint64_t bits(std::uint64_t counter) const { return hash(counter); }

    // Derive a child seed, e.g. one per Monte-Carlo realization or per sweep
    // index. Independent of evaluation order.
    static std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
        return mix(mix(seed ^ 0x9e3779b97f4a7c15ull) + index);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t hash(std::uint64_t counter) const {
        std::uint64_t h = mix(seed_);
        h = mix(h ^ mix(stream_ + 0x632be59bd9b4e019ull));
        return mix(h ^ counter);
    }

    static double to_unit(std::uint64_t bits) {
        // 53 significant bits -> [0,1)
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }
};

}  // namespace locmoment
