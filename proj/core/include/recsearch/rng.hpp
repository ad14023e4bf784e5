#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace recsearch {

// Small deterministic PRNG (splitmix64). Used everywhere we need behavior
// that is reproducible across platforms and standard library versions;
// std::uniform_int_distribution makes no such guarantee.
class SplitMix64 {
  public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Uniform double in [0, 1), 53 bits of entropy.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard Gumbel(0, 1) draw; the argument to log is never 0.
    double gumbel() {
        const double u = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
        return -std::log(-std::log(u));
    }

  private:
    std::uint64_t state_;
};

// Fisher-Yates shuffle driven by SplitMix64, deterministic given the rng state.
template <typename T>
void deterministic_shuffle(std::vector<T>& values, SplitMix64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(values[i - 1], values[j]);
    }
}

// Independent sampling streams derived from one master seed. Distinct tags
// keep e.g. critique sampling and revision sampling uncorrelated even when
// the (state_id, index) pair collides.
enum class SeedStream : std::uint64_t {
    InitialLists = 1,
    Critique = 2,
    Revision = 3,
    Shuffle = 4,
    Negatives = 5,
    World = 6,
    Turn = 7,
};

inline std::uint64_t mix_seed(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    SplitMix64 m(h);
    return m.next();
}

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                 std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = mix_seed(master, static_cast<std::uint64_t>(stream));
    h = mix_seed(h, a);
    return mix_seed(h, b);
}

// FNV-1a over bytes; used for content digests (cache keys, config digests).
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xCBF29CE484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace recsearch
