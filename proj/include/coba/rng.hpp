#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace coba {

// Advances `state` and returns the next splitmix64 output. Used both as a
// seed scrambler and as the derivation step for named substreams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256** seeded through splitmix64. All sampling in the project goes
// through this class so runs are reproducible independent of the standard
// library's distribution implementations.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) {
        std::uint64_t st = seed;
        for (auto& w : state_) w = splitmix64(st);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased uniform draw in [0, n). n must be >= 1.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
};

// Derives an independent stream from one master seed. Components draw from
// named streams ("split", "init", "neighbor", "negative", ...) so changing
// one consumer never perturbs the draws of another; `index` gives per-epoch
// or per-worker substreams.
inline RandomStream derive_stream(std::uint64_t master_seed, std::string_view name,
                                  std::uint64_t index = 0) {
    std::uint64_t st = master_seed ^ fnv1a64(name);
    std::uint64_t mixed = splitmix64(st);
    mixed ^= index * 0xd1342543de82ef95ULL;
    return RandomStream(mixed);
}

template <class T>
void shuffle(std::vector<T>& v, RandomStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace coba
