#ifndef KVTIER_RAND_UTIL_HPP
#define KVTIER_RAND_UTIL_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace kvtier {

// splitmix64 finalizer; used to derive independent per-layer / per-task
// seeds from one user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Unbiased integer in [0, bound). Hand-rolled rejection sampling so trace
// generation does not depend on the standard library's distribution
// implementation.
inline std::uint64_t bounded_u64(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

// Uniform double in [0, 1) with 53 bits of randomness.
inline double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform k-subset of `pool` via partial Fisher-Yates; consumes pool.
// Result order is the shuffle order, not sorted.
template <typename T>
std::vector<T> sample_without_replacement(std::mt19937_64& rng, std::vector<T>& pool, std::size_t k) {
    std::vector<T> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k && i < pool.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded_u64(rng, pool.size() - i));
        std::swap(pool[i], pool[j]);
        out.push_back(pool[i]);
    }
    return out;
}

} // namespace kvtier

#endif
