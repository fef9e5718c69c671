#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace medsim {

// Counter-based random numbers. Every draw is a pure function of its address
// (seed, purpose tag, three integer coordinates), so results never depend on
// evaluation order or thread schedule.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Purpose tags used across the library.
namespace tags {
inline constexpr std::uint64_t simulate = hash_tag("simulate");
inline constexpr std::uint64_t subsample = hash_tag("subsample");
inline constexpr std::uint64_t bootstrap = hash_tag("bootstrap");
inline constexpr std::uint64_t replicate = hash_tag("replicate");
inline constexpr std::uint64_t dataset = hash_tag("dataset");
inline constexpr std::uint64_t train = hash_tag("train");
}  // namespace tags

// Maps 64 random bits to the open interval (0, 1).
constexpr double bits_to_unit(std::uint64_t bits) noexcept {
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal quantile; accurate to a few ulps over (0, 1).
double normal_quantile(double u);

inline double logit(double u) { return std::log(u) - std::log1p(-u); }

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed = 0) : seed_(splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

    std::uint64_t seed_key() const noexcept { return seed_; }

    std::uint64_t bits(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) const noexcept {
        std::uint64_t h = splitmix64(seed_ ^ tag);
        h = splitmix64(h ^ a);
        h = splitmix64(h ^ (b * 0xd1b54a32d192ed03ULL));
        h = splitmix64(h ^ (c * 0xaef17502108ef2d9ULL));
        return h;
    }

    double uniform(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0,
                   std::uint64_t c = 0) const noexcept {
        return bits_to_unit(bits(tag, a, b, c));
    }

    double normal(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0,
                  std::uint64_t c = 0) const {
        return normal_quantile(uniform(tag, a, b, c));
    }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n, std::uint64_t tag, std::uint64_t a,
                        std::uint64_t b = 0, std::uint64_t c = 0) const noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(bits(tag, a, b, c)) * n) >> 64);
    }

    // An independent stream whose seed is derived from this one.
    RandomStream derive(std::uint64_t tag, std::uint64_t index) const noexcept {
        RandomStream s;
        s.seed_ = bits(tag, index, 0x5bd1e995ULL);
        return s;
    }

private:
    std::uint64_t seed_;
};

// Sequential generator over a RandomStream address space; satisfies
// UniformRandomBitGenerator for code that wants one.
class SequentialRng {
public:
    using result_type = std::uint64_t;

    SequentialRng(RandomStream stream, std::uint64_t tag) : stream_(stream), tag_(tag) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() noexcept { return stream_.bits(tag_, counter_++); }
    double uniform() noexcept { return bits_to_unit((*this)()); }
    double normal() { return normal_quantile(uniform()); }
    std::uint64_t index(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
    }

private:
    RandomStream stream_;
    std::uint64_t tag_;
    std::uint64_t counter_ = 0;
};

}  // namespace medsim
