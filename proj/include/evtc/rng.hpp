#pragma once

#include <cstdint>
#include <string_view>

// Deterministic random utilities. All randomness in the project flows through
// either a keyed draw (stateless: the value depends only on seed, purpose and
// key, never on evaluation order) or a sequential Stream. Keyed draws give the
// common-uniform construction: the same vehicle sees the same uniform under
// every penetration rate, so EV sets are nested across rates by construction.

namespace evtc::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

constexpr std::uint64_t keyed_u64(std::uint64_t seed, std::string_view purpose, std::string_view key) {
    std::uint64_t h = fnv1a64(purpose, splitmix64(seed) ^ 0xcbf29ce484222325ULL);
    h = fnv1a64(key, h);
    return splitmix64(h);
}

constexpr double keyed_uniform(std::uint64_t seed, std::string_view purpose, std::string_view key) {
    return to_unit(keyed_u64(seed, purpose, key));
}

// Sequential generator for bulk synthesis. splitmix64 counter core.
class Stream {
public:
    explicit Stream(std::uint64_t seed, std::string_view domain = {})
        : state_(splitmix64(seed ^ fnv1a64(domain))) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64(state_);
    }

    double uniform() { return to_unit(next_u64()); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [lo, hi] inclusive. Modulo bias is irrelevant at the ranges
    // used here (synthetic-city parameters).
    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        return lo + static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    // Pick index by nonnegative weights; assumes sum > 0.
    std::size_t pick_weighted(const double* w, std::size_t n) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) total += w[i];
        double r = uniform() * total;
        for (std::size_t i = 0; i < n; ++i) {
            r -= w[i];
            if (r < 0) return i;
        }
        return n - 1;
    }

private:
    std::uint64_t state_;
};

} // namespace evtc::rng
