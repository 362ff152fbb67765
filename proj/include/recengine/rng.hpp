#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

namespace rec {

// 64-bit FNV-1a. Used for content hashing and keyed tie-breaking, not security.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace detail {
inline void key_mix(std::uint64_t& h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    h = splitmix64(h);
}
inline void key_part(std::uint64_t& h, std::uint64_t v) { key_mix(h, v); }
inline void key_part(std::uint64_t& h, std::int64_t v) { key_mix(h, static_cast<std::uint64_t>(v)); }
inline void key_part(std::uint64_t& h, std::int32_t v) { key_mix(h, static_cast<std::uint64_t>(v)); }
inline void key_part(std::uint64_t& h, std::uint32_t v) { key_mix(h, v); }
inline void key_part(std::uint64_t& h, std::string_view s) { key_mix(h, fnv1a64(s)); }
inline void key_part(std::uint64_t& h, const std::string& s) { key_mix(h, fnv1a64(s)); }
inline void key_part(std::uint64_t& h, const char* s) { key_mix(h, fnv1a64(std::string_view(s))); }
} // namespace detail

// Stable hash of an arbitrary key tuple. Same inputs give the same value on
// every platform; used wherever the engine needs a deterministic tie-break or
// a pseudo-random value tied to identifiers rather than to draw order.
template <typename... Parts>
std::uint64_t keyed_hash(std::uint64_t seed, const Parts&... parts) {
    std::uint64_t h = seed ^ 0x6a09e667f3bcc908ULL;
    h = splitmix64(h);
    (detail::key_part(h, parts), ...);
    return splitmix64(h);
}

// Deterministic random stream. SplitMix64 core, explicit transforms for
// doubles and integers so output is identical across compilers and platforms
// (the std:: distributions make no such guarantee).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) { (void)splitmix64(state_); }

    template <typename... Parts>
    Rng(std::uint64_t seed, const Parts&... parts) : Rng(keyed_hash(seed, parts...)) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // Uniform in [0, 1), 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; the spare value is cached so draws come in a fixed sequence.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = next_double(); } while (u1 <= 0.0);
        u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Knuth inversion for small rates, normal approximation above 60 where the
    // product would underflow long before then anyway.
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda > 60.0) {
            const double x = lambda + std::sqrt(lambda) * normal();
            return x < 0.0 ? 0 : static_cast<int>(x + 0.5);
        }
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_double();
        } while (p > limit);
        return k - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace rec
