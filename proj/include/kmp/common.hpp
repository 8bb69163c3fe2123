#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace kmp {

// ----------------------------- errors -----------------------------

struct shape_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct contract_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ----------------------------- rng -----------------------------
//
// All randomness goes through Rng so runs reproduce across platforms.
// std::*_distribution output is implementation-defined, so uniform and
// normal draws are built from raw mt19937_64 bits instead.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : mix_(splitmix64(seed)), gen_(mix_) {}

    // independent stream for a named sub-component of the same run
    Rng fork(std::uint64_t stream_tag) const { return Rng(mix_ ^ splitmix64(stream_tag)); }

    std::uint64_t bits() { return gen_(); }

    // uniform on [0, 1), 53-bit resolution
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller without the cached spare, keeps stream position predictable
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // unbiased integer in [0, n)
    std::uint64_t randint(std::uint64_t n) {
        if (n == 0) throw contract_error("Rng::randint: n must be > 0");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[randint(i)]);
        }
    }

private:
    std::uint64_t mix_;
    std::mt19937_64 gen_;
};

}  // namespace kmp
