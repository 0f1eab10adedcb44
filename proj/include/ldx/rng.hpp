#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "ldx/errors.hpp"

namespace ldx {

// splitmix64 finalizer; used to derive well-separated seed streams from one
// root seed without correlated low bits.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b));
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix64(mix64(a, b), c);
}

// Deterministic RNG. Normal deviates use our own Box-Muller on top of the
// mt19937_64 word stream so byte-for-byte reproducibility does not depend on
// the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t u64() { return gen_(); }

    // Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::int64_t uniform_int(std::int64_t n) {
        if (n <= 0) throw ParamError("uniform_int: n must be positive");
        return static_cast<std::int64_t>(u64() % static_cast<std::uint64_t>(n));
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = static_cast<double>((u64() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Eigen::VectorXd normal_vec(Eigen::Index d) {
        Eigen::VectorXd v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = normal();
        return v;
    }

    // k distinct indices drawn from [0, n).
    std::vector<int> distinct_indices(int n, int k) {
        if (k > n) throw ParamError("distinct_indices: k exceeds n");
        // Partial Fisher-Yates over an index array.
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(uniform_int(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        return idx;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<std::int64_t>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ldx
