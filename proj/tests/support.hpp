#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "stfl/numerics.hpp"

namespace support {

inline std::mt19937_64 gen(std::uint64_t seed) { return std::mt19937_64(seed); }

inline stfl::Matrix random_symmetric(std::mt19937_64& g, std::size_t n, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    stfl::Matrix a(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r; c < n; ++c) {
            a(r, c) = a(c, r) = u(g);
        }
    }
    return a;
}

/// B B^T + shift I, strictly positive definite.
inline stfl::Matrix random_spd(std::mt19937_64& g, std::size_t n, double shift = 0.1) {
    std::normal_distribution<double> z(0.0, 1.0);
    stfl::Matrix b(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            b(r, c) = z(g);
        }
    }
    return b * b.transpose() + shift * stfl::Matrix::identity(n);
}

inline stfl::Vector random_vector(std::mt19937_64& g, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> z(0.0, scale);
    stfl::Vector v(n);
    for (auto& x : v) {
        x = z(g);
    }
    return v;
}

/// Roots of t^2 - (a + d) t + (ad - b^2) for [[a, b], [b, d]], larger first.
inline std::pair<double, double> quadratic_eigenvalues(double a, double b, double d) {
    const double mid = 0.5 * (a + d);
    const double rad = std::sqrt(0.25 * (a - d) * (a - d) + b * b);
    return {mid + rad, mid - rad};
}

inline double rel_diff(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

} // namespace support
