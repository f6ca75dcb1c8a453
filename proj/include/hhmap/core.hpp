#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace hhmap {

// Points and tangent vectors live in model coordinates; unused slots stay 0.
using Vec = std::array<double, 3>;
using Point = Vec;
using Tangent = Vec;

inline constexpr double pi = std::numbers::pi;

struct usage_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct range_error : std::out_of_range {
    using std::out_of_range::out_of_range;
};

inline Vec operator+(const Vec& u, const Vec& v) { return {u[0] + v[0], u[1] + v[1], u[2] + v[2]}; }
inline Vec operator-(const Vec& u, const Vec& v) { return {u[0] - v[0], u[1] - v[1], u[2] - v[2]}; }
inline Vec operator*(double s, const Vec& v) { return {s * v[0], s * v[1], s * v[2]}; }
inline Vec operator*(const Vec& v, double s) { return s * v; }
inline Vec operator/(const Vec& v, double s) { return {v[0] / s, v[1] / s, v[2] / s}; }
inline double dot(const Vec& u, const Vec& v) { return u[0] * v[0] + u[1] * v[1] + u[2] * v[2]; }
inline double norm(const Vec& v) { return std::sqrt(dot(v, v)); }
inline double norm2(const Vec& v) { return dot(v, v); }
inline Vec cross(const Vec& u, const Vec& v) {
    return {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
}

inline double sqr(double x) { return x * x; }

// Euclidean angle between two coordinate vectors, accurate near 0 and pi.
inline double vec_angle(const Vec& u, const Vec& v) {
    return std::atan2(norm(cross(u, v)), dot(u, v));
}

using Rng = std::mt19937_64;

// splitmix64 finaliser, used to derive independent per-task seeds
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Uniform double in [0,1) from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

inline double normal01(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

}  // namespace hhmap
