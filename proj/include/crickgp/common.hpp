#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace crickgp {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow.
inline double log_sum_exp(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// log(exp(a) - exp(b)) for a > b.
inline double log_diff_exp(double a, double b) {
    if (b == neg_inf) return a;
    return a + std::log1p(-std::exp(b - a));
}

/// Compensated (Kahan) accumulator for long sums of small terms.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double value() const { return s_; }

  private:
    double s_ = 0.0;
    double c_ = 0.0;
};

inline double normal_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.70710678118654752440);
}

/// Standard normal quantile function Phi^{-1}(p), p in (0,1).
inline double normal_quantile(double p) {
    static const boost::math::normal_distribution<double> unit_normal(0.0, 1.0);
    return boost::math::quantile(unit_normal, p);
}

inline double normal_log_pdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.91893853320467274178;  // log sqrt(2 pi)
}

/// Quantile of a sample by linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty; q in [0,1].
inline double sample_quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw DataError("sample_quantile: empty sample");
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

/// FNV-1a over arbitrary bytes; used to derive per-player RNG streams so
/// batch results do not depend on scheduling order or platform hashing.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
    for (const char ch : bytes) {
        h ^= static_cast<std::uint8_t>(ch);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 14695981039346656037ull;
    for (int i = 0; i < 8; ++i) {
        h ^= static_cast<std::uint8_t>(seed >> (8 * i));
        h *= 1099511628211ull;
    }
    h = fnv1a64(tag, h);
    return h == 0 ? 1 : h;  // mt19937_64 accepts 0, but keep streams distinguishable
}

using Rng = std::mt19937_64;

/// Reflect x into [0,1]; the map is an isometry on step proposals, so
/// Metropolis proposals using it stay symmetric.
inline double reflect_unit(double x) {
    x = std::fmod(x, 2.0);
    if (x < 0.0) x += 2.0;
    return x <= 1.0 ? x : 2.0 - x;
}

}  // namespace crickgp
