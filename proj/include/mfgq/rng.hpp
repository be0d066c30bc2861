#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

namespace mfgq {

// Counter-based random streams. Every draw is a pure function of its key, so
// parallel consumers can pull from the same logical stream in any order and
// still produce identical results.

namespace detail {

inline constexpr std::uint64_t kMixSalt = 0x6a09e667f3bcc909ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

inline std::uint64_t hash_key(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t h = detail::mix64(a ^ detail::kMixSalt);
  h = detail::mix64(h ^ b);
  h = detail::mix64(h ^ c);
  return detail::mix64(h ^ d);
}

// Uniform in [0,1) from 53 high bits.
inline double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Uniform in (0,1); safe as a log() argument.
inline double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

inline double uniform_draw(std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0, std::uint64_t d = 0) {
  return to_unit(hash_key(a, b, c, d));
}

namespace detail {

// Acklam's rational approximation of the inverse normal CDF; relative error
// below 1.2e-9, which is far under the sampling noise of any batch size this
// library runs.
inline double inverse_normal_cdf(double p) {
  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                          -2.759285104469687e+02, 1.383577518672690e+02,
                          -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                          -1.556989798598866e+02, 6.680131188771972e+01,
                          -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                          -2.400758277161838e+00, -2.549732539343734e+00,
                          4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                          2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return x;
}

}  // namespace detail

// Standard normal keyed by (seed, stream, step): one hash through the inverse
// normal CDF.
inline double normal_draw(std::uint64_t seed, std::uint64_t stream,
                          std::uint64_t step) {
  return detail::inverse_normal_cdf(to_unit_open(hash_key(seed, stream, step, 0)));
}

// Exponential with the given rate; +inf when the rate vanishes.
inline double exponential_draw(double rate, std::uint64_t seed,
                               std::uint64_t stream, std::uint64_t step,
                               std::uint64_t channel) {
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(to_unit_open(hash_key(seed, stream, step, channel))) / rate;
}

// Convenience sequential stream for sampling-based diagnostics and tests.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : seed_(seed) {}

  double uniform() { return to_unit(hash_key(seed_, counter_++)); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double uniform_open() { return to_unit_open(hash_key(seed_, counter_++)); }
  double normal() { return detail::inverse_normal_cdf(uniform_open()); }
  std::uint64_t bits() { return hash_key(seed_, counter_++); }
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace mfgq
