#pragma once

// Shared test-only helpers: independent oracles and small statistics utilities.
// Everything here must stay independent of the implementation paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mfgq/rng.hpp"

namespace testutil {

// Brute-force discrete Skorohod oracle: at every step, enumerate the three
// admissible resolutions (interior, stuck at 0, stuck at L), keep the ones
// satisfying identity + nonnegativity + complementarity, and demand that
// exactly one survives.
struct OracleTriple {
  std::vector<double> phi, zeta1, zeta2;
};

inline OracleTriple skorohod_oracle(std::span<const double> psi, double L) {
  OracleTriple out;
  out.phi.resize(psi.size());
  out.zeta1.resize(psi.size());
  out.zeta2.resize(psi.size());
  out.phi[0] = psi[0];
  for (std::size_t k = 1; k < psi.size(); ++k) {
    const double v = out.phi[k - 1] + (psi[k] - psi[k - 1]);
    struct Candidate {
      double phi, d1, d2;
    };
    std::vector<Candidate> admissible;
    // interior: no pushing
    if (v >= 0.0 && v <= L) admissible.push_back({v, 0.0, 0.0});
    // lower boundary: push up by exactly the undershoot
    if (-v > 0.0) admissible.push_back({0.0, -v, 0.0});
    // upper boundary: push down by exactly the overshoot
    if (v - L > 0.0) admissible.push_back({L, 0.0, v - L});
    if (admissible.size() != 1)
      throw std::logic_error("skorohod oracle: ambiguous step resolution");
    const auto& c = admissible.front();
    out.phi[k] = c.phi;
    out.zeta1[k] = out.zeta1[k - 1] + c.d1;
    out.zeta2[k] = out.zeta2[k - 1] + c.d2;
  }
  return out;
}

inline std::vector<double> random_walk_path(std::uint64_t seed, std::size_t steps,
                                            double start, double step_scale) {
  mfgq::SeedStream rng(seed);
  std::vector<double> psi(steps + 1);
  psi[0] = start;
  for (std::size_t k = 1; k <= steps; ++k)
    psi[k] = psi[k - 1] + step_scale * rng.normal();
  return psi;
}

inline std::vector<double> random_probability_vector(mfgq::SeedStream& rng,
                                                     std::size_t n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& v : w) {
    v = -std::log(rng.uniform_open());
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

// W1 between measures living on different uniform grids over the same [0,L],
// via CDF comparison on the merged breakpoint set.
inline double w1_cross_grid(std::span<const double> a, double dxa,
                            std::span<const double> b, double dxb) {
  std::vector<double> breaks;
  for (std::size_t j = 0; j < a.size(); ++j) breaks.push_back(j * dxa);
  for (std::size_t j = 0; j < b.size(); ++j) breaks.push_back(j * dxb);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  double total = 0.0;
  std::size_t ia = 0, ib = 0;
  double Fa = 0.0, Fb = 0.0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    while (ia < a.size() && ia * dxa <= breaks[k] + 1e-15) Fa += a[ia++];
    while (ib < b.size() && ib * dxb <= breaks[k] + 1e-15) Fb += b[ib++];
    total += std::abs(Fa - Fb) * (breaks[k + 1] - breaks[k]);
  }
  return total;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_se(std::span<const double> xs) {
  MeanSe out;
  const std::size_t n = xs.size();
  if (n == 0) return out;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = xs[i] - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (xs[i] - mean);
  }
  out.mean = mean;
  if (n > 1) out.se = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

}  // namespace testutil
