#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfgq/errors.hpp"

namespace mfgq {

// Output of the two-sided reflection on [0,L]: constrained path plus the two
// minimal pushing processes (lower, upper). All three share the input stamps.
struct ReflectedTriple {
  std::vector<double> phi;    // constrained path, in [0,L]
  std::vector<double> zeta1;  // cumulative lower pushing, nondecreasing from 0
  std::vector<double> zeta2;  // cumulative upper pushing, nondecreasing from 0
};

// One-step reflection state, for callers that fold a path incrementally
// (particle simulators) instead of materializing the whole input first.
struct ReflectStep {
  double phi;     // new constrained position
  double dzeta1;  // lower push applied on this step
  double dzeta2;  // upper push applied on this step
};

inline ReflectStep reflect_increment(double phi_prev, double increment, double L) {
  const double v = phi_prev + increment;
  if (v < 0.0) return {0.0, -v, 0.0};
  if (v > L) return {L, 0.0, v - L};
  return {v, 0.0, 0.0};
}

// Exact discrete two-sided Skorohod map for a sampled path interpreted as
// piecewise constant between stamps. A step that undershoots 0 is absorbed by
// the lower pushing term, an overshoot of L by the upper one; a single jump
// cannot trigger both, so per-step complementarity holds by construction.
inline ReflectedTriple reflect_path(std::span<const double> psi, double L) {
  if (psi.empty()) throw DomainError("reflect_path: empty input path");
  if (!(L > 0.0)) throw DomainError("reflect_path: L must be positive");
  for (std::size_t k = 0; k < psi.size(); ++k) {
    if (!std::isfinite(psi[k]))
      throw DomainError("reflect_path: non-finite sample at index " + std::to_string(k));
  }
  if (psi[0] < 0.0 || psi[0] > L)
    throw DomainError("reflect_path: starting point outside [0,L]");

  ReflectedTriple out;
  const std::size_t n = psi.size();
  out.phi.resize(n);
  out.zeta1.resize(n);
  out.zeta2.resize(n);
  out.phi[0] = psi[0];
  out.zeta1[0] = 0.0;
  out.zeta2[0] = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const ReflectStep s = reflect_increment(out.phi[k - 1], psi[k] - psi[k - 1], L);
    out.phi[k] = s.phi;
    out.zeta1[k] = out.zeta1[k - 1] + s.dzeta1;
    out.zeta2[k] = out.zeta2[k - 1] + s.dzeta2;
  }
  return out;
}

}  // namespace mfgq
