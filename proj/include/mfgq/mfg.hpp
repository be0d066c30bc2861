#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/forward.hpp"
#include "mfgq/hjb.hpp"
#include "mfgq/measures.hpp"
#include "mfgq/model.hpp"

namespace mfgq {

struct PhiResult {
  MeasureFlow flow;    // law of the optimally controlled state
  ValueField value;    // solved against the input flow
  PolicyField policy;  // feedback extracted from it
};

// Best-response map: solve the backward equation against nu, extract the
// feedback policy, and push the point mass at x0 forward under it.
inline PhiResult phi_map(const ModelSpec& model, const GridSpec& grid,
                         const MeasureFlow& nu) {
  ValueField value = solve_hjb(model, grid, nu);
  PolicyField policy = extract_policy(model, grid, nu, value);
  MeasureFlow flow =
      propagate_fp(model, grid, policy, nu, point_mass(grid, model.start));
  return {std::move(flow), std::move(value), std::move(policy)};
}

// Law of the zero-pressure dynamics (controls frozen at the p=0 argmin),
// used as the documented default initial guess.
inline MeasureFlow uncontrolled_flow(const ModelSpec& model, const GridSpec& grid) {
  PolicyField policy{grid, Table(grid.stamps(), grid.nodes())};
  for (int m = 0; m <= grid.M; ++m)
    for (int j = 0; j <= grid.J; ++j)
      policy.controls(m, j) = control_argmin_at(model, grid.time(m), grid.node(j), 0.0);
  const MeasureFlow env = constant_point_mass_flow(grid, model.start);
  return propagate_fp(model, grid, policy, env, point_mass(grid, model.start));
}

enum class MfgInitialGuess {
  kUncontrolledFlow,  // default: already Hoelder-1/2 with the zero-drift bound
  kFrozenStart,       // time-constant point mass at x0
};

inline const char* to_string(MfgInitialGuess g) {
  return g == MfgInitialGuess::kUncontrolledFlow ? "uncontrolled" : "frozen";
}

struct MfgOptions {
  double tol = 1e-3;
  int max_iters = 50;
  double omega = 0.5;  // damping in (0,1]
  MfgInitialGuess initial_guess = MfgInitialGuess::kUncontrolledFlow;
  bool record_iterate_holder = false;  // per-iterate Hoelder constants (slow)
};

struct MFGSolution {
  MeasureFlow nu_bar;
  ValueField value;       // solved against nu_bar
  PolicyField policy;     // feedback against nu_bar
  double value_at_start = 0.0;
  double residual = 0.0;  // flow_distance(nu_bar, Phi(nu_bar))
  int iterations = 0;
  double holder = 0.0;    // holder_constant(nu_bar)
  std::vector<double> residual_history;
  std::vector<double> iterate_holder;  // holder_constant of each Phi output
  std::string initial_guess;
  double tol = 0.0;
  double omega = 0.0;
};

// Damped Picard iteration on marginal flows:
//   nu_{k+1} = (1-omega) nu_k + omega Phi(nu_k),
// stopping when flow_distance(nu_k, Phi(nu_k)) <= tol. The returned triple is
// consistent: value and policy were solved against the returned nu_bar.
inline MFGSolution solve_mfg(const ModelSpec& model, const GridSpec& grid,
                             const MfgOptions& options = {}) {
  if (!(options.tol > 0.0)) throw DomainError("solve_mfg: tol must be positive");
  if (!(options.omega > 0.0 && options.omega <= 1.0))
    throw DomainError("solve_mfg: omega outside (0,1]");
  if (options.max_iters < 1) throw DomainError("solve_mfg: max_iters must be >= 1");
  {
    const auto diag = diagnose_assumptions(model, 64, 0x5eedu);
    if (!diag.argmin_unique)
      throw ConfigError("solve_mfg: Hamiltonian minimizer is not unique (gap " +
                        std::to_string(diag.worst_argmin_gap) + ")");
  }

  MeasureFlow nu = options.initial_guess == MfgInitialGuess::kUncontrolledFlow
                       ? uncontrolled_flow(model, grid)
                       : constant_point_mass_flow(grid, model.start);

  std::vector<double> history;
  std::vector<double> holders;
  for (int k = 0; k < options.max_iters; ++k) {
    PhiResult next = phi_map(model, grid, nu);
    const double residual = flow_distance(nu, next.flow);
    history.push_back(residual);
    if (options.record_iterate_holder)
      holders.push_back(holder_constant(next.flow));
    if (residual <= options.tol) {
      MFGSolution sol;
      sol.nu_bar = std::move(nu);
      sol.value = std::move(next.value);
      sol.policy = std::move(next.policy);
      sol.value_at_start = sol.value.at_start(model.start);
      sol.residual = residual;
      sol.iterations = k + 1;
      sol.holder = holder_constant(sol.nu_bar);
      sol.residual_history = std::move(history);
      sol.iterate_holder = std::move(holders);
      sol.initial_guess = to_string(options.initial_guess);
      sol.tol = options.tol;
      sol.omega = options.omega;
      return sol;
    }
    nu = mix_flows(nu, next.flow, options.omega);
  }
  throw ConvergenceError(
      "solve_mfg: no fixed point within " + std::to_string(options.max_iters) +
          " iterations (last residual " + std::to_string(history.back()) + ")",
      history);
}

// Distance-to-consistency of a candidate flow.
inline double residual(const ModelSpec& model, const GridSpec& grid,
                       const MeasureFlow& nu) {
  return flow_distance(nu, phi_map(model, grid, nu).flow);
}

}  // namespace mfgq
