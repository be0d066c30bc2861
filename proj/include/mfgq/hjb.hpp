#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/measures.hpp"
#include "mfgq/model.hpp"
#include "mfgq/table.hpp"

namespace mfgq {

// Grid table of the value function, together with the environment flow it was
// solved against.
struct ValueField {
  GridSpec grid;
  Table values;     // (M+1) x (J+1)
  MeasureFlow env;  // the nu the sweep consumed

  double at_start(double x0) const { return values(0, grid.nearest_node(x0)); }
};

// Grid table of the optimal feedback control.
struct PolicyField {
  GridSpec grid;
  Table controls;  // (M+1) x (J+1), entries in U
};

namespace detail {

// Upwind Hamiltonian at one node. Candidate minimizers are evaluated under the
// forward and backward one-sided gradients; a candidate is kept when its drift
// sign matches the orientation (that choice is what keeps the explicit scheme
// monotone under the CFL bound). Forward wins ties. When neither candidate is
// self-consistent the minimum sits where the drift changes sign, so the
// orientation no longer matters and the sign-split objective
//   f1 + b^+ p_fwd - b^- p_bwd
// is minimized directly.
struct UpwindPoint {
  double u = 0.0;
  double advective = 0.0;  // f1(u) + b(u) * (chosen one-sided gradient)
};

inline UpwindPoint upwind_control(const ModelSpec& model, double t, double x,
                                  double p_fwd, double p_bwd) {
  if (model.control_set.singleton()) {
    const double u = model.control_set.lo;
    const double b = model.drift(t, x, u);
    const double p = b >= 0.0 ? p_fwd : p_bwd;
    return {u, model.running_cost_control(t, x, u) + b * p};
  }

  const double uf = control_argmin_at(model, t, x, p_fwd);
  const double bf = model.drift(t, x, uf);
  const double ub = control_argmin_at(model, t, x, p_bwd);
  const double bb = model.drift(t, x, ub);
  const bool fwd_ok = bf >= 0.0;
  const bool bwd_ok = bb <= 0.0;
  const double qf = model.running_cost_control(t, x, uf) + bf * p_fwd;
  const double qb = model.running_cost_control(t, x, ub) + bb * p_bwd;

  if (fwd_ok && bwd_ok) return qf <= qb ? UpwindPoint{uf, qf} : UpwindPoint{ub, qb};
  if (fwd_ok) return {uf, qf};
  if (bwd_ok) return {ub, qb};

  const double u = detail::line_search_min(model.control_set, [&](double v) {
    const double b = model.drift(t, x, v);
    return model.running_cost_control(t, x, v) +
           std::max(b, 0.0) * p_fwd + std::min(b, 0.0) * p_bwd;
  });
  const double b = model.drift(t, x, u);
  return {u, model.running_cost_control(t, x, u) + std::max(b, 0.0) * p_fwd +
                 std::min(b, 0.0) * p_bwd};
}

}  // namespace detail

// Explicit monotone backward sweep for the value function, with Neumann data
// D phi(t,0) = -y(t, nu(t)) and D phi(t,L) = r(t, nu(t)) imposed through
// second-order ghost nodes.
inline ValueField solve_hjb(const ModelSpec& model, const GridSpec& grid,
                            const MeasureFlow& nu) {
  if (!(nu.grid == grid)) throw DomainError("solve_hjb: flow grid mismatch");
  const ModelBounds bounds = estimate_bounds(model);
  grid.require_cfl(model.sigma, bounds.drift_bound);
  nu.validate();

  const int J = grid.J, M = grid.M;
  const double dx = grid.dx(), dt = grid.dt();
  const double half_sig2 = 0.5 * model.sigma * model.sigma;
  const auto layers = layer_contexts(model, nu);

  ValueField field{grid, Table(grid.stamps(), grid.nodes()), nu};
  Table& V = field.values;
  for (int j = 0; j <= J; ++j)
    V(M, j) = model.terminal_cost(layers[M].summary, grid.node(j));

  std::vector<double> h_row(grid.nodes());
  for (int m = M - 1; m >= 0; --m) {
    const auto& up = layers[m + 1];  // data at the layer being differenced
    auto vn = V.row(m + 1);
    const double ghost_lo = vn[1] + 2.0 * dx * up.y;   // V(m+1, -1)
    const double ghost_hi = vn[J - 1] + 2.0 * dx * up.r;  // V(m+1, J+1)
    for (int j = 0; j <= J; ++j) {
      const double x = grid.node(j);
      const double v_lo = j == 0 ? ghost_lo : vn[j - 1];
      const double v_hi = j == J ? ghost_hi : vn[j + 1];
      const double p_fwd = (v_hi - vn[j]) / dx;
      const double p_bwd = (vn[j] - v_lo) / dx;
      const auto pick = detail::upwind_control(model, up.t, x, p_fwd, p_bwd);
      const double h = model.running_cost_state(up.t, up.summary, x) + pick.advective;
      const double lap = (v_hi - 2.0 * vn[j] + v_lo) / (dx * dx);
      const double value = vn[j] + dt * (h + half_sig2 * lap);
      if (!std::isfinite(value))
        throw NumericError("solve_hjb: non-finite value at (m=" +
                           std::to_string(m) + ", j=" + std::to_string(j) + ")");
      V(m, j) = value;
    }
  }

  // Sanity net: |V| cannot exceed the costs times horizon plus a generous
  // multiple of the expected boundary pushing.
  const double push_scale =
      10.0 * (1.0 + bounds.drift_bound * grid.T + model.sigma * std::sqrt(grid.T));
  const double bound = (bounds.f_sup + (bounds.y_sup + bounds.r_sup) * push_scale) *
                           grid.T + bounds.g_sup + push_scale;
  for (std::size_t m = 0; m < V.rows(); ++m)
    for (double v : V.row(m))
      if (std::abs(v) > bound)
        throw NumericError("solve_hjb: value escaped the sanity bound");
  return field;
}

// Feedback policy from a solved value field. Interior nodes use the central
// difference of the same time layer; the boundary gradients are the Neumann
// data themselves, which is what the ghost construction reduces to there.
inline PolicyField extract_policy(const ModelSpec& model, const GridSpec& grid,
                                  const MeasureFlow& nu, const ValueField& V) {
  if (!(V.grid == grid) || !(nu.grid == grid))
    throw DomainError("extract_policy: grid mismatch");
  if (!(V.env == nu))
    throw DomainError("extract_policy: value field was solved against a different flow");

  const int J = grid.J;
  const double dx = grid.dx();
  const auto layers = layer_contexts(model, nu);
  PolicyField policy{grid, Table(grid.stamps(), grid.nodes())};
  for (int m = 0; m <= grid.M; ++m) {
    const auto& ld = layers[m];
    auto vm = V.values.row(m);
    for (int j = 0; j <= J; ++j) {
      double p;
      if (j == 0)
        p = -ld.y;
      else if (j == J)
        p = ld.r;
      else
        p = (vm[j + 1] - vm[j - 1]) / (2.0 * dx);
      policy.controls(m, j) = control_argmin_at(model, ld.t, grid.node(j), p);
    }
  }
  return policy;
}

}  // namespace mfgq
