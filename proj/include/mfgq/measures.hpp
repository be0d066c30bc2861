#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/parallel.hpp"
#include "mfgq/table.hpp"

namespace mfgq {

inline constexpr double kRowSumTolerance = 1e-12;
inline constexpr double kNormalizationTolerance = 1e-9;

// Uniform space-time lattice on [0,T] x [0,L]. Nodes x_j = j*dx for j=0..J,
// stamps t_m = m*dt for m=0..M.
struct GridSpec {
  int J = 0;  // space cells (J+1 nodes)
  int M = 0;  // time steps (M+1 stamps)
  double L = 0.0;
  double T = 0.0;

  double dx() const { return L / J; }
  double dt() const { return T / M; }
  double node(int j) const { return j * dx(); }
  double time(int m) const { return m * dt(); }
  std::size_t nodes() const { return static_cast<std::size_t>(J) + 1; }
  std::size_t stamps() const { return static_cast<std::size_t>(M) + 1; }

  int nearest_node(double x) const {
    const double clamped = std::clamp(x, 0.0, L);
    return std::clamp(static_cast<int>(std::lround(clamped / dx())), 0, J);
  }
  int nearest_stamp(double t) const {
    const double clamped = std::clamp(t, 0.0, T);
    return std::clamp(static_cast<int>(std::lround(clamped / dt())), 0, M);
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.J == b.J && a.M == b.M && a.L == b.L && a.T == b.T;
  }

  // Stability bound for the explicit schemes: dt <= dx^2 / (sigma^2 + c_B dx).
  void require_cfl(double sigma, double drift_bound) const {
    if (J <= 0 || M <= 0 || !(L > 0.0) || !(T > 0.0))
      throw ConfigError("GridSpec: J, M, L, T must all be positive");
    const double limit = dx() * dx() / (sigma * sigma + drift_bound * dx());
    if (dt() > limit * (1.0 + 1e-12))
      throw ConfigError("GridSpec: CFL violated, dt=" + std::to_string(dt()) +
                        " exceeds " + std::to_string(limit));
  }
};

// Read-only view of a probability vector living on grid nodes j*dx.
struct MeasureView {
  std::span<const double> weights;
  double dx = 0.0;

  std::size_t size() const { return weights.size(); }
  double node(std::size_t j) const { return static_cast<double>(j) * dx; }
};

inline double weight_sum(std::span<const double> w) {
  // Neumaier summation; row sums feed 1e-12 assertions downstream.
  double sum = 0.0, comp = 0.0;
  for (double v : w) {
    const double t = sum + v;
    comp += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline void require_probability_vector(std::span<const double> w, const char* who) {
  for (double v : w)
    if (!(v >= 0.0))
      throw DomainError(std::string(who) + ": negative or non-finite weight");
  if (std::abs(weight_sum(w) - 1.0) > kNormalizationTolerance)
    throw DomainError(std::string(who) + ": weights do not sum to 1");
}

// Marginal flow t -> nu(t): one probability row per time stamp.
struct MeasureFlow {
  GridSpec grid;
  Table weights;  // (M+1) x (J+1)

  std::span<const double> at(int m) const { return weights.row(m); }
  std::span<double> at(int m) { return weights.row(m); }
  MeasureView view(int m) const { return {weights.row(m), grid.dx()}; }

  void validate() const {
    if (weights.rows() != grid.stamps() || weights.cols() != grid.nodes())
      throw DomainError("MeasureFlow: table shape does not match grid");
    for (std::size_t m = 0; m < weights.rows(); ++m) {
      for (double v : weights.row(m))
        if (!(v >= 0.0)) throw DomainError("MeasureFlow: negative weight");
      if (std::abs(weight_sum(weights.row(m)) - 1.0) > kRowSumTolerance)
        throw DomainError("MeasureFlow: row " + std::to_string(m) +
                          " not normalized");
    }
  }

  friend bool operator==(const MeasureFlow& a, const MeasureFlow& b) {
    return a.grid == b.grid && a.weights == b.weights;
  }
};

// Point mass at the node nearest x0, one row per stamp.
inline MeasureFlow constant_point_mass_flow(const GridSpec& grid, double x0) {
  MeasureFlow flow{grid, Table(grid.stamps(), grid.nodes(), 0.0)};
  const int j = grid.nearest_node(x0);
  for (std::size_t m = 0; m < grid.stamps(); ++m) flow.weights(m, j) = 1.0;
  return flow;
}

inline std::vector<double> point_mass(const GridSpec& grid, double x0) {
  std::vector<double> eta(grid.nodes(), 0.0);
  eta[grid.nearest_node(x0)] = 1.0;
  return eta;
}

// Wasserstein-1 distance between two probability vectors on the same grid,
// via the exact 1-D formula: integral of |F - F'| over [0,L].
inline double w1(std::span<const double> eta, std::span<const double> eta_prime,
                 double dx) {
  if (eta.size() != eta_prime.size())
    throw DomainError("w1: measures live on different grids");
  double cdf_gap = 0.0, total = 0.0;
  for (std::size_t j = 0; j + 1 < eta.size(); ++j) {
    cdf_gap += eta[j] - eta_prime[j];
    total += std::abs(cdf_gap);
  }
  return total * dx;
}

inline double w1(const MeasureView& a, const MeasureView& b) {
  if (a.dx != b.dx) throw DomainError("w1: mismatched node spacing");
  return w1(a.weights, b.weights, a.dx);
}

// sup over stamps of the rowwise W1 distance.
inline double flow_distance(const MeasureFlow& nu, const MeasureFlow& nu_prime) {
  if (!(nu.grid == nu_prime.grid))
    throw DomainError("flow_distance: flows live on different grids");
  double worst = 0.0;
  for (std::size_t m = 0; m < nu.grid.stamps(); ++m)
    worst = std::max(worst, w1(nu.at(static_cast<int>(m)),
                               nu_prime.at(static_cast<int>(m)), nu.grid.dx()));
  return worst;
}

// Empirical Hoelder-1/2 constant of the flow:
//   max over stamp pairs s=t_k < t_m of W1(nu(t_m), nu(t_k)) / sqrt(t_m - t_k).
// Works on the precomputed CDF table; the pair scan is exhaustive.
inline double holder_constant(const MeasureFlow& nu) {
  const std::size_t rows = nu.grid.stamps();
  if (rows < 2) throw DomainError("holder_constant: need at least two stamps");
  const std::size_t cols = nu.grid.nodes() - 1;  // last CDF column is constant 1
  const double dx = nu.grid.dx();
  const double dt = nu.grid.dt();

  Table cdf(rows, cols == 0 ? 1 : cols, 0.0);
  for (std::size_t m = 0; m < rows; ++m) {
    double acc = 0.0;
    auto w = nu.weights.row(m);
    for (std::size_t j = 0; j < cols; ++j) {
      acc += w[j];
      cdf(m, j) = acc;
    }
  }

  std::vector<double> worst_per_worker(detail::worker_count(rows), 0.0);
  detail::parallel_chunks(rows, [&](std::size_t begin, std::size_t end, unsigned worker) {
    double worst = 0.0;
    for (std::size_t m = begin; m < end; ++m) {
      if (m == 0) continue;
      auto cm = cdf.row(m);
      for (std::size_t k = 0; k < m; ++k) {
        auto ck = cdf.row(k);
        double gap = 0.0;
        for (std::size_t j = 0; j < cols; ++j) gap += std::abs(cm[j] - ck[j]);
        const double ratio =
            gap * dx / std::sqrt(static_cast<double>(m - k) * dt);
        worst = std::max(worst, ratio);
      }
    }
    worst_per_worker[worker] = std::max(worst_per_worker[worker], worst);
  });
  double worst = 0.0;
  for (double v : worst_per_worker) worst = std::max(worst, v);
  return worst;
}

// Rowwise convex combination (1-omega)*nu + omega*nu_prime.
inline MeasureFlow mix_flows(const MeasureFlow& nu, const MeasureFlow& nu_prime,
                             double omega) {
  if (!(nu.grid == nu_prime.grid))
    throw DomainError("mix_flows: flows live on different grids");
  if (!(omega >= 0.0 && omega <= 1.0))
    throw DomainError("mix_flows: weight outside [0,1]");
  MeasureFlow out{nu.grid, Table(nu.weights.rows(), nu.weights.cols())};
  const double* a = nu.weights.data().data();
  const double* b = nu_prime.weights.data().data();
  double* o = out.weights.data().data();
  const std::size_t total = nu.weights.rows() * nu.weights.cols();
  for (std::size_t i = 0; i < total; ++i) o[i] = (1.0 - omega) * a[i] + omega * b[i];
  return out;
}

}  // namespace mfgq
