#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/hjb.hpp"
#include "mfgq/measures.hpp"
#include "mfgq/model.hpp"
#include "mfgq/parallel.hpp"
#include "mfgq/rng.hpp"
#include "mfgq/skorohod.hpp"

namespace mfgq {

namespace detail {

inline std::uint64_t fnv1a(const void* bytes, std::size_t count,
                           std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < count; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t flow_checksum(const MeasureFlow& flow) {
  std::uint64_t h = fnv1a(&flow.grid.J, sizeof flow.grid.J);
  h = fnv1a(&flow.grid.M, sizeof flow.grid.M, h);
  const auto& data = flow.weights.data();
  return fnv1a(data.data(), data.size() * sizeof(double), h);
}

}  // namespace detail

// Mass-conserving explicit step of the transposed birth-death generator whose
// rates discretize the controlled reflected diffusion:
//   q(j -> j+1) = sigma^2/(2 dx^2) + b^+/dx,  q(j -> j-1) = sigma^2/(2 dx^2) + b^-/dx,
// with outward boundary rates removed. Under the CFL bound every transition
// coefficient is nonnegative, so rows stay probability vectors.
inline MeasureFlow propagate_fp(const ModelSpec& model, const GridSpec& grid,
                                const PolicyField& policy, const MeasureFlow& nu_env,
                                std::span<const double> eta0) {
  if (!(policy.grid == grid)) throw DomainError("propagate_fp: policy grid mismatch");
  if (!(nu_env.grid == grid)) throw DomainError("propagate_fp: env grid mismatch");
  if (eta0.size() != grid.nodes())
    throw DomainError("propagate_fp: eta0 does not match the grid");
  require_probability_vector(eta0, "propagate_fp");
  grid.require_cfl(model.sigma, estimate_bounds(model).drift_bound);

  const int J = grid.J;
  const double dx = grid.dx(), dt = grid.dt();
  const double diff_rate = 0.5 * model.sigma * model.sigma / (dx * dx);

  MeasureFlow flow{grid, Table(grid.stamps(), grid.nodes())};
  std::copy(eta0.begin(), eta0.end(), flow.at(0).begin());

  std::vector<double> up(grid.nodes()), dn(grid.nodes());
  for (int m = 0; m < grid.M; ++m) {
    const double t = grid.time(m);
    for (int j = 0; j <= J; ++j) {
      const double b = model.drift(t, grid.node(j), policy.controls(m, j));
      up[j] = j == J ? 0.0 : diff_rate + std::max(b, 0.0) / dx;
      dn[j] = j == 0 ? 0.0 : diff_rate + std::max(-b, 0.0) / dx;
    }
    auto prev = flow.at(m);
    auto next = flow.at(m + 1);
    for (int j = 0; j <= J; ++j) {
      double mass = prev[j] * (1.0 - dt * (up[j] + dn[j]));
      if (j > 0) mass += prev[j - 1] * dt * up[j - 1];
      if (j < J) mass += prev[j + 1] * dt * dn[j + 1];
      if (mass < -1e-14)
        throw NumericError("propagate_fp: negative weight at (m=" +
                           std::to_string(m + 1) + ", j=" + std::to_string(j) + ")");
      next[j] = std::max(mass, 0.0);
    }
    // Rescale away the accumulated roundoff so long pipelines keep row sums
    // at 1 to machine precision.
    const double sum = weight_sum(next);
    if (!(sum > 0.0)) throw NumericError("propagate_fp: row mass vanished");
    const double inv = 1.0 / sum;
    for (double& v : next) v *= inv;
  }
  return flow;
}

// One simulated batch of reflected controlled paths. Full per-step paths are
// kept only for the first kStoredPaths particles and on a subsampled stamp
// set; histograms and cost accumulators cover the whole batch exactly.
struct ParticleBatch {
  static constexpr std::size_t kStoredPaths = 512;
  static constexpr std::size_t kStoredStampTarget = 257;

  GridSpec grid;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::uint64_t env_checksum = 0;

  MeasureFlow histogram;  // nearest-node occupancy per stamp, normalized

  // Per-particle summaries over the full batch.
  std::vector<double> terminal_state;
  std::vector<double> lower_total;  // Y(T)
  std::vector<double> upper_total;  // R(T)
  std::vector<double> cost_running;
  std::vector<double> cost_terminal;
  std::vector<double> cost_lower;
  std::vector<double> cost_upper;

  // Subsampled trajectories for the stored prefix of the batch.
  std::vector<int> stored_stamps;  // indices into the time grid
  Table paths;                     // stored particles x stored stamps
  Table lower_pushing;             // Y at the stored stamps
  Table upper_pushing;             // R at the stored stamps

  double total_cost(std::size_t i) const {
    return cost_running[i] + cost_terminal[i] + cost_lower[i] + cost_upper[i];
  }
};

// Euler-Maruyama on the time grid with per-step two-sided reflection. Noise is
// a counter-based stream keyed by (seed, particle, step), so scheduling cannot
// change results. Policy lookup is nearest-node at the current layer.
inline ParticleBatch simulate_particles(const ModelSpec& model, const GridSpec& grid,
                                        const PolicyField& policy,
                                        const MeasureFlow& nu_env, double x0,
                                        std::size_t N, std::uint64_t seed) {
  if (N < 1) throw DomainError("simulate_particles: need at least one particle");
  if (!(policy.grid == grid) || !(nu_env.grid == grid))
    throw DomainError("simulate_particles: grid mismatch");
  if (x0 < 0.0 || x0 > grid.L)
    throw DomainError("simulate_particles: x0 outside [0,L]");

  const int J = grid.J, M = grid.M;
  const double dx = grid.dx(), dt = grid.dt(), L = grid.L;
  const double noise_scale = model.sigma * std::sqrt(dt);
  const auto layers = layer_contexts(model, nu_env);

  ParticleBatch batch;
  batch.grid = grid;
  batch.seed = seed;
  batch.count = N;
  batch.env_checksum = detail::flow_checksum(nu_env);
  batch.terminal_state.resize(N);
  batch.lower_total.resize(N);
  batch.upper_total.resize(N);
  batch.cost_running.resize(N);
  batch.cost_terminal.resize(N);
  batch.cost_lower.resize(N);
  batch.cost_upper.resize(N);

  const int stride =
      std::max(1, static_cast<int>((grid.stamps() + ParticleBatch::kStoredStampTarget - 1) /
                                   ParticleBatch::kStoredStampTarget));
  for (int m = 0; m <= M; m += stride) batch.stored_stamps.push_back(m);
  if (batch.stored_stamps.back() != M) batch.stored_stamps.push_back(M);
  const std::size_t stored = std::min<std::size_t>(N, ParticleBatch::kStoredPaths);
  batch.paths = Table(stored, batch.stored_stamps.size());
  batch.lower_pushing = Table(stored, batch.stored_stamps.size());
  batch.upper_pushing = Table(stored, batch.stored_stamps.size());
  std::vector<int> stamp_slot(grid.stamps(), -1);
  for (std::size_t s = 0; s < batch.stored_stamps.size(); ++s)
    stamp_slot[batch.stored_stamps[s]] = static_cast<int>(s);

  const unsigned workers = detail::worker_count(N);
  // Integer occupancy counts merge deterministically whatever the schedule.
  std::vector<std::vector<std::uint32_t>> counts(
      workers, std::vector<std::uint32_t>(grid.stamps() * grid.nodes(), 0));

  detail::parallel_chunks(N, [&](std::size_t begin, std::size_t end, unsigned worker) {
    auto& local = counts[worker];
    for (std::size_t i = begin; i < end; ++i) {
      double x = x0, y_acc = 0.0, r_acc = 0.0;
      double c_run = 0.0, c_lo = 0.0, c_hi = 0.0;
      const bool keep = i < stored;
      if (keep && stamp_slot[0] >= 0) {
        batch.paths(i, 0) = x;
        batch.lower_pushing(i, 0) = 0.0;
        batch.upper_pushing(i, 0) = 0.0;
      }
      local[0 * grid.nodes() + grid.nearest_node(x)]++;
      for (int m = 0; m < M; ++m) {
        const auto& ld = layers[m];
        const int j = grid.nearest_node(x);
        const double u = policy.controls(m, j);
        c_run += model.running_cost(ld.t, ld.summary, x, u) * dt;
        const double inc = model.drift(ld.t, x, u) * dt +
                           noise_scale * normal_draw(seed, i, static_cast<std::uint64_t>(m));
        const ReflectStep step = reflect_increment(x, inc, L);
        x = step.phi;
        y_acc += step.dzeta1;
        r_acc += step.dzeta2;
        c_lo += ld.y * step.dzeta1;
        c_hi += ld.r * step.dzeta2;
        local[(m + 1) * grid.nodes() + grid.nearest_node(x)]++;
        if (keep && stamp_slot[m + 1] >= 0) {
          const int s = stamp_slot[m + 1];
          batch.paths(i, s) = x;
          batch.lower_pushing(i, s) = y_acc;
          batch.upper_pushing(i, s) = r_acc;
        }
      }
      batch.terminal_state[i] = x;
      batch.lower_total[i] = y_acc;
      batch.upper_total[i] = r_acc;
      batch.cost_running[i] = c_run;
      batch.cost_terminal[i] = model.terminal_cost(layers[M].summary, x);
      batch.cost_lower[i] = c_lo;
      batch.cost_upper[i] = c_hi;
    }
  }, workers);

  batch.histogram = MeasureFlow{grid, Table(grid.stamps(), grid.nodes())};
  const double inv_n = 1.0 / static_cast<double>(N);
  for (std::size_t m = 0; m < grid.stamps(); ++m) {
    auto row = batch.histogram.at(static_cast<int>(m));
    for (std::size_t j = 0; j < grid.nodes(); ++j) {
      std::uint64_t total = 0;
      for (unsigned w = 0; w < workers; ++w) total += counts[w][m * grid.nodes() + j];
      row[j] = static_cast<double>(total) * inv_n;
    }
  }
  return batch;
}

struct MonteCarloCost {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Sample mean and standard error of the per-particle discrete cost
//   sum f dt + g(X_T) + sum y dY + sum r dR
// accumulated with left-endpoint weights during simulation.
inline MonteCarloCost evaluate_cost_mc(const ModelSpec& model, const ParticleBatch& batch,
                                       const MeasureFlow& nu_env) {
  (void)model;
  if (!(batch.grid == nu_env.grid))
    throw DomainError("evaluate_cost_mc: grid mismatch");
  if (detail::flow_checksum(nu_env) != batch.env_checksum)
    throw DomainError("evaluate_cost_mc: batch was simulated against a different flow");
  const std::size_t n = batch.count;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = batch.total_cost(i);
    const double delta = c - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (c - mean);
  }
  MonteCarloCost out;
  out.estimate = mean;
  if (n > 1)
    out.std_error = std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
  return out;
}

}  // namespace mfgq
