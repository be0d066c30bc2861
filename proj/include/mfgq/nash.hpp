#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/mfg.hpp"
#include "mfgq/parallel.hpp"
#include "mfgq/queue_sim.hpp"

namespace mfgq {

// Decentralized strategy: a control rule (t, own scaled queue) -> u in U.
struct Strategy {
  enum class Kind { kEquilibrium, kConstant, kMyopic, kCustomTable };

  Kind kind = Kind::kConstant;
  std::string name;
  double constant_value = 0.0;
  GridSpec grid;
  std::shared_ptr<const PolicyField> table;  // equilibrium / custom tables
  std::function<double(double t, double x)> myopic_rule;
  ControlSet control_set;

  // Nearest time layer, nearest node, query clamped to [0,L].
  double act(double t, double q) const {
    switch (kind) {
      case Kind::kConstant:
        return constant_value;
      case Kind::kMyopic:
        return control_set.clamp(myopic_rule(t, std::clamp(q, 0.0, grid.L)));
      case Kind::kEquilibrium:
      case Kind::kCustomTable: {
        const int m = grid.nearest_stamp(t);
        const int j = grid.nearest_node(std::clamp(q, 0.0, grid.L));
        return table->controls(m, j);
      }
    }
    return constant_value;
  }

  PlayerPolicy player_policy() const {
    return {[self = *this](double t, double q) { return self.act(t, q); }, nullptr};
  }
};

// Feedback rule of the solved game: the policy table looked up at the
// player's own state only.
inline Strategy equilibrium_strategy(const MFGSolution& sol) {
  Strategy s;
  s.kind = Strategy::Kind::kEquilibrium;
  s.name = "equilibrium";
  s.grid = sol.policy.grid;
  s.table = std::make_shared<PolicyField>(sol.policy);
  return s;
}

inline Strategy constant_strategy(std::string name, double u) {
  Strategy s;
  s.kind = Strategy::Kind::kConstant;
  s.name = std::move(name);
  s.constant_value = u;
  return s;
}

// Greedy rule: minimize the instantaneous control cost, ignoring the
// continuation value (the p = 0 argmin).
inline Strategy myopic_strategy(const ModelSpec& model, const GridSpec& grid) {
  Strategy s;
  s.kind = Strategy::Kind::kMyopic;
  s.name = "myopic";
  s.grid = grid;
  s.control_set = model.control_set;
  s.myopic_rule = [model](double t, double x) {
    return control_argmin_at(model, t, x, 0.0);
  };
  return s;
}

// The shipped deviation library: the equilibrium itself as a null check, the
// two control extremes, and the myopic rule.
inline std::vector<Strategy> standard_deviations(const ModelSpec& model,
                                                 const MFGSolution& sol) {
  std::vector<Strategy> out;
  Strategy null = equilibrium_strategy(sol);
  null.name = "null";
  out.push_back(std::move(null));
  out.push_back(constant_strategy("const-min", model.control_set.lo));
  out.push_back(constant_strategy("const-max", model.control_set.hi));
  out.push_back(myopic_strategy(model, sol.policy.grid));
  return out;
}

inline std::vector<std::uint64_t> seed_ladder(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t k = 0; k < count; ++k) seeds[k] = hash_key(base, 0x1adde7u, k);
  return seeds;
}

struct NashRow {
  int n = 0;
  double e_n = 0.0;
  std::string deviation;
  double j_eq = 0.0;
  double j_dev = 0.0;
  double gap = 0.0;         // mean of paired differences J_dev - J_eq
  double stderr_gap = 0.0;  // standard error of the paired mean
  double eps = 0.0;         // 2 x joint half-width
  int reps = 0;
  bool violation = false;   // gap < -eps
};

struct NashReport {
  double value_at_start = 0.0;  // solved-game reference value
  std::vector<NashRow> rows;
};

struct ConvergenceRow {
  int n = 0;
  double e_n = 0.0;
  double value_gap = 0.0;  // mean |J^{n,1} - V(0,x0)|
  double stderr_value = 0.0;
  double flow_gap = 0.0;   // mean sup-W1 distance of the empirical flow
  double stderr_flow = 0.0;
  int reps = 0;
};

namespace detail {

struct MeanVar {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanVar mean_and_se(const std::vector<double>& xs) {
  MeanVar out;
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

inline PrelimitConfig seeded_config(const ModelSpec& model, const PrelimitConfig& base,
                                    std::uint64_t seed) {
  PrelimitConfig cfg = make_prelimit_config(model, base.n, base.e_n, seed);
  cfg.initial_queues = base.initial_queues;
  cfg.record_martingales = base.record_martingales;
  return cfg;
}

}  // namespace detail

// Paired-seed deviation experiment. Per replication, the all-equilibrium
// profile and each single-deviator profile run under the same seeds; player 1
// (index 0) is the canonical deviator. A gap is flagged a violation only when
// it undercuts -eps with eps twice the paired half-width.
inline NashReport deviation_gap(const ModelSpec& model, const MFGSolution& sol,
                                const PrelimitConfig& cfg,
                                const std::vector<Strategy>& deviations, int reps,
                                std::span<const std::uint64_t> seeds) {
  if (reps < 2) throw DomainError("deviation_gap: need at least two replications");
  if (static_cast<int>(seeds.size()) < reps)
    throw DomainError("deviation_gap: seed ladder shorter than reps");
  const GridSpec& grid = sol.policy.grid;
  const Strategy eq = equilibrium_strategy(sol);

  struct RepResult {
    double j_eq = 0.0;
    std::vector<double> j_dev;
  };
  std::vector<RepResult> results(reps);

  detail::parallel_chunks(reps, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t k = begin; k < end; ++k) {
      const PrelimitConfig run_cfg = detail::seeded_config(model, cfg, seeds[k]);
      std::vector<PlayerPolicy> profile(cfg.n, eq.player_policy());
      const SimRecord eq_rec = simulate_nplayer(model, run_cfg, profile, grid);
      results[k].j_eq = eq_rec.costs[0].total;
      results[k].j_dev.resize(deviations.size());
      for (std::size_t d = 0; d < deviations.size(); ++d) {
        profile[0] = deviations[d].player_policy();
        const SimRecord dev_rec = simulate_nplayer(model, run_cfg, profile, grid);
        results[k].j_dev[d] = dev_rec.costs[0].total;
        profile[0] = eq.player_policy();
      }
    }
  });

  NashReport report;
  report.value_at_start = sol.value_at_start;
  for (std::size_t d = 0; d < deviations.size(); ++d) {
    std::vector<double> eq_costs(reps), dev_costs(reps), diffs(reps);
    for (int k = 0; k < reps; ++k) {
      eq_costs[k] = results[k].j_eq;
      dev_costs[k] = results[k].j_dev[d];
      diffs[k] = dev_costs[k] - eq_costs[k];
    }
    const auto gap = detail::mean_and_se(diffs);
    NashRow row;
    row.n = cfg.n;
    row.e_n = cfg.e_n;
    row.deviation = deviations[d].name;
    row.j_eq = detail::mean_and_se(eq_costs).mean;
    row.j_dev = detail::mean_and_se(dev_costs).mean;
    row.gap = gap.mean;
    row.stderr_gap = gap.se;
    row.eps = 2.0 * gap.se;
    row.reps = reps;
    row.violation = row.gap < -row.eps;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// Prelimit-versus-game convergence table: for each n, the mean distance of
// player 1's realized cost from the solved value and the mean sup-W1 distance
// of the empirical flow from nu_bar, over a shared seed ladder.
inline std::vector<ConvergenceRow> convergence_study(
    const ModelSpec& model, const MFGSolution& sol, std::span<const int> n_list,
    const std::function<double(int)>& e_rule, int reps,
    std::span<const std::uint64_t> seeds) {
  if (reps < 1) throw DomainError("convergence_study: reps must be >= 1");
  if (static_cast<int>(seeds.size()) < reps)
    throw DomainError("convergence_study: seed ladder shorter than reps");
  for (std::size_t i = 0; i + 1 < n_list.size(); ++i)
    if (n_list[i] >= n_list[i + 1])
      throw DomainError("convergence_study: n_list must be ascending");

  const GridSpec& grid = sol.policy.grid;
  const Strategy eq = equilibrium_strategy(sol);
  std::vector<ConvergenceRow> rows;
  for (int n : n_list) {
    const double e_n = e_rule(n);
    std::vector<double> value_gaps(reps), flow_gaps(reps);
    detail::parallel_chunks(reps, [&](std::size_t begin, std::size_t end, unsigned) {
      for (std::size_t k = begin; k < end; ++k) {
        PrelimitConfig cfg = make_prelimit_config(model, n, e_n, seeds[k]);
        std::vector<PlayerPolicy> profile(n, eq.player_policy());
        const SimRecord rec = simulate_nplayer(model, cfg, profile, grid);
        value_gaps[k] = std::abs(rec.costs[0].total - sol.value_at_start);
        flow_gaps[k] = flow_distance(rec.empirical, sol.nu_bar);
      }
    });
    ConvergenceRow row;
    row.n = n;
    row.e_n = e_n;
    const auto v = detail::mean_and_se(value_gaps);
    const auto f = detail::mean_and_se(flow_gaps);
    row.value_gap = v.mean;
    row.stderr_value = v.se;
    row.flow_gap = f.mean;
    row.stderr_flow = f.se;
    row.reps = reps;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mfgq
