#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/measures.hpp"
#include "mfgq/model.hpp"
#include "mfgq/rng.hpp"
#include "mfgq/table.hpp"

namespace mfgq {

// Configuration of one n-server prelimit system.
struct PrelimitConfig {
  int n = 0;
  double e_n = 0.0;       // scaling parameter, > 0
  int buffer_cells = 0;   // L^n = ceil(sqrt(e_n) * L)
  std::vector<int> initial_queues;        // length n, entries in [0, L^n]
  std::uint64_t seed = 0;                 // master seed
  std::vector<std::uint64_t> player_seeds;  // per-player stream keys
  bool record_martingales = false;  // keep compensated-jump samples
};

inline PrelimitConfig make_prelimit_config(const ModelSpec& model, int n, double e_n,
                                           std::uint64_t seed) {
  if (n < 1) throw DomainError("make_prelimit_config: n must be >= 1");
  if (!(e_n > 0.0)) throw DomainError("make_prelimit_config: e_n must be positive");
  PrelimitConfig cfg;
  cfg.n = n;
  cfg.e_n = e_n;
  cfg.seed = seed;
  const double root = std::sqrt(e_n);
  cfg.buffer_cells = static_cast<int>(std::ceil(root * model.buffer - 1e-12));
  const int q0 = std::clamp(static_cast<int>(std::lround(root * model.start)), 0,
                            cfg.buffer_cells);
  cfg.initial_queues.assign(n, q0);
  cfg.player_seeds.resize(n);
  for (int i = 0; i < n; ++i) cfg.player_seeds[i] = hash_key(seed, 0x9a7eu, i);
  return cfg;
}

// Decentralized per-player strategy for the event simulator. `act` sees only
// (t, own scaled queue); deviation strategies that read the empirical measure
// set `act_with_measure` instead, and only those are ever handed the measure.
struct PlayerPolicy {
  std::function<double(double t, double q)> act;
  std::function<double(double t, double q, const MeasureView&)> act_with_measure;
};

struct CostBreakdown {
  double running = 0.0;
  double terminal = 0.0;
  double lower_boundary = 0.0;
  double upper_boundary = 0.0;
  double total = 0.0;
};

// Full trace of one n-player run, sampled on the reporting grid.
struct SimRecord {
  GridSpec report_grid;
  int n = 0;
  double e_n = 0.0;
  int buffer_cells = 0;
  std::uint64_t seed = 0;

  Table scaled_paths;    // n x (M+1), entries in [0, L^n/sqrt(e_n)]
  Table lower_paths;     // scaled empty-buffer integrals, nondecreasing from 0
  Table upper_paths;     // scaled rejection integrals, nondecreasing from 0
  Table control_paths;   // control in force just after each stamp refresh
  MeasureFlow empirical; // nearest-node histogram per stamp
  std::vector<CostBreakdown> costs;  // against the empirical flow

  std::uint64_t event_count = 0;
  std::uint64_t clip_episodes = 0;   // rate evaluations clipped at zero
  double clipped_fraction = 0.0;
  bool clipping_warning = false;     // fraction above 10%: outside the regime

  // Optional reconstruction inputs: compensated jump martingale and the
  // integrated drift perturbation, both scaled.
  std::optional<Table> martingale_paths;
  std::optional<Table> drift_integral_paths;

  double scaled_buffer() const { return buffer_cells / std::sqrt(e_n); }
};

// Histogram of the scaled queue values binned to the nearest node of `grid`,
// one row per grid stamp. The record must be sampled on a refinement of the
// target stamps.
inline MeasureFlow empirical_flow(const SimRecord& record, const GridSpec& grid) {
  const GridSpec& rg = record.report_grid;
  if (rg.T != grid.T || rg.L != grid.L || rg.M % grid.M != 0)
    throw DomainError("empirical_flow: record stamps do not refine the grid");
  const int stride = rg.M / grid.M;
  MeasureFlow flow{grid, Table(grid.stamps(), grid.nodes())};
  const double share = 1.0 / record.n;
  for (int m = 0; m <= grid.M; ++m) {
    auto row = flow.at(m);
    for (int i = 0; i < record.n; ++i)
      row[grid.nearest_node(record.scaled_paths(i, m * stride))] += share;
  }
  return flow;
}

namespace detail {

inline CostBreakdown player_cost_with_layers(const ModelSpec& model,
                                             const SimRecord& record, int i,
                                             const std::vector<LayerContext>& layers) {
  const GridSpec& g = record.report_grid;
  const double dt = g.dt();
  CostBreakdown out;
  for (int m = 0; m < g.M; ++m) {
    const auto& ld = layers[m];
    const double q = std::clamp(record.scaled_paths(i, m), 0.0, g.L);
    out.running += model.running_cost(ld.t, ld.summary, q, record.control_paths(i, m)) * dt;
    out.lower_boundary +=
        ld.y * (record.lower_paths(i, m + 1) - record.lower_paths(i, m));
    out.upper_boundary +=
        ld.r * (record.upper_paths(i, m + 1) - record.upper_paths(i, m));
  }
  out.terminal = model.terminal_cost(layers[g.M].summary,
                                     std::clamp(record.scaled_paths(i, g.M), 0.0, g.L));
  out.total = out.running + out.terminal + out.lower_boundary + out.upper_boundary;
  return out;
}

}  // namespace detail

// Discretization of the per-player cost, with the measure argument supplied by
// `nu_for_cost` (normally the record's own empirical flow; a solved flow may
// be passed for diagnostics). Stamp-level rectangle rule against the stored
// paths and boundary increments.
inline CostBreakdown player_cost(const ModelSpec& model, const SimRecord& record,
                                 int i, const MeasureFlow& nu_for_cost) {
  if (i < 0 || i >= record.n) throw DomainError("player_cost: player index out of range");
  if (!(nu_for_cost.grid == record.report_grid))
    throw DomainError("player_cost: flow grid does not match the record");
  return detail::player_cost_with_layers(model, record, i,
                                         layer_contexts(model, nu_for_cost));
}

// Event simulation of the controlled birth-death system. Rates are frozen
// between refresh points (every event and every reporting stamp) and every
// player draws candidate event times from its own counter-based stream keyed
// by (player seed, refresh index, channel); the earliest candidate fires.
// Redrawing all clocks at a refresh is exact for exponential interarrivals,
// and per-player streams make the simulator symmetric under permutations of
// (initial state, seed) pairs.
inline SimRecord simulate_nplayer(const ModelSpec& model, const PrelimitConfig& cfg,
                                  const std::vector<PlayerPolicy>& strategies,
                                  const GridSpec& report_grid) {
  const int n = cfg.n;
  if (n < 1) throw DomainError("simulate_nplayer: empty player set");
  if (static_cast<int>(strategies.size()) != n)
    throw DomainError("simulate_nplayer: one strategy per player required");
  if (static_cast<int>(cfg.initial_queues.size()) != n ||
      static_cast<int>(cfg.player_seeds.size()) != n)
    throw DomainError("simulate_nplayer: config arrays must have length n");
  for (int q : cfg.initial_queues)
    if (q < 0 || q > cfg.buffer_cells)
      throw DomainError("simulate_nplayer: initial queue outside [0, L^n]");

  const double root = std::sqrt(cfg.e_n);
  const int Ln = cfg.buffer_cells;
  const double base_rate = model.lambda_hat * cfg.e_n;  // mu_hat == lambda_hat
  const GridSpec& g = report_grid;
  const double T = g.T;

  bool wants_measure = model.rates_use_measure;
  for (const auto& s : strategies) wants_measure = wants_measure || bool(s.act_with_measure);

  SimRecord rec;
  rec.report_grid = g;
  rec.n = n;
  rec.e_n = cfg.e_n;
  rec.buffer_cells = Ln;
  rec.seed = cfg.seed;
  rec.scaled_paths = Table(n, g.stamps());
  rec.lower_paths = Table(n, g.stamps());
  rec.upper_paths = Table(n, g.stamps());
  rec.control_paths = Table(n, g.stamps());
  if (cfg.record_martingales) {
    rec.martingale_paths = Table(n, g.stamps());
    rec.drift_integral_paths = Table(n, g.stamps());
  }

  std::vector<int> queue = cfg.initial_queues;
  std::vector<double> y_acc(n, 0.0), r_acc(n, 0.0);
  std::vector<double> mart(n, 0.0), drift_int(n, 0.0);
  std::vector<int> arrivals(n, 0), departures(n, 0);
  std::vector<double> comp(n, 0.0);  // integrated gated rates (arr - dep)
  std::vector<double> control(n, 0.0);
  std::vector<double> arr_rate(n, 0.0), dep_rate(n, 0.0);   // clipped, ungated
  std::vector<double> arr_gated(n, 0.0), dep_gated(n, 0.0);

  // Empirical-measure scratch, maintained only when some consumer reads it.
  std::vector<double> node_weights(g.nodes(), 0.0);
  auto rebuild_measure = [&] {
    std::fill(node_weights.begin(), node_weights.end(), 0.0);
    const double share = 1.0 / n;
    for (int i = 0; i < n; ++i)
      node_weights[g.nearest_node(queue[i] / root)] += share;
  };

  std::uint64_t refresh_idx = 0;
  std::uint64_t rate_evals = 0;

  auto refresh_rates = [&](double t) {
    MeasureView view{node_weights, g.dx()};
    MeasureSummary summary;
    if (wants_measure) {
      rebuild_measure();
      if (model.rates_use_measure) summary = model.summarize(view);
    }
    for (int i = 0; i < n; ++i) {
      const double q_scaled = queue[i] / root;
      const double q_clamped = std::clamp(q_scaled, 0.0, model.buffer);
      const double u = strategies[i].act_with_measure
                           ? strategies[i].act_with_measure(t, q_clamped, view)
                           : strategies[i].act(t, q_clamped);
      control[i] = model.control_set.clamp(u);
      const double raw_arr =
          base_rate + model.arrival_shift(t, summary, q_clamped, control[i]) * root;
      const double raw_dep =
          base_rate + model.service_shift(t, summary, q_clamped, control[i]) * root;
      rate_evals += 2;
      if (raw_arr < 0.0) ++rec.clip_episodes;
      if (raw_dep < 0.0) ++rec.clip_episodes;
      arr_rate[i] = std::max(raw_arr, 0.0);
      dep_rate[i] = std::max(raw_dep, 0.0);
      arr_gated[i] = queue[i] < Ln ? arr_rate[i] : 0.0;
      dep_gated[i] = queue[i] > 0 ? dep_rate[i] : 0.0;
    }
  };

  auto accumulate_segment = [&](double dt_seg) {
    if (dt_seg <= 0.0) return;
    for (int i = 0; i < n; ++i) {
      if (queue[i] == 0) y_acc[i] += dep_rate[i] * dt_seg / root;
      if (queue[i] == Ln) r_acc[i] += arr_rate[i] * dt_seg / root;
      if (cfg.record_martingales) {
        comp[i] += (arr_gated[i] - dep_gated[i]) * dt_seg;
        drift_int[i] += (arr_rate[i] - dep_rate[i]) * dt_seg / root;
      }
    }
  };

  auto record_stamp = [&](int m) {
    for (int i = 0; i < n; ++i) {
      rec.scaled_paths(i, m) = queue[i] / root;
      rec.lower_paths(i, m) = y_acc[i];
      rec.upper_paths(i, m) = r_acc[i];
      rec.control_paths(i, m) = control[i];
      if (cfg.record_martingales) {
        (*rec.martingale_paths)(i, m) =
            (static_cast<double>(arrivals[i] - departures[i]) - comp[i]) / root;
        (*rec.drift_integral_paths)(i, m) = drift_int[i];
      }
    }
  };

  double t = 0.0;
  int stamp = 0;
  refresh_rates(0.0);
  record_stamp(0);
  ++stamp;

  while (stamp <= g.M) {
    const double t_stamp = g.time(stamp);
    // earliest candidate event under the frozen rates
    double t_event = std::numeric_limits<double>::infinity();
    int who = -1, channel = -1;
    for (int i = 0; i < n; ++i) {
      const double ta =
          t + exponential_draw(arr_gated[i], cfg.player_seeds[i], refresh_idx, 0, 2);
      if (ta < t_event) {
        t_event = ta;
        who = i;
        channel = 0;
      }
      const double td =
          t + exponential_draw(dep_gated[i], cfg.player_seeds[i], refresh_idx, 0, 3);
      if (td < t_event) {
        t_event = td;
        who = i;
        channel = 1;
      }
    }
    ++refresh_idx;

    if (t_event < t_stamp) {
      accumulate_segment(t_event - t);
      t = t_event;
      queue[who] += channel == 0 ? 1 : -1;
      if (channel == 0)
        ++arrivals[who];
      else
        ++departures[who];
      ++rec.event_count;
      refresh_rates(t);
    } else {
      accumulate_segment(t_stamp - t);
      t = t_stamp;
      refresh_rates(t);
      record_stamp(stamp);
      ++stamp;
    }
  }
  (void)T;

  rec.clipped_fraction =
      rate_evals ? static_cast<double>(rec.clip_episodes) / rate_evals : 0.0;
  rec.clipping_warning = rec.clipped_fraction > 0.10;

  rec.empirical = empirical_flow(rec, g);
  const auto layers = layer_contexts(model, rec.empirical);
  rec.costs.resize(n);
  for (int i = 0; i < n; ++i)
    rec.costs[i] = detail::player_cost_with_layers(model, rec, i, layers);
  return rec;
}

}  // namespace mfgq
