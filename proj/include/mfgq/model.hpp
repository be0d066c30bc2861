#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfgq/errors.hpp"
#include "mfgq/measures.hpp"
#include "mfgq/rng.hpp"

namespace mfgq {

// Closed control interval [lo, hi]; lo == hi models an uncontrolled problem.
struct ControlSet {
  double lo = 0.0;
  double hi = 0.0;

  bool singleton() const { return lo == hi; }
  double width() const { return hi - lo; }
  double clamp(double u) const { return std::clamp(u, lo, hi); }
  bool contains(double u) const { return u >= lo && u <= hi; }
};

// Scalar statistics of a measure consumed by the cost functions. The
// configurable families depend on eta only through the psi-moments, so the
// solvers compute one summary per time layer instead of re-integrating per
// node.
struct MeasureSummary {
  double m1 = 0.0;  // <psi1, eta>
  double m2 = 0.0;  // <psi2, eta>
};

// Problem data: dynamics, rate split, costs, boundary penalties, control set.
// Function members consume MeasureSummary where the paper'd have a measure.
struct ModelSpec {
  std::string name;
  std::map<std::string, double> params;  // resolved parameter set

  double horizon = 0.0;     // T
  double buffer = 0.0;      // L
  double start = 0.0;       // x0 in [0,L]
  double lambda_hat = 0.0;  // nominal rate; mu_hat equals it (heavy traffic)
  double sigma = 0.0;       // sqrt(2*lambda_hat), kept exact
  ControlSet control_set;

  std::function<double(double t, double x, double u)> drift;                          // b
  std::function<double(double t, const MeasureSummary&, double x, double u)> arrival_shift;  // lambda
  std::function<double(double t, const MeasureSummary&, double x, double u)> service_shift;  // mu
  std::function<double(double t, const MeasureSummary&, double x)> running_cost_state;       // f0
  std::function<double(double t, double x, double u)> running_cost_control;                  // f1
  std::function<double(const MeasureSummary&, double x)> terminal_cost;                      // g
  std::function<double(double t, const MeasureSummary&)> empty_cost;                         // y
  std::function<double(double t, const MeasureSummary&)> rejection_cost;                     // r

  // Moment functionals of the configurable family.
  std::function<double(double t)> a1;
  std::function<double(double x)> psi1;
  std::function<double(double x)> psi2;
  double c1 = 0.0;
  double c2 = 0.0;

  // Closed-form minimizer of u -> f1(t,x,u) + b(t,x,u)*p, when available.
  std::function<double(double t, double x, double p)> control_argmin;
  bool rates_use_measure = false;  // true when lambda/mu read the summary

  MeasureSummary summarize(const MeasureView& eta) const {
    MeasureSummary s;
    for (std::size_t j = 0; j < eta.size(); ++j) {
      const double x = eta.node(j);
      const double w = eta.weights[j];
      s.m1 += w * psi1(x);
      s.m2 += w * psi2(x);
    }
    return s;
  }

  double running_cost(double t, const MeasureSummary& s, double x, double u) const {
    return running_cost_state(t, s, x) + running_cost_control(t, x, u);
  }
};

namespace detail {

// 257-point scan plus golden-section refinement, for families without a
// closed-form minimizer. Adequate for Lipschitz objectives on an interval.
inline double line_search_min(const ControlSet& set,
                              const std::function<double(double)>& objective) {
  if (set.singleton()) return set.lo;
  constexpr int kScan = 257;
  const double width = set.width();
  double best_u = set.lo;
  double best_v = objective(set.lo);
  for (int i = 1; i < kScan; ++i) {
    const double u = set.lo + width * static_cast<double>(i) / (kScan - 1);
    const double v = objective(u);
    if (v < best_v) {
      best_v = v;
      best_u = u;
    }
  }
  const double step = width / (kScan - 1);
  double a = std::max(set.lo, best_u - step);
  double b = std::min(set.hi, best_u + step);
  const double inv_phi = 0.6180339887498948482;
  const double tol = 1e-8 * width;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = objective(x2);
    }
  }
  const double mid = 0.5 * (a + b);
  return objective(mid) <= best_v ? mid : best_u;
}

}  // namespace detail

// Minimizer of the reduced objective u -> f1 + b*p (the measure-dependent f0
// is additive in u and cannot move the argmin).
inline double control_argmin_at(const ModelSpec& model, double t, double x, double p) {
  if (model.control_set.singleton()) return model.control_set.lo;
  if (model.control_argmin) return model.control_argmin(t, x, p);
  return detail::line_search_min(model.control_set, [&](double u) {
    return model.running_cost_control(t, x, u) + model.drift(t, x, u) * p;
  });
}

struct HamiltonianPoint {
  double u_star = 0.0;
  double h_star = 0.0;
};

inline HamiltonianPoint hamiltonian_argmin(const ModelSpec& model, double t,
                                           const MeasureSummary& s, double x,
                                           double p) {
  const double u = control_argmin_at(model, t, x, p);
  const double h = model.running_cost(t, s, x, u) + model.drift(t, x, u) * p;
  return {u, h};
}

// Public entry point taking the measure as a probability vector on the grid.
inline HamiltonianPoint hamiltonian_argmin(const ModelSpec& model, double t,
                                           const MeasureView& eta, double x,
                                           double p) {
  if (x < 0.0 || x > model.buffer)
    throw DomainError("hamiltonian_argmin: x outside [0,L]");
  require_probability_vector(eta.weights, "hamiltonian_argmin");
  return hamiltonian_argmin(model, t, model.summarize(eta), x, p);
}

// ---------------------------------------------------------------------------
// Built-in model families.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& builtin_model_names() {
  static const std::vector<std::string> names = {"linear-mf", "uncontrolled"};
  return names;
}

namespace detail {

inline std::string valid_names_message() {
  std::string msg;
  for (const auto& n : builtin_model_names()) {
    if (!msg.empty()) msg += ", ";
    msg += n;
  }
  return msg;
}

inline const std::vector<std::string>& builtin_param_keys() {
  static const std::vector<std::string> keys = {
      "T",  "L",  "x0",         "lambda_hat", "u_min",    "u_max",
      "a1", "c1", "c2",         "psi1_scale", "psi2_scale",
      "y",  "r",  "coupling"};
  return keys;
}

}  // namespace detail

// Builds a fully populated model.
//
// "linear-mf": drift b = u, control cost f1 = u^2/2 on U = [u_min, u_max],
// state cost f0 = a1*(c1 + psi1(x))*<psi1,eta>, terminal (c2 + psi2(x))*<psi2,eta>,
// constant boundary penalties. With nondecreasing psi and a1 >= 0 the
// monotonicity and regularity diagnostics pass by construction.
//
// "uncontrolled": singleton U = {0}, zero drift, and measure coupling off by
// default, so costs reduce to fixed functions of (t,x).
inline ModelSpec make_builtin_model(const std::string& name,
                                    const std::map<std::string, double>& overrides = {}) {
  const bool linear = name == "linear-mf";
  const bool uncontrolled = name == "uncontrolled";
  if (!linear && !uncontrolled)
    throw ConfigError("unknown model '" + name + "'; valid names: " +
                      detail::valid_names_message());

  std::map<std::string, double> p = {
      {"T", 1.0},          {"L", 1.0},   {"x0", 0.4}, {"lambda_hat", 0.5},
      {"u_min", -1.0},     {"u_max", 1.0},
      {"a1", 1.0},         {"c1", 0.5},  {"c2", 0.5},
      {"psi1_scale", 1.0}, {"psi2_scale", 1.0},
      {"y", 0.2},          {"r", 0.2},
      {"coupling", linear ? 1.0 : 0.0}};

  for (const auto& [key, value] : overrides) {
    if (!p.count(key))
      throw ValidationError("unknown model parameter '" + key + "'");
    if (uncontrolled && (key == "u_min" || key == "u_max"))
      throw ValidationError("parameter '" + key +
                            "' is not configurable for the uncontrolled model");
    p[key] = value;
  }

  auto require = [&](const char* key, bool ok) {
    if (!ok)
      throw ValidationError(std::string("model parameter '") + key +
                            "' has an inadmissible value");
  };
  require("T", p["T"] > 0.0);
  require("L", p["L"] > 0.0);
  require("lambda_hat", p["lambda_hat"] > 0.0);
  require("x0", p["x0"] >= 0.0 && p["x0"] <= p["L"]);
  require("u_min", p["u_min"] <= p["u_max"]);
  require("a1", p["a1"] >= 0.0);
  require("y", p["y"] >= 0.0);
  require("r", p["r"] >= 0.0);
  require("coupling", p["coupling"] == 0.0 || p["coupling"] == 1.0);

  ModelSpec m;
  m.name = name;
  m.params = p;
  m.horizon = p["T"];
  m.buffer = p["L"];
  m.start = p["x0"];
  m.lambda_hat = p["lambda_hat"];
  m.sigma = std::sqrt(2.0 * m.lambda_hat);
  m.control_set = uncontrolled ? ControlSet{0.0, 0.0}
                               : ControlSet{p["u_min"], p["u_max"]};

  const bool coupled = p["coupling"] == 1.0;
  const double a1 = p["a1"], c1 = p["c1"], c2 = p["c2"];
  const double s1 = p["psi1_scale"], s2 = p["psi2_scale"];
  const double y0 = p["y"], r0 = p["r"];

  m.a1 = [a1](double) { return a1; };
  m.psi1 = [s1](double x) { return s1 * x; };
  m.psi2 = [s2](double x) { return s2 * x; };
  m.c1 = c1;
  m.c2 = c2;

  if (uncontrolled) {
    m.drift = [](double, double, double) { return 0.0; };
    m.running_cost_control = [](double, double, double) { return 0.0; };
    m.control_argmin = [](double, double, double) { return 0.0; };
  } else {
    m.drift = [](double, double, double u) { return u; };
    m.running_cost_control = [](double, double, double u) { return 0.5 * u * u; };
    const ControlSet set = m.control_set;
    m.control_argmin = [set](double, double, double p) { return set.clamp(-p); };
  }

  // lambda - mu = b = u, split evenly between the two channels. The lambdas
  // capture plain scalars only; these run in per-step hot loops.
  m.arrival_shift = [](double, const MeasureSummary&, double, double u) {
    return 0.5 * u;
  };
  m.service_shift = [](double, const MeasureSummary&, double, double u) {
    return -0.5 * u;
  };
  m.rates_use_measure = false;

  m.running_cost_state = [a1, c1, s1, coupled](double, const MeasureSummary& s,
                                               double x) {
    return a1 * (c1 + s1 * x) * (coupled ? s.m1 : 1.0);
  };
  m.terminal_cost = [c2, s2, coupled](const MeasureSummary& s, double x) {
    return (c2 + s2 * x) * (coupled ? s.m2 : 1.0);
  };
  m.empty_cost = [y0](double, const MeasureSummary&) { return y0; };
  m.rejection_cost = [r0](double, const MeasureSummary&) { return r0; };
  return m;
}

// Per-time-layer model context against a fixed environment flow. Solvers and
// cost evaluators hoist these so the measure integrals run once per layer
// rather than once per node or per particle.
struct LayerContext {
  double t = 0.0;
  MeasureSummary summary;
  double y = 0.0;
  double r = 0.0;
};

inline std::vector<LayerContext> layer_contexts(const ModelSpec& model,
                                                const MeasureFlow& nu) {
  std::vector<LayerContext> layers(nu.grid.stamps());
  for (int m = 0; m <= nu.grid.M; ++m) {
    auto& ld = layers[m];
    ld.t = nu.grid.time(m);
    ld.summary = model.summarize(nu.view(m));
    ld.y = model.empty_cost(ld.t, ld.summary);
    ld.r = model.rejection_cost(ld.t, ld.summary);
  }
  return layers;
}

// ---------------------------------------------------------------------------
// Sampled bounds and the CFL-consistent grid factory.
// ---------------------------------------------------------------------------

struct ModelBounds {
  double drift_bound = 0.0;  // sampled sup |b|
  double f_sup = 0.0;
  double g_sup = 0.0;
  double y_sup = 0.0;
  double r_sup = 0.0;
};

inline ModelBounds estimate_bounds(const ModelSpec& model) {
  ModelBounds b;
  constexpr int kT = 9, kX = 17, kU = 9;
  // Unit-moment summary stands in for an arbitrary measure; the families are
  // affine in the moments, so endpoint summaries bound the range.
  const MeasureSummary lo{};
  MeasureSummary hi;
  hi.m1 = std::max(std::abs(model.psi1(0.0)), std::abs(model.psi1(model.buffer)));
  hi.m2 = std::max(std::abs(model.psi2(0.0)), std::abs(model.psi2(model.buffer)));
  for (int it = 0; it <= kT; ++it) {
    const double t = model.horizon * it / kT;
    for (const auto& s : {lo, hi}) {
      b.y_sup = std::max(b.y_sup, std::abs(model.empty_cost(t, s)));
      b.r_sup = std::max(b.r_sup, std::abs(model.rejection_cost(t, s)));
    }
    for (int ix = 0; ix <= kX; ++ix) {
      const double x = model.buffer * ix / kX;
      for (const auto& s : {lo, hi})
        b.g_sup = std::max(b.g_sup, std::abs(model.terminal_cost(s, x)));
      for (int iu = 0; iu <= kU; ++iu) {
        const double u = model.control_set.lo + model.control_set.width() * iu / kU;
        b.drift_bound = std::max(b.drift_bound, std::abs(model.drift(t, x, u)));
        for (const auto& s : {lo, hi})
          b.f_sup = std::max(b.f_sup, std::abs(model.running_cost(t, s, x, u)));
      }
    }
  }
  return b;
}

// Smallest M satisfying the CFL bound for the given J.
inline GridSpec make_cfl_grid(const ModelSpec& model, int J) {
  if (J < 2) throw ConfigError("make_cfl_grid: need at least two space cells");
  GridSpec g;
  g.J = J;
  g.L = model.buffer;
  g.T = model.horizon;
  const double dx = g.dx();
  const double c_b = estimate_bounds(model).drift_bound;
  const double dt_max = dx * dx / (model.sigma * model.sigma + c_b * dx);
  g.M = static_cast<int>(std::ceil(g.T / dt_max - 1e-12));
  g.M = std::max(g.M, 1);
  return g;
}

inline void require_cfl(const ModelSpec& model, const GridSpec& grid) {
  grid.require_cfl(model.sigma, estimate_bounds(model).drift_bound);
}

// ---------------------------------------------------------------------------
// Assumption diagnostics.
// ---------------------------------------------------------------------------

struct AssumptionViolation {
  std::string kind;  // "f0-monotonicity", "g-monotonicity", "drift-measure"
  double t = 0.0;
  std::vector<double> eta;
  std::vector<double> eta_prime;
  double value = 0.0;  // offending quantity as measured
};

struct AssumptionReport {
  std::map<std::string, double> lipschitz;  // e.g. "b.u" -> sampled quotient sup
  double lipschitz_overall = 0.0;
  bool argmin_unique = true;
  double worst_argmin_gap = 0.0;
  bool monotonicity_ok = true;
  bool drift_eta_free = true;
  std::vector<AssumptionViolation> violations;
};

namespace detail {

inline std::vector<double> random_probability_vector(SeedStream& rng, std::size_t n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& v : w) {
    v = -std::log(rng.uniform_open());
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Both Assumption-3.3 style integrals evaluate against the signed measure
// eta - eta'; this helper computes integral of diff(x) d(eta - eta').
inline double signed_integral(const std::function<double(double)>& diff,
                              std::span<const double> eta,
                              std::span<const double> eta_prime, double dx) {
  double acc = 0.0;
  for (std::size_t j = 0; j < eta.size(); ++j)
    acc += diff(static_cast<double>(j) * dx) * (eta[j] - eta_prime[j]);
  return acc;
}

}  // namespace detail

// Re-evaluates a reported witness; returns the violating quantity (negative for
// monotonicity witnesses, positive gap for drift-measure witnesses).
inline double reevaluate_violation(const ModelSpec& model,
                                   const AssumptionViolation& v, double dx) {
  const MeasureSummary s = model.summarize({v.eta, dx});
  const MeasureSummary sp = model.summarize({v.eta_prime, dx});
  if (v.kind == "f0-monotonicity") {
    return detail::signed_integral(
        [&](double x) {
          return model.running_cost_state(v.t, s, x) -
                 model.running_cost_state(v.t, sp, x);
        },
        v.eta, v.eta_prime, dx);
  }
  if (v.kind == "g-monotonicity") {
    return detail::signed_integral(
        [&](double x) {
          return model.terminal_cost(s, x) - model.terminal_cost(sp, x);
        },
        v.eta, v.eta_prime, dx);
  }
  if (v.kind == "drift-measure") {
    const double x = model.buffer * 0.5;
    const double u = model.control_set.clamp(0.0);
    const double b1 = model.arrival_shift(v.t, s, x, u) - model.service_shift(v.t, s, x, u);
    const double b2 =
        model.arrival_shift(v.t, sp, x, u) - model.service_shift(v.t, sp, x, u);
    return std::abs(b1 - b2);
  }
  throw DomainError("reevaluate_violation: unknown kind '" + v.kind + "'");
}

inline constexpr int kDiagnosticGridCells = 48;

// Randomized sweep over the model assumptions: Lipschitz difference quotients,
// argmin uniqueness, measure monotonicity of f0 and g, and measure-freeness of
// the drift. Findings are reported, never thrown.
inline AssumptionReport diagnose_assumptions(const ModelSpec& model,
                                             int sample_budget,
                                             std::uint64_t seed) {
  if (sample_budget < 1)
    throw DomainError("diagnose_assumptions: sample_budget must be >= 1");
  AssumptionReport report;
  SeedStream rng(seed);
  const double T = model.horizon, L = model.buffer;
  const double dx = L / kDiagnosticGridCells;
  const std::size_t nodes = kDiagnosticGridCells + 1;

  auto sample_summary = [&] {
    auto w = detail::random_probability_vector(rng, nodes);
    return std::pair<std::vector<double>, MeasureSummary>(
        w, model.summarize({w, dx}));
  };

  // Lipschitz quotients, one argument varied at a time.
  auto track = [&](const std::string& key, double quotient) {
    auto& slot = report.lipschitz[key];
    slot = std::max(slot, quotient);
    report.lipschitz_overall = std::max(report.lipschitz_overall, quotient);
  };
  for (int k = 0; k < sample_budget; ++k) {
    const double t = rng.uniform(0.0, T), t2 = rng.uniform(0.0, T);
    const double x = rng.uniform(0.0, L), x2 = rng.uniform(0.0, L);
    const double u = rng.uniform(model.control_set.lo, model.control_set.hi);
    const double u2 = rng.uniform(model.control_set.lo, model.control_set.hi);
    auto [we, s] = sample_summary();
    auto [we2, s2] = sample_summary();
    const double dw = w1(we, we2, dx);

    if (std::abs(t - t2) > 1e-9) {
      const double dt = std::abs(t - t2);
      track("b.t", std::abs(model.drift(t, x, u) - model.drift(t2, x, u)) / dt);
      track("f.t", std::abs(model.running_cost(t, s, x, u) -
                            model.running_cost(t2, s, x, u)) / dt);
      track("y.t", std::abs(model.empty_cost(t, s) - model.empty_cost(t2, s)) / dt);
      track("r.t", std::abs(model.rejection_cost(t, s) - model.rejection_cost(t2, s)) / dt);
    }
    if (std::abs(x - x2) > 1e-9) {
      const double dxx = std::abs(x - x2);
      track("b.x", std::abs(model.drift(t, x, u) - model.drift(t, x2, u)) / dxx);
      track("f.x", std::abs(model.running_cost(t, s, x, u) -
                            model.running_cost(t, s, x2, u)) / dxx);
      track("g.x", std::abs(model.terminal_cost(s, x) - model.terminal_cost(s, x2)) / dxx);
    }
    if (std::abs(u - u2) > 1e-9) {
      const double du = std::abs(u - u2);
      track("b.u", std::abs(model.drift(t, x, u) - model.drift(t, x, u2)) / du);
      track("f.u", std::abs(model.running_cost(t, s, x, u) -
                            model.running_cost(t, s, x, u2)) / du);
    }
    if (dw > 1e-9) {
      track("f.eta", std::abs(model.running_cost(t, s, x, u) -
                              model.running_cost(t, s2, x, u)) / dw);
      track("g.eta", std::abs(model.terminal_cost(s, x) - model.terminal_cost(s2, x)) / dw);
      track("y.eta", std::abs(model.empty_cost(t, s) - model.empty_cost(t, s2)) / dw);
      track("r.eta", std::abs(model.rejection_cost(t, s) - model.rejection_cost(t, s2)) / dw);
    }
  }

  // Argmin uniqueness: diameter of the near-minimal control set on a scan.
  if (!model.control_set.singleton()) {
    constexpr int kScan = 257;
    const double width = model.control_set.width();
    const int rounds = std::max(1, sample_budget / 8);
    for (int k = 0; k < rounds; ++k) {
      const double t = rng.uniform(0.0, T);
      const double x = rng.uniform(0.0, L);
      const double p = rng.uniform(-3.0, 3.0) * (1.0 + width);
      double best = std::numeric_limits<double>::infinity();
      std::vector<double> values(kScan);
      for (int i = 0; i < kScan; ++i) {
        const double u = model.control_set.lo + width * i / (kScan - 1);
        values[i] = model.running_cost_control(t, x, u) + model.drift(t, x, u) * p;
        best = std::min(best, values[i]);
      }
      double lo_u = model.control_set.hi, hi_u = model.control_set.lo;
      for (int i = 0; i < kScan; ++i) {
        if (values[i] <= best + 1e-9 * (1.0 + std::abs(best))) {
          const double u = model.control_set.lo + width * i / (kScan - 1);
          lo_u = std::min(lo_u, u);
          hi_u = std::max(hi_u, u);
        }
      }
      report.worst_argmin_gap = std::max(report.worst_argmin_gap, hi_u - lo_u);
    }
    // Neighbouring scan points can tie near a smooth minimum; anything wider
    // flags a flat or multimodal objective.
    report.argmin_unique = report.worst_argmin_gap <= 3.0 * width / (kScan - 1);
  }

  // Monotonicity of f0 and g in the measure argument.
  for (int k = 0; k < sample_budget; ++k) {
    const double t = rng.uniform(0.0, T);
    auto [eta, s] = sample_summary();
    auto [eta_p, sp] = sample_summary();
    const double f0_val = detail::signed_integral(
        [&](double x) {
          return model.running_cost_state(t, s, x) -
                 model.running_cost_state(t, sp, x);
        },
        eta, eta_p, dx);
    if (f0_val < -1e-12) {
      report.monotonicity_ok = false;
      report.violations.push_back({"f0-monotonicity", t, eta, eta_p, f0_val});
    }
    const double g_val = detail::signed_integral(
        [&](double x) {
          return model.terminal_cost(s, x) - model.terminal_cost(sp, x);
        },
        eta, eta_p, dx);
    if (g_val < -1e-12) {
      report.monotonicity_ok = false;
      report.violations.push_back({"g-monotonicity", t, eta, eta_p, g_val});
    }
  }

  // Drift freeness of the measure: lambda - mu must agree across measures.
  for (int k = 0; k < std::max(1, sample_budget / 4); ++k) {
    const double t = rng.uniform(0.0, T);
    const double x = rng.uniform(0.0, L);
    const double u = rng.uniform(model.control_set.lo, model.control_set.hi);
    auto [eta, s] = sample_summary();
    auto [eta_p, sp] = sample_summary();
    const double b1 = model.arrival_shift(t, s, x, u) - model.service_shift(t, s, x, u);
    const double b2 =
        model.arrival_shift(t, sp, x, u) - model.service_shift(t, sp, x, u);
    if (std::abs(b1 - b2) > 1e-12) {
      report.drift_eta_free = false;
      report.violations.push_back({"drift-measure", t, eta, eta_p, std::abs(b1 - b2)});
    }
  }
  return report;
}

}  // namespace mfgq
