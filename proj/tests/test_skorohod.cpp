#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mfgq/rng.hpp"
#include "mfgq/skorohod.hpp"
#include "support/test_util.hpp"

using mfgq::reflect_path;
using mfgq::ReflectedTriple;

namespace {

void check_invariants(std::span<const double> psi, const ReflectedTriple& t, double L) {
  REQUIRE(t.phi.size() == psi.size());
  REQUIRE(t.zeta1[0] == 0.0);
  REQUIRE(t.zeta2[0] == 0.0);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    REQUIRE(t.phi[k] >= 0.0);
    REQUIRE(t.phi[k] <= L);
    if (k > 0) {
      REQUIRE(t.zeta1[k] >= t.zeta1[k - 1]);
      REQUIRE(t.zeta2[k] >= t.zeta2[k - 1]);
      // pushing only at the boundary just reached
      if (t.zeta1[k] > t.zeta1[k - 1]) REQUIRE(t.phi[k] == 0.0);
      if (t.zeta2[k] > t.zeta2[k - 1]) REQUIRE(t.phi[k] == L);
    }
    REQUIRE(std::abs(t.phi[k] - (psi[k] + t.zeta1[k] - t.zeta2[k])) < 1e-12);
  }
}

}  // namespace

TEST_CASE("constant path is untouched") {
  std::vector<double> psi(64, 0.37);
  auto t = reflect_path(psi, 1.0);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    REQUIRE(t.phi[k] == 0.37);
    REQUIRE(t.zeta1[k] == 0.0);
    REQUIRE(t.zeta2[k] == 0.0);
  }
}

TEST_CASE("downward ramp matches the one-sided closed form") {
  // psi(t) = 1 - t on [0,2] with L = 10: the upper boundary is never touched,
  // so phi = psi + running max of (-psi)^+ applies exactly.
  const double L = 10.0;
  const std::size_t n = 400;
  std::vector<double> psi(n + 1);
  for (std::size_t k = 0; k <= n; ++k) psi[k] = 1.0 - 2.0 * k / n;
  auto t = reflect_path(psi, L);
  double running = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    running = std::max(running, std::max(-psi[k], 0.0));
    REQUIRE(std::abs(t.phi[k] - (psi[k] + running)) < 1e-12);
    REQUIRE(std::abs(t.phi[k] - std::max(psi[k], 0.0)) < 1e-12);
    REQUIRE(t.zeta2[k] == 0.0);
  }
  REQUIRE(std::abs(t.zeta1.back() - 1.0) < 1e-12);
}

TEST_CASE("random walks agree with the case-analysis oracle") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const double L = 1.0;
    auto psi = testutil::random_walk_path(seed, 500, 0.5, 0.12);
    auto got = reflect_path(psi, L);
    auto want = testutil::skorohod_oracle(psi, L);
    for (std::size_t k = 0; k < psi.size(); ++k) {
      REQUIRE(std::abs(got.phi[k] - want.phi[k]) < 1e-12);
      REQUIRE(std::abs(got.zeta1[k] - want.zeta1[k]) < 1e-12);
      REQUIRE(std::abs(got.zeta2[k] - want.zeta2[k]) < 1e-12);
    }
    check_invariants(psi, got, L);
  }
}

TEST_CASE("empirical Lipschitz constant stays small") {
  // sum of component sup-distances over 10^3 random pairs, against the sup
  // distance of the inputs
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    auto a = testutil::random_walk_path(2 * seed + 1, 200, 0.4, 0.1);
    auto b = testutil::random_walk_path(2 * seed + 2, 200, 0.6, 0.1);
    auto ta = reflect_path(a, 1.0);
    auto tb = reflect_path(b, 1.0);
    double input = 0.0, output = 0.0;
    double dphi = 0.0, dz1 = 0.0, dz2 = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      input = std::max(input, std::abs(a[k] - b[k]));
      dphi = std::max(dphi, std::abs(ta.phi[k] - tb.phi[k]));
      dz1 = std::max(dz1, std::abs(ta.zeta1[k] - tb.zeta1[k]));
      dz2 = std::max(dz2, std::abs(ta.zeta2[k] - tb.zeta2[k]));
    }
    output = dphi + dz1 + dz2;
    if (input > 0.0) worst = std::max(worst, output / input);
  }
  REQUIRE(worst > 0.0);
  REQUIRE(worst <= 10.0);
}

TEST_CASE("refinement changes outputs by at most one-step modulus") {
  // fixed continuous path sampled at two resolutions
  auto sample = [](std::size_t n) {
    std::vector<double> psi(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = 3.0 * k / n;
      psi[k] = 0.5 + 0.9 * std::sin(2.7 * t) + 0.3 * t;
    }
    return psi;
  };
  const std::size_t coarse_n = 300;
  auto coarse = sample(coarse_n);
  auto fine = sample(2 * coarse_n);
  auto tc = reflect_path(coarse, 1.0);
  auto tf = reflect_path(fine, 1.0);

  double modulus = 0.0;
  for (std::size_t k = 1; k < coarse.size(); ++k)
    modulus = std::max(modulus, std::abs(coarse[k] - coarse[k - 1]));
  double gap = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k)
    gap = std::max(gap, std::abs(tc.phi[k] - tf.phi[2 * k]));
  REQUIRE(gap <= modulus + 1e-12);
}

TEST_CASE("power-of-two scaling is exactly equivariant") {
  auto psi = testutil::random_walk_path(99, 400, 0.25, 0.2);
  const double c = 4.0;
  std::vector<double> scaled(psi.size());
  for (std::size_t k = 0; k < psi.size(); ++k) scaled[k] = c * psi[k];
  auto base = reflect_path(psi, 1.0);
  auto big = reflect_path(scaled, c * 1.0);
  for (std::size_t k = 0; k < psi.size(); ++k) {
    REQUIRE(big.phi[k] == c * base.phi[k]);
    REQUIRE(big.zeta1[k] == c * base.zeta1[k]);
    REQUIRE(big.zeta2[k] == c * base.zeta2[k]);
  }
}

TEST_CASE("domain errors") {
  REQUIRE_THROWS_AS(reflect_path(std::vector<double>{1.5, 0.2}, 1.0), mfgq::DomainError);
  REQUIRE_THROWS_AS(reflect_path(std::vector<double>{-0.1}, 1.0), mfgq::DomainError);
  REQUIRE_THROWS_AS(reflect_path(std::vector<double>{0.1, std::nan("")}, 1.0),
                    mfgq::DomainError);
  REQUIRE_THROWS_AS(reflect_path(std::vector<double>{}, 1.0), mfgq::DomainError);
  REQUIRE_THROWS_AS(reflect_path(std::vector<double>{0.0}, 0.0), mfgq::DomainError);
}
