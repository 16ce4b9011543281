#include <doctest.h>

#include <cmath>
#include <random>

#include "stresstomo/material.hpp"

using namespace stresstomo;

namespace {

Sym3 random_sym(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Sym3 s;
  for (double& v : s) v = n(rng);
  return s;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return normalized({n(rng), n(rng), n(rng)});
}

PointParams random_point(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> nu(-0.4, 0.4);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  PointParams p;
  p.lambda = pos(rng);
  p.mu = pos(rng);
  p.rho = pos(rng);
  for (double& x : p.nu) x = nu(rng);
  return p;
}

}  // namespace

TEST_CASE("wave speeds") {
  PointParams p;
  p.lambda = 2.0;
  p.mu = 1.0;
  p.rho = 4.0;
  CHECK(p.vp() == doctest::Approx(1.0));
  CHECK(p.vs() == doctest::Approx(0.5));
}

TEST_CASE("compressional contraction identity holds for random draws") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const PointParams p = random_point(rng);
    const ContractionCheck c = contraction_identity_check(random_sym(rng), p, p.vp() * random_unit(rng));
    CHECK(c.relative() < 1e-12);
  }
  const PointParams p = random_point(rng);
  CHECK_THROWS_AS(contraction_identity_check(random_sym(rng), p, random_unit(rng) * (2.0 * p.vp())), InvalidInput);
}

TEST_CASE("closed-form rank-4 field agrees with the one assembled from c") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 20; ++k) {
    const PointParams p = random_point(rng);
    const Sym3 R = random_sym(rng);
    // The closed form in h = vs^-2 g equals the Euclidean assembly.
    const Rank4 a = f_from_R(R, p, p.vs());
    const Rank4 b = f_from_c(R, p);
    double diff = 0.0;
    for (std::size_t i = 0; i < 81; ++i) diff = std::max(diff, std::abs(a.v[i] - b.v[i]));
    CHECK(diff <= 1e-12 * a.max_abs());
  }
}

TEST_CASE("c is linear in R") {
  std::mt19937_64 rng(3);
  const PointParams p = random_point(rng);
  const Sym3 R1 = random_sym(rng);
  const Sym3 R2 = random_sym(rng);
  Sym3 sum;
  for (int i = 0; i < 6; ++i) sum[static_cast<std::size_t>(i)] = 2.0 * R1[static_cast<std::size_t>(i)] - R2[static_cast<std::size_t>(i)];
  const Rank4 a = c_from_R(R1, p);
  const Rank4 b = c_from_R(R2, p);
  const Rank4 c = c_from_R(sum, p);
  for (std::size_t i = 0; i < 81; ++i) CHECK(c.v[i] == doctest::Approx(2.0 * a.v[i] - b.v[i]).scale(1.0));
}

TEST_CASE("weights follow their definitions") {
  PointParams p;
  p.nu = {0.3, 0.3, 0.1, 0.1};
  CHECK(pwave_a(p) == doctest::Approx(0.25));
  CHECK(swave_a(p) == doctest::Approx(3.0));
  p.lambda = 2.0;
  p.mu = 1.0;
  p.rho = 4.0;  // vp = 1
  CHECK(pwave_b(p) == doctest::Approx(4.0 / 1.2));
}

TEST_CASE("non-vanishing conditions") {
  const auto m = MaterialParams::constants(1.0, 1.0, 1.0, {-2.0 / 3.0, 0.0, 0.0, 0.0});
  const ConditionReport r = check_pwave_conditions(m);
  CHECK_FALSE(r.get("nzero1").pass);
  CHECK(r.get("nzero2").pass);
  CHECK_FALSE(r.all_pass());
  CHECK_THROWS_AS(r.get("nope"), InvalidInput);
  const ConditionReport s = check_swave_conditions(MaterialParams::constants(1.0, 1.0, 1.0, {0.0, 0.0, 0.0, 0.0}));
  CHECK_FALSE(s.get("nu4_nonzero").pass);
}

TEST_CASE("the bound is exactly one at a = -1/6 and fails") {
  const auto m = MaterialParams::constants(1.0, 1.0, 1.0, {-1.0 / 3.0, 0.0, 0.0, 0.0});
  const VariableConditionReport r = check_variable_conditions(m, 2.0);
  CHECK(r.a0 == doctest::Approx(1.0 / 3.0));
  CHECK(r.bound == doctest::Approx(1.0));
  CHECK_FALSE(r.bound_pass);
  CHECK(r.symbol_positive);
  CHECK(r.alpha0 == 0.0);
}

TEST_CASE("an undefined compressional weight is indeterminate") {
  const auto m = MaterialParams::constants(1.0, 1.0, 1.0, {0.2, 0.0, -0.5, -0.5});
  const VariableConditionReport r = check_variable_conditions(m, 2.0);
  CHECK(r.indeterminate);
  CHECK_FALSE(r.bound_pass);
}

TEST_CASE("sampled parameters produce nonzero gradients of the weights") {
  const Grid3 g = Grid3::cube(16, 1.2, Domain::ball({0.0, 0.0, 0.0}, 1.0));
  // nu3 enters b, so a varying nu3 gives a nonzero alpha.
  ScalarField nu3(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) nu3(n, 0) = 0.1 * g.position(n)[0];
  MaterialParams m = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.0, 0.0, 0.0});
  m.nu[2] = ParamField::sampled(nu3);
  CHECK_FALSE(m.constants_mode());
  m.validate();
  const PWaveWeights w = pwave_weights(m, g);
  CHECK(w.alpha.max_abs() > 0.0);
  const VariableConditionReport r = check_variable_conditions(m, 2.0, &g);
  CHECK(r.alpha0 > 0.0);
  CHECK(r.a0 > 0.0);
  // In constants mode both gradients vanish identically.
  const PWaveWeights c = pwave_weights(MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.1, 0.1, 0.1}), g);
  CHECK(c.alpha.max_abs() == 0.0);
  CHECK(c.beta.max_abs() == 0.0);
}

TEST_CASE("invalid elastic moduli are rejected") {
  CHECK_THROWS_AS(MaterialParams::constants(1.0, -1.0, 1.0, {0.0, 0.0, 0.0, 0.0}).validate(), InvalidInput);
  CHECK_THROWS_AS(MaterialParams::constants(-3.0, 1.0, 1.0, {0.0, 0.0, 0.0, 0.0}).validate(), InvalidInput);
  CHECK_THROWS_AS(MaterialParams::constants(1.0, 1.0, 0.0, {0.0, 0.0, 0.0, 0.0}).validate(), InvalidInput);
}

TEST_CASE("constant parameters round trip through json") {
  const auto m = MaterialParams::constants(2.0, 1.5, 0.7, {0.1, -0.2, 0.3, 0.4});
  const MaterialParams back = MaterialParams::from_json(m.to_json());
  CHECK(back.point().lambda == 2.0);
  CHECK(back.point().nu[1] == -0.2);
}
