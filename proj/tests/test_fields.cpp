#include <doctest.h>

#include <cmath>
#include <random>

#include "stresstomo/fields.hpp"
#include "stresstomo/inversion.hpp"
#include "stresstomo/io.hpp"

using namespace stresstomo;

namespace {

const Domain kBall = Domain::ball({0.0, 0.0, 0.0}, 1.0);

CovectorField smooth_covector(const Grid3& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BumpSpec spec;
  spec.profile = Bump::Profile::polynomial;
  spec.width_min = spec.width_max = 0.6;
  spec.center_radius = 0.2;
  return sample_bumps<3>(g, random_bumps(rng, spec, 3));
}

}  // namespace

TEST_CASE("grid layout and domain geometry") {
  const Grid3 g = Grid3::cube(16, 1.1, kBall);
  CHECK(g.node_count() == 16u * 16u * 16u);
  const auto ijk = g.unravel(g.index(3, 5, 7));
  CHECK(ijk == std::array<int, 3>{3, 5, 7});
  CHECK(g.position(0)[0] == doctest::Approx(-1.1));
  CHECK(g.upper()[2] == doctest::Approx(1.1));
  const auto chord = kBall.chord({0.0, 0.6, 0.0}, {1.0, 0.0, 0.0});
  REQUIRE(chord);
  CHECK(chord->second - chord->first == doctest::Approx(1.6));
  CHECK_FALSE(kBall.chord({0.0, 1.2, 0.0}, {1.0, 0.0, 0.0}));
  CHECK_THROWS_AS(Grid3::cube(16, 0.9, kBall), InvalidInput);
  const Domain box = Domain::box({-1.0, -0.5, -0.5}, {1.0, 0.5, 0.5});
  CHECK(box.diameter() == doctest::Approx(std::sqrt(6.0)));
  CHECK(box.signed_distance({0.0, 0.0, 0.0}) == doctest::Approx(-0.5));
}

TEST_CASE("spectral gradient of a polynomial bump matches the closed form") {
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  ScalarField f(g);
  CovectorField exact(g);
  // (1 - r^2/w^2)^8 with w = 0.9.
  const double w2 = 0.81;
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Vec3 x = g.position(n);
    const double q = 1.0 - dot(x, x) / w2;
    if (q <= 0.0) continue;
    f(n, 0) = std::pow(q, 8);
    for (int a = 0; a < 3; ++a) exact(n, a) = 8.0 * std::pow(q, 7) * (-2.0 * x[a] / w2);
  }
  CHECK(relative_error(gradient(f), exact) < 1e-4);
  CHECK(relative_error(gradient(f, DerivativeBackend::centered), exact) < 5e-2);
}

TEST_CASE("inner derivative is the symmetrized gradient") {
  const Grid3 g = Grid3::cube(24, 1.1, kBall);
  CovectorField v(g);
  // v = (y, 0, 0): dv has only the 12 component, equal to 1/2.
  for (std::size_t n = 0; n < g.node_count(); ++n) v(n, 0) = std::sin(g.position(n)[1]);
  const SymField2 dv = inner_derivative(v, DerivativeBackend::centered);
  const std::size_t mid = g.index(12, 12, 12);
  CHECK(dv(mid, 5) == doctest::Approx(0.5 * std::cos(g.position(mid)[1])).epsilon(1e-2));
  CHECK(dv(mid, 0) == doctest::Approx(0.0));
  CHECK(dv(mid, 3) == doctest::Approx(0.0));
}

TEST_CASE("solenoidal projection removes potentials and keeps divergence-free fields") {
  const Grid3 g = Grid3::cube(24, 1.1, kBall);
  FourierSymField2 dv = inner_derivative_fourier(smooth_covector(g, 1));
  double before = 0.0;
  for (const Complex& z : dv.values()) before = std::max(before, std::abs(z));
  solenoidal_project(dv);
  double after = 0.0;
  for (const Complex& z : dv.values()) after = std::max(after, std::abs(z));
  CHECK(after <= 1e-12 * before);

  std::mt19937_64 rng(2);
  BumpSpec spec;
  const SymField2 R = random_residual_stress(g, rng, spec);
  // R = inc(A) is solenoidal up to the cropping and masking that follow the padded evaluation.
  CHECK(relative_error(solenoidal_project(R), R) < 1e-2);
}

TEST_CASE("tangential projector is an orthogonal projector of rank two") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const Vec3 y{n(rng), n(rng), n(rng)};
    const Sym3 P = tangential_projector(y);
    CHECK(trace(P) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(contract(P, y, y) == doctest::Approx(0.0).scale(dot(y, y)));
    // P^2 = P, entry by entry.
    for (int j = 0; j < 3; ++j) {
      for (int l = 0; l < 3; ++l) {
        double s = 0.0;
        for (int m = 0; m < 3; ++m) s += sym_get(P, j, m) * sym_get(P, m, l);
        CHECK(s == doctest::Approx(sym_get(P, j, l)).scale(1.0));
      }
    }
  }
  CHECK(tangential_projector({0.0, 0.0, 0.0}) == Sym3{});
}

TEST_CASE("residual stress synthesis is divergence-free and supported inside the domain") {
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  std::mt19937_64 rng(4);
  BumpSpec spec;
  const SymField2 R = random_residual_stress(g, rng, spec);
  CHECK(R.max_abs() > 0.0);
  CHECK(relative_divergence(R) < 1e-3);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    if (!kBall.contains(g.position(n))) {
      for (int c = 0; c < 6; ++c) CHECK_EQ(R(n, c), 0.0);
    }
  }
  // Potentials reaching the boundary margin are refused.
  BumpSpec wide;
  wide.width_min = wide.width_max = 0.5;
  CHECK_THROWS_AS(random_residual_stress(g, rng, wide), InvalidInput);
}

TEST_CASE("field files round trip") {
  const Grid3 g = Grid3::cube(12, 1.2, Domain::box({-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}));
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  SymField2 u(g);
  for (double& x : u.values()) x = n(rng);
  const std::string path = "test_fields_roundtrip.stf";
  write_field(path, u);
  CHECK(field_file_rank(path) == FieldRank::symmetric);
  const SymField2 back = read_field<6>(path);
  CHECK(back.grid() == g);
  CHECK(relative_error(back, u) == 0.0);
  CHECK_THROWS_AS(read_field<1>(path), InvalidInput);
}

TEST_CASE("canonical hash ignores key order") {
  const auto a = nlohmann::json::parse(R"({"x": 1, "y": [1, 2]})");
  const auto b = nlohmann::json::parse(R"({"y": [1, 2], "x": 1})");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(nlohmann::json::parse(R"({"x": 2, "y": [1, 2]})")));
}
