#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "stresstomo/fields.hpp"
#include "stresstomo/forward.hpp"

using namespace stresstomo;

namespace {

const Domain kBall = Domain::ball({0.0, 0.0, 0.0}, 1.0);

template <int NC>
Field<NC> random_field(const Grid3& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Field<NC> f(g);
  for (double& x : f.values()) x = n(rng);
  return f;
}

Sinogram random_like(const Sinogram& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Sinogram out = s;
  for (double& x : out.values) x = n(rng);
  return out;
}

double sino_dot(const Sinogram& a, const Sinogram& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

SymField2 stress(const Grid3& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BumpSpec spec;
  return random_residual_stress(g, rng, spec);
}

}  // namespace

TEST_CASE("ray adjoints satisfy the inner-product identity") {
  const Grid3 g = Grid3::cube(12, 1.2, kBall);
  const DenseSphereFamily fam(g, 6, 6);
  const SymField2 u = random_field<6>(g, 1);

  const Sinogram Iu = longitudinal_transform(u, fam);
  const Sinogram d = random_like(Iu, 2);
  SymField2 back(g);
  longitudinal_adjoint(d, fam, back);
  CHECK(sino_dot(Iu, d) == doctest::Approx(stored_dot(u, back)).epsilon(1e-12));

  const Sinogram Ku = truncated_transform(u, fam);
  const Sinogram k = random_like(Ku, 3);
  SymField2 kback(g);
  truncated_adjoint(k, fam, kback);
  CHECK(sino_dot(Ku, k) == doctest::Approx(stored_dot(u, kback)).epsilon(1e-12));

  const ScalarField f = random_field<1>(g, 4);
  const Sinogram sf = scalar_transform(f, fam);
  const Sinogram sd = random_like(sf, 5);
  ScalarField sback(g);
  scalar_adjoint(sd, fam, sback);
  CHECK(sino_dot(sf, sd) == doctest::Approx(stored_dot(f, sback)).epsilon(1e-12));
}

TEST_CASE("serial and parallel kernels agree") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const CoordinatePlaneFamily fam(g, 0, 8, 12, 16);
  const SymField2 u = random_field<6>(g, 6);
#ifdef _OPENMP
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
#endif
  const Sinogram a = longitudinal_transform(u, fam, Exec::serial);
  const Sinogram b = longitudinal_transform(u, fam, Exec::omp);
  CHECK(a.values == b.values);
  CHECK(a.slots == b.slots);
  SymField2 ba(g);
  SymField2 bb(g);
  longitudinal_adjoint(a, fam, ba, Exec::serial);
  longitudinal_adjoint(a, fam, bb, Exec::omp);
  CHECK(relative_error(bb, ba) < 1e-13);
#ifdef _OPENMP
  omp_set_num_threads(saved);
#endif
}

TEST_CASE("longitudinal transform of a pure trace integrates the scalar along the ray") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const ScalarField f = random_field<1>(g, 7);
  SymField2 u(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    for (int c = 0; c < 3; ++c) u(n, c) = f(n, 0);
  }
  const DenseSphereFamily fam(g, 5, 5);
  const Sinogram a = longitudinal_transform(u, fam);
  const Sinogram b = scalar_transform(f, fam);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).scale(1.0));
  // The truncated transform does not see it at all.
  const Sinogram k = truncated_transform(u, fam);
  for (double v : k.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("sinograms round trip through csv") {
  const Grid3 g = Grid3::cube(12, 1.2, kBall);
  const CoordinatePlaneFamily fam(g, 2, 5, 6, 3);
  Sinogram s = transverse_transform(random_field<6>(g, 8), fam);
  s.meta["config_hash"] = "0123456789abcdef";
  const std::string path = "test_forward_roundtrip.csv";
  s.write(path);
  const Sinogram back = Sinogram::read(path);
  CHECK(back.kind == RecordKind::quadform);
  CHECK(back.slots == s.slots);
  CHECK(back.ids == s.ids);
  CHECK(back.values == s.values);
  CHECK(back.meta["config_hash"] == "0123456789abcdef");
  CHECK(family_from_manifest(back.manifest, g)->size() == fam.size());
  std::filesystem::remove(path);
  std::filesystem::remove(path + ".manifest.json");
}

TEST_CASE("noise has the requested relative level") {
  Sinogram s;
  s.values.assign(20000, 2.0);
  s.slots.resize(20000);
  s.ids.resize(20000);
  std::mt19937_64 rng(9);
  add_noise(s, 0.01, rng);
  double ss = 0.0;
  for (double v : s.values) ss += (v - 2.0) * (v - 2.0);
  CHECK(std::sqrt(ss / 20000.0) == doctest::Approx(0.02).epsilon(0.03));
  CHECK(s.meta["noise_sigma"].get<double>() == doctest::Approx(0.02));
  CHECK_THROWS_AS(add_noise(s, -0.1, rng), InvalidInput);
}

TEST_CASE("compressional data is linear and refuses vanishing weights") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const CoordinatePlaneFamily fam(g, 1, 6, 8, 4);
  const auto params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, -0.05, 0.2, 0.3});
  const SymField2 R1 = stress(g, 10);
  const SymField2 R2 = stress(g, 11);
  const Sinogram a = pwave_data(R1, params, fam);
  const Sinogram b = pwave_data(R2, params, fam);
  const Sinogram c = pwave_data(2.0 * R1 - R2, params, fam);
  double scale = 0.0;
  for (double v : c.values) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    CHECK(std::abs(c.values[i] - (2.0 * a.values[i] - b.values[i])) <= 1e-8 * scale);
  }
  const auto bad = MaterialParams::constants(1.0, 1.0, 1.0, {0.0, 0.0, -0.5, -0.5});
  CHECK_THROWS_AS(pwave_data(R1, bad, fam), ConditionError);
}

TEST_CASE("zero stress propagates to the identity") {
  const Grid3 g = Grid3::cube(12, 1.2, kBall);
  const CoordinatePlaneFamily fam(g, 2, 4, 5, 3);
  const auto params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.4, -0.2, 0.5});
  const Sinogram U = propagator_sinogram(SymField2(g), params, fam, 1e-3);
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double* r = U.record(i);
    CHECK(r[0] == 1.0);
    CHECK(r[6] == 1.0);
    for (int k : {1, 2, 3, 4, 5, 7}) CHECK(r[k] == 0.0);
  }
}

TEST_CASE("propagators are unitary and reduce to the generator integral") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const CoordinatePlaneFamily fam(g, 0, 5, 6, 4);
  const auto params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.4, -0.2, 0.5});
  const SymField2 R = stress(g, 12);
  const double s = 1e-5;
  const Sinogram U = propagator_sinogram(R, params, fam, s);
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double* r = U.record(i);
    const Mat2c M{Complex(r[0], r[1]), Complex(r[2], r[3]), Complex(r[4], r[5]), Complex(r[6], r[7])};
    CHECK(unitarity_defect(M) < 1e-8);
  }
  const Sinogram L = born_reduce(U, s);
  const Sinogram G = generator_integral(R, params, fam);
  double scale = 0.0;
  for (double v : G.values) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < L.values.size(); ++i) CHECK(std::abs(L.values[i] - G.values[i]) <= 1e-3 * scale);
}

TEST_CASE("the generator matches the rank-4 contraction") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> n(0.0, 1.0);
  PointParams p;
  p.nu = {0.1, 0.4, -0.2, 0.5};
  for (int k = 0; k < 10; ++k) {
    const Sym3 R{n(rng), n(rng), n(rng), n(rng), n(rng), n(rng)};
    const Vec3 t = normalized({n(rng), n(rng), n(rng)});
    const Vec3 e1 = any_orthogonal(t);
    const Vec3 e2 = cross(t, e1);
    // Metric speed 1.3: h-unit vectors have Euclidean length 1.3.
    const double v = 1.3;
    const Gen2 a = RytovGenerator::at_point(R, p, v * t, v * e1, v * e2, v);
    const Gen2 b = RytovGenerator::from_rank4(f_from_R(R, p, v), v * t, v * e1, v * e2);
    for (int c = 0; c < 3; ++c) CHECK(a[static_cast<std::size_t>(c)] == doctest::Approx(b[static_cast<std::size_t>(c)]).scale(1.0));
  }
}

TEST_CASE("spin-2 rotation composes and has period pi") {
  const auto r = rotate_kdata(0.3, -0.7, 0.4);
  const auto rr = rotate_kdata(r[0], r[1], 0.5);
  const auto direct = rotate_kdata(0.3, -0.7, 0.9);
  CHECK(rr[0] == doctest::Approx(direct[0]));
  CHECK(rr[1] == doctest::Approx(direct[1]));
  const auto half = rotate_kdata(0.3, -0.7, std::acos(-1.0));
  CHECK(half[0] == doctest::Approx(0.3));
  CHECK(half[1] == doctest::Approx(-0.7));
  CHECK(std::hypot(r[0], r[1]) == doctest::Approx(std::hypot(0.3, -0.7)));
}
