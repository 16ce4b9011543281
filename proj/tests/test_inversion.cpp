#include <doctest.h>

#include <cmath>
#include <random>

#include "stresstomo/inversion.hpp"

using namespace stresstomo;

namespace {

const Domain kBall = Domain::ball({0.0, 0.0, 0.0}, 1.0);

SymField2 stress(const Grid3& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  BumpSpec spec;
  return random_residual_stress(g, rng, spec);
}

SymField2 tracefree_part(const SymField2& F) {
  SymField2 out = F;
  for (std::size_t n = 0; n < out.node_count(); ++n) {
    double* v = out.node(n);
    const double t = (v[0] + v[1] + v[2]) / 3.0;
    for (int c = 0; c < 3; ++c) v[c] -= t;
  }
  return out;
}

}  // namespace

TEST_CASE("trace detangling on a single frequency") {
  // y = e3, f = diag(2, 1, 0), a = 1: m = f + a tr(f) eps = diag(5, 4, 0).
  Complex f[6] = {2.0, 1.0, 0.0, 0.0, 0.0, 0.0};
  tangle_node({0.0, 0.0, 1.0}, f, 1.0);
  CHECK(f[0] == Complex(5.0));
  CHECK(f[1] == Complex(4.0));
  CHECK(f[2] == Complex(0.0));
  detangle_node({0.0, 0.0, 1.0}, f, 1.0);
  CHECK(std::abs(f[0] - 2.0) < 1e-15);
  CHECK(std::abs(f[1] - 1.0) < 1e-15);
  CHECK_THROWS_AS(require_detangle_unique(-0.5, 1e-6), NonUniqueError);
  CHECK_NOTHROW(require_detangle_unique(-0.49, 1e-6));
}

TEST_CASE("field-level detangling inverts tangling of a solenoidal field") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const SymField2 R = stress(g, 1);
  FourierSymField2 m = FourierSymField2::transform(R);
  solenoidal_project(m);
  const FourierSymField2 f = m;
  for (std::size_t n = 0; n < m.node_count(); ++n) {
    const auto ijk = m.spectrum().unravel(n);
    tangle_node(m.spectrum().frequency(ijk[0], ijk[1], ijk[2]), m.node(n), 0.3);
  }
  detangle_trace(m, 0.3);
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < f.values().size(); ++i) {
    diff = std::max(diff, std::abs(m.values()[i] - f.values()[i]));
    scale = std::max(scale, std::abs(f.values()[i]));
  }
  CHECK(diff <= 1e-12 * scale);
}

TEST_CASE("reports round trip through json") {
  ReconReport r("pwave");
  r.set("relative_error", 0.0123);
  r.add_stage("solenoidal", 1e-3, 0.5, {{"degenerate_nodes", 4}});
  r.add_stage("detangle", 0.0, 0.1);
  const ReconReport back = ReconReport::from_json(nlohmann::json::parse(r.to_json().dump()));
  CHECK(back.to_json() == r.to_json());
  CHECK(back.stage("solenoidal")["residual"] == 1e-3);
  CHECK(back.stage("solenoidal")["degenerate_nodes"] == 4);
  CHECK(back.has_stage("detangle"));
  CHECK_THROWS_AS(back.stage("trace"), InvalidInput);
  CHECK_THROWS_AS(ReconReport::from_json(nlohmann::json::array()), InvalidInput);
}

TEST_CASE("filtered backprojection recovers a smooth scalar") {
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  ScalarField f(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) {
    const Vec3 x = g.position(n) - Vec3{0.2, -0.1, 0.0};
    f(n, 0) = std::exp(-dot(x, x) / (2.0 * 0.15 * 0.15));
  }
  const CoordinatePlaneFamily fam(g, 2, 64, 48, 32);
  ScalarField rec = filtered_backprojection(scalar_transform(f, fam), fam);
  rec.mask_outside_domain();
  CHECK(relative_error(rec, f) < 0.05);
}

TEST_CASE("compressional pipeline reconstructs a synthetic stress") {
  const Grid3 g = Grid3::cube(24, 1.1, kBall);
  std::mt19937_64 rng(2);
  BumpSpec spec;
  spec.center_radius = 0.1;
  const SymField2 R = random_residual_stress(g, rng, spec);
  const auto params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, -0.05, 0.2, 0.3});
  const auto families = build_line_families(g, 48, 36);
  std::vector<Sinogram> data;
  for (const auto& f : families) data.push_back(pwave_data(R, params, *f));
  PWaveOptions opts;
  opts.refinement_iterations = 3;
  const PipelineResult res = pwave_pipeline(data, families, params, opts, &R);
  CHECK(res.report.json()["relative_error"].get<double>() < 0.1);
  CHECK(res.report.has_stage("solenoidal"));
  CHECK(res.report.has_stage("refinement"));

  // Zero data reconstructs zero.
  std::vector<Sinogram> zero = data;
  for (Sinogram& s : zero) std::fill(s.values.begin(), s.values.end(), 0.0);
  CHECK(pwave_pipeline(zero, families, params, opts).R.max_abs() == 0.0);

  // a = -1/2 is refused before any work.
  const auto nonunique = MaterialParams::constants(1.0, 1.0, 1.0, {-1.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(pwave_pipeline(data, families, nonunique, opts), NonUniqueError);
}

TEST_CASE("trace-free inversion does not depend on the frame gauge") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const SymField2 F = tracefree_part(stress(g, 3));
  const DenseSphereFamily base(g, 16, 12);
  const DenseSphereFamily turned(g, 16, 12, 0.0, 0.7);
  CgOptions opts;
  opts.tolerance = 1e-10;
  opts.max_iterations = 1000;
  const CgResult a = invert_K_tracefree(truncated_transform(F, base), base, g, opts);
  const CgResult b = invert_K_tracefree(truncated_transform(F, turned), turned, g, opts);
  // Both solves converge to the same regularized solution; rounding only perturbs the iterates.
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(relative_error(b.field, a.field) < 1e-6);
  CHECK(a.max_trace < 1e-12);
}

TEST_CASE("trace recovery sees no trace in a trace-free field") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const SymField2 F = tracefree_part(stress(g, 4));
  const CoordinatePlaneFamily fam(g, 2, 24, 16, 16);
  // Unit-frame data of a trace-free field: L = J F + I F in both polarizations.
  Sinogram L = transverse_transform(F, fam);
  const Sinogram I = longitudinal_transform(F, fam);
  for (std::size_t i = 0; i < L.size(); ++i) {
    L.record(i)[0] += I.record(i)[0];
    L.record(i)[1] += I.record(i)[0];
  }
  const TraceResult t = recover_trace(L, F, 0.8, fam);
  CHECK(t.trace.max_abs() <= 1e-10 * F.max_abs());
  CHECK_THROWS_AS(recover_trace(L, F, -2.0 / 3.0, fam), NonUniqueError);
}

TEST_CASE("poincare ratio and the pointwise codifferential bound") {
  const Grid3 g = Grid3::cube(24, 1.1, kBall);
  const ConformalMetric metric = ConformalMetric::constant(1.0);
  const PoincareResult zero = verify_poincare(CovectorField(g), metric, 2.0);
  CHECK(zero.ratio == 0.0);
  std::mt19937_64 rng(5);
  BumpSpec spec;
  spec.profile = Bump::Profile::polynomial;
  spec.width_min = 0.3;
  spec.width_max = 0.6;
  spec.center_radius = 0.3;
  for (int k = 0; k < 5; ++k) {
    const PoincareResult p = verify_poincare(sample_bumps<3>(g, random_bumps(rng, spec, 3)), metric, 2.0);
    CHECK(p.ratio > 0.0);
    CHECK(p.ratio <= 1.0);
    CHECK(p.pointwise_excess <= 1e-10);
  }
  // A field touching the boundary is not admissible.
  CovectorField full(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) full(n, 0) = 1.0;
  CHECK_THROWS_AS(verify_poincare(full, metric, 2.0), InvalidInput);
}

TEST_CASE("trace-free basis is orthonormal") {
  const auto& B = tracefree_basis();
  for (std::size_t i = 0; i < B.size(); ++i) {
    CHECK(B[i][0] + B[i][1] + B[i][2] == doctest::Approx(0.0).scale(1.0));
    for (std::size_t j = 0; j < B.size(); ++j) {
      double s = 0.0;
      for (int c = 0; c < 6; ++c) s += (c < 3 ? 1.0 : 2.0) * B[i][static_cast<std::size_t>(c)] * B[j][static_cast<std::size_t>(c)];
      CHECK(s == doctest::Approx(i == j ? 1.0 : 0.0).scale(1.0));
    }
  }
}
