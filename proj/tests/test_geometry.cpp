#include <doctest.h>

#include <cmath>
#include <random>

#include "stresstomo/forward.hpp"
#include "stresstomo/geometry.hpp"

using namespace stresstomo;

namespace {

const Domain kBall = Domain::ball({0.0, 0.0, 0.0}, 1.0);

ScalarField ones(const Grid3& g) {
  ScalarField f(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) f(n, 0) = 1.0;
  return f;
}

}  // namespace

TEST_CASE("integrating a constant field returns chord lengths") {
  // The grid leaves room for the full interpolation stencil beyond the ball.
  const Grid3 g = Grid3::cube(32, 1.3, kBall);
  const ScalarField f = ones(g);
  const CoordinatePlaneFamily fam(g, 2, 8, 10, 4);
  const Sinogram s = scalar_transform(f, fam);
  REQUIRE(s.size() > 0);
  Ray ray;
  for (std::size_t i = 0; i < s.size(); ++i) {
    REQUIRE(fam.make_ray(s.slots[i], ray));
    const RayId id = s.ids[i];
    const double z = fam.slice_coordinate(id.slice);
    const double p = fam.offset_coordinate(id.offset);
    const double chord = 2.0 * std::sqrt(1.0 - z * z - p * p);
    CHECK(s.values[i] == doctest::Approx(chord).epsilon(1e-10));
    CHECK(ray.length == doctest::Approx(chord).epsilon(1e-10));
  }
}

TEST_CASE("coordinate-plane rays lie in their slice and are orthonormally framed") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  for (int axis = 0; axis < 3; ++axis) {
    const CoordinatePlaneFamily fam(g, axis, 6, 8, 3);
    Ray ray;
    for (std::size_t s = 0; s < fam.size(); ++s) {
      if (!fam.make_ray(s, ray)) continue;
      const RayId id = fam.id(s);
      CHECK(ray.points.front()[axis] == doctest::Approx(fam.slice_coordinate(id.slice)));
      CHECK(ray.tangent[0][axis] == 0.0);
      CHECK(std::abs(dot(ray.tangent[0], ray.frame1[0])) < 1e-14);
      CHECK(std::abs(dot(ray.frame1[0], ray.frame2[0])) < 1e-14);
      CHECK(norm(ray.frame2[0]) == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("families regenerate from their manifests") {
  const Grid3 g = Grid3::cube(16, 1.2, kBall);
  const CoordinatePlaneFamily plane(g, 1, 7, 9, 5);
  const DenseSphereFamily dense(g, 10, 6, 0.0, 0.3);
  for (const RayFamily* fam : {static_cast<const RayFamily*>(&plane), static_cast<const RayFamily*>(&dense)}) {
    const RayFamilyPtr again = family_from_manifest(fam->manifest(), g);
    REQUIRE(again->size() == fam->size());
    Ray a;
    Ray b;
    for (std::size_t s = 0; s < fam->size(); s += 7) {
      const bool ha = fam->make_ray(s, a);
      REQUIRE(ha == again->make_ray(s, b));
      if (!ha) continue;
      CHECK(a.size() == b.size());
      CHECK(norm(a.points.back() - b.points.back()) == 0.0);
      CHECK(again->id(s) == fam->id(s));
    }
  }
}

TEST_CASE("line family directions are orthogonal to the frequency") {
  const auto dirs = line_family_directions({0.3, -1.2, 0.5});
  for (const auto& d : dirs) {
    REQUIRE(d);
    CHECK(std::abs(dot(*d, {0.3, -1.2, 0.5})) < 1e-14);
    CHECK(norm(*d) == doctest::Approx(1.0));
  }
  // On a coordinate axis the matching family degenerates.
  const auto axis = line_family_directions({0.0, 0.0, 2.0});
  CHECK_FALSE(axis[2]);
  CHECK(axis[0]);
}

TEST_CASE("geodesics of a radial metric through the center follow the closed-form length") {
  // v = v0 (1 + k r^2): along a diameter the metric length is 2 atan(sqrt k) / (v0 sqrt k).
  const double v0 = 1.5;
  const double k = 0.4;
  const ConformalMetric metric = ConformalMetric::radial(v0, k);
  GeodesicOptions opts;
  opts.step = 0.005;
  const Ray ray = trace_geodesic(metric, kBall, {-1.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, opts);
  const double exact = 2.0 * std::atan(std::sqrt(k)) / (v0 * std::sqrt(k));
  CHECK(ray.length == doctest::Approx(exact).epsilon(1e-8));
  CHECK(norm(ray.points.back() - Vec3{1.0, 0.0, 0.0}) < 1e-8);
  // Off-center geodesics bend but still exit through the sphere.
  const Ray bent = trace_geodesic(metric, kBall, {-0.8, 0.6, 0.0}, {1.0, 0.0, 0.0}, opts);
  CHECK(norm(bent.points.back()) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(bent.points.back()[2]) < 1e-12);
}

TEST_CASE("constant metrics keep speed and transport vectors unchanged") {
  const ConformalMetric metric = ConformalMetric::constant(2.0);
  const Ray ray = trace_geodesic(metric, kBall, {0.0, -1.0, 0.0}, normalized({0.3, 1.0, 0.1}));
  for (double s : ray.speed) CHECK(s == 2.0);
  const Vec3 w = any_orthogonal(ray.tangent.front());
  CHECK(norm(parallel_transport(ray, w) - w) < 1e-10);
  const DiameterEstimate d = diameter(metric, kBall, 12);
  CHECK(d.value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("sampled metrics reload from their description") {
  const Grid3 g = Grid3::cube(12, 1.2, kBall);
  const ConformalMetric radial = ConformalMetric::radial(1.0, 0.2, {0.1, 0.0, 0.0});
  const ConformalMetric back = ConformalMetric::from_json(radial.describe());
  CHECK(back.speed({0.3, 0.2, -0.1}) == doctest::Approx(radial.speed({0.3, 0.2, -0.1})));
  ScalarField v(g);
  for (std::size_t n = 0; n < g.node_count(); ++n) v(n, 0) = radial.speed(g.position(n));
  const ConformalMetric sampled = ConformalMetric::from_field(v);
  CHECK(sampled.speed({0.3, 0.2, -0.1}) == doctest::Approx(radial.speed({0.3, 0.2, -0.1})).epsilon(1e-2));
}

TEST_CASE("geodesic fans cover the domain from boundary sources") {
  const Grid3 g = Grid3::cube(12, 1.2, kBall);
  const GeodesicFanFamily fam(g, ConformalMetric::radial(1.0, 0.3), 6, 5, 0.6);
  CHECK(fam.size() == 30);
  Ray ray;
  for (std::size_t s = 0; s < fam.size(); ++s) {
    REQUIRE(fam.make_ray(s, ray));
    CHECK(norm(ray.points.front()) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(norm(ray.points.back()) == doctest::Approx(1.0).epsilon(1e-6));
  }
}
