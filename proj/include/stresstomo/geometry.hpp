#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresstomo/field.hpp"
#include "stresstomo/grid.hpp"
#include "stresstomo/vec.hpp"

namespace stresstomo {

/// Quadrature nodes of one ray. Vectors are stored Euclidean-unit; the metric speed v converts them to
/// h-unit vectors (multiply by v), so the h-velocity at node i is speed[i] * tangent[i].
struct Ray {
  std::vector<Vec3> points;
  std::vector<Vec3> tangent;
  std::vector<double> speed;
  /// Trapezoid weights in the metric arclength tau.
  std::vector<double> weight;
  std::vector<Vec3> frame1;
  std::vector<Vec3> frame2;
  /// Nominal tau step and total tau length.
  double step = 0.0;
  double length = 0.0;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void clear();
  /// Straight unit-speed chord from p0 to p0 + L*dir with n equispaced nodes and a fixed frame.
  void set_line(const Vec3& p0, const Vec3& dir, double L, std::size_t n, const Vec3& e1, const Vec3& e2);
};

/// Identifier of a ray inside a family: (family, slice, angle, offset).
struct RayId {
  int family = 0;
  int slice = 0;
  int angle = 0;
  int offset = 0;
  bool operator==(const RayId&) const = default;
};

/// Enumerable collection of rays; slots without a chord through M are reported as absent.
class RayFamily {
 public:
  virtual ~RayFamily() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t size() const = 0;
  /// Fills out with the ray of a slot; returns false when the slot misses M.
  virtual bool make_ray(std::size_t slot, Ray& out) const = 0;
  virtual RayId id(std::size_t slot) const = 0;
  virtual nlohmann::json manifest() const = 0;
};

using RayFamilyPtr = std::shared_ptr<const RayFamily>;

/// Lines parallel to the coordinate plane orthogonal to e_axis: per slice x_axis = const,
/// a parallel-beam geometry with angles theta_j = j*pi/angles and equispaced offsets.
class CoordinatePlaneFamily final : public RayFamily {
 public:
  /// step <= 0 selects half the smallest grid spacing.
  CoordinatePlaneFamily(const Grid3& grid, int axis, int angles, int offsets, int slices, double step = 0.0);

  std::string kind() const override { return "coordinate_plane"; }
  std::size_t size() const override {
    return static_cast<std::size_t>(slices_) * static_cast<std::size_t>(angles_) * static_cast<std::size_t>(offsets_);
  }
  bool make_ray(std::size_t slot, Ray& out) const override;
  RayId id(std::size_t slot) const override;
  nlohmann::json manifest() const override;

  std::size_t slot(int slice, int angle, int offset) const {
    return (static_cast<std::size_t>(slice) * angles_ + static_cast<std::size_t>(angle)) * offsets_ +
           static_cast<std::size_t>(offset);
  }
  int axis() const { return axis_; }
  int angles() const { return angles_; }
  int offsets() const { return offsets_; }
  int slices() const { return slices_; }
  double step() const { return step_; }
  const Grid3& grid() const { return grid_; }
  /// In-plane axes (u, w) with e_axis, e_u, e_w right-handed.
  int axis_u() const { return (axis_ + 1) % 3; }
  int axis_w() const { return (axis_ + 2) % 3; }
  double angle(int j) const;
  double slice_coordinate(int s) const;
  double offset_coordinate(int o) const;
  double offset_spacing() const;
  /// Offsets are measured from this in-plane center (the domain centroid).
  Vec3 center() const { return grid_.domain().centroid(); }
  Vec3 direction(int j) const;
  Vec3 normal(int j) const;

 private:
  Grid3 grid_;
  int axis_;
  int angles_;
  int offsets_;
  int slices_;
  double step_;
  double radius_;
};

/// Lines along a quasi-uniform set of hemisphere directions, each with an offsets x offsets grid of
/// parallel lines spanning the disc of the domain's bounding radius.
class DenseSphereFamily final : public RayFamily {
 public:
  DenseSphereFamily(const Grid3& grid, int directions, int offsets, double step = 0.0, double frame_rotation = 0.0);

  std::string kind() const override { return "dense_sphere"; }
  std::size_t size() const override {
    return static_cast<std::size_t>(directions_) * static_cast<std::size_t>(offsets_) *
           static_cast<std::size_t>(offsets_);
  }
  bool make_ray(std::size_t slot, Ray& out) const override;
  RayId id(std::size_t slot) const override;
  nlohmann::json manifest() const override;

  int directions() const { return directions_; }
  int offsets() const { return offsets_; }
  double step() const { return step_; }
  double frame_rotation() const { return frame_rotation_; }
  const Grid3& grid() const { return grid_; }
  Vec3 direction(int d) const { return dirs_[static_cast<std::size_t>(d)]; }

 private:
  Grid3 grid_;
  int directions_;
  int offsets_;
  double step_;
  double frame_rotation_;
  double radius_;
  std::vector<Vec3> dirs_;
  std::vector<Vec3> axis_a_;
  std::vector<Vec3> axis_b_;
};

/// Speed field v > 0 of the conformal metric h = v^-2 g.
class ConformalMetric {
 public:
  enum class Kind { constant, radial, field };

  static ConformalMetric constant(double v);
  /// v(x) = v0 * (1 + kappa * |x - center|^2).
  static ConformalMetric radial(double v0, double kappa, const Vec3& center = {0.0, 0.0, 0.0});
  /// Sampled speed; gradients from centered differences, trilinear interpolation, clamped to the grid box.
  static ConformalMetric from_field(const ScalarField& speed, const std::string& source = "");
  /// Inverse of describe(); field metrics are reloaded from their source file.
  static ConformalMetric from_json(const nlohmann::json& j);

  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::constant; }
  double speed(const Vec3& x) const;
  Vec3 speed_gradient(const Vec3& x) const;
  /// Speed and gradient in one evaluation.
  double speed_and_gradient(const Vec3& x, Vec3& grad) const;
  nlohmann::json describe() const;

 private:
  Kind kind_ = Kind::constant;
  double v0_ = 1.0;
  double kappa_ = 0.0;
  Vec3 center_{0.0, 0.0, 0.0};
  std::shared_ptr<const ScalarField> field_;
  std::shared_ptr<const CovectorField> gradient_;
  std::string source_;
  Vec3 clamp(const Vec3& x) const;
};

struct GeodesicOptions {
  /// Metric arclength step.
  double step = 0.01;
  /// Euclidean path budget as a multiple of the box diagonal.
  double budget_factor = 64.0;
  /// Box diagonal used for the budget; zero selects the domain diameter.
  double box_diagonal = 0.0;
  /// Optional first frame vector at the start (projected onto the tangent complement).
  std::optional<Vec3> frame_hint;
};

/// Traces the h-geodesic from boundary point x0 in direction dir (Euclidean, pointing into M)
/// with RK4 in metric arclength until it leaves M; throws NumericalError on budget overrun.
Ray trace_geodesic(const ConformalMetric& metric, const Domain& domain, const Vec3& x0, const Vec3& dir,
                   const GeodesicOptions& options = {});

/// Precomputed geodesics of a conformal metric: boundary sources on a quasi-uniform sphere,
/// each emitting a fan of directions tilted from the inward normal by at most max_tilt radians.
class GeodesicFanFamily final : public RayFamily {
 public:
  GeodesicFanFamily(const Grid3& grid, const ConformalMetric& metric, int sources, int fan, double max_tilt,
                    double step = 0.0);

  std::string kind() const override { return "geodesic_fan"; }
  std::size_t size() const override { return rays_.size(); }
  bool make_ray(std::size_t slot, Ray& out) const override;
  RayId id(std::size_t slot) const override;
  nlohmann::json manifest() const override;

 private:
  Grid3 grid_;
  nlohmann::json metric_;
  int sources_;
  int fan_;
  double max_tilt_;
  double step_;
  std::vector<Ray> rays_;
};

/// Parallel transport of a vector orthogonal to the initial tangent to the ray's end point.
Vec3 parallel_transport(const Ray& ray, const Vec3& vector, double tolerance = 1e-8);

struct DiameterEstimate {
  double value = 0.0;
  int samples = 0;
  int rays = 0;
};

/// Longest sampled boundary-to-boundary geodesic length (a lower bound on the diameter).
DiameterEstimate diameter(const ConformalMetric& metric, const Domain& domain, int samples,
                          const GeodesicOptions& options = {});

/// Line families at every Fourier node: the three directions e_k x y / |e_k x y|.
std::array<std::optional<Vec3>, 3> line_family_directions(const Vec3& y);

/// Builds the three coordinate-plane families; slices <= 0 places one slice on every grid plane.
/// Throws InvalidInput when angles < 3 or no line meets the domain.
std::vector<std::shared_ptr<CoordinatePlaneFamily>> build_line_families(const Grid3& grid, int angles, int offsets,
                                                                         int slices = 0, double step = 0.0);

nlohmann::json domain_to_json(const Domain& d);
Domain domain_from_json(const nlohmann::json& j);

/// Regenerates a family from its manifest.
RayFamilyPtr family_from_manifest(const nlohmann::json& manifest, const Grid3& grid);

}  // namespace stresstomo
