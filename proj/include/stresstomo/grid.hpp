#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>

#include "stresstomo/vec.hpp"

namespace stresstomo {

/// The body M: either an axis-aligned box or a ball.
struct Domain {
  enum class Kind : std::uint8_t { box = 0, ball = 1 };

  Kind kind = Kind::ball;
  Vec3 lower{-1.0, -1.0, -1.0};
  Vec3 upper{1.0, 1.0, 1.0};
  Vec3 center{0.0, 0.0, 0.0};
  double radius = 1.0;

  static Domain box(const Vec3& lower, const Vec3& upper);
  static Domain ball(const Vec3& center, double radius);

  bool contains(const Vec3& x) const;
  /// Signed distance to the boundary, negative inside.
  double signed_distance(const Vec3& x) const;
  /// Parameter interval [s0, s1] where p + s*dir lies in M; dir must be unit.
  std::optional<std::pair<double, double>> chord(const Vec3& p, const Vec3& dir) const;
  Vec3 centroid() const;
  /// Radius of the smallest centroid-centered sphere enclosing M.
  double bounding_radius() const;
  /// Euclidean diameter.
  double diameter() const;
  Vec3 outward_normal(const Vec3& x) const;

  bool operator==(const Domain&) const = default;
};

/// Uniform 3D grid of nodes; node (i, j, k) sits at origin + (i*hx, j*hy, k*hz).
class Grid3 {
 public:
  Grid3() = default;
  /// Validates dims >= 8, positive spacing and (for balls) strict containment in the grid box.
  Grid3(std::array<int, 3> dims, Vec3 spacing, Vec3 origin, Domain domain);

  /// Cube grid with n nodes per axis spanning [c - half_width, c + half_width] around the domain centroid.
  static Grid3 cube(int n, double half_width, const Domain& domain);

  const std::array<int, 3>& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  const Domain& domain() const { return domain_; }

  std::size_t node_count() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(dims_[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims_[2]) +
           static_cast<std::size_t>(k);
  }
  std::array<int, 3> unravel(std::size_t n) const;
  Vec3 position(int i, int j, int k) const {
    return {origin_[0] + i * spacing_[0], origin_[1] + j * spacing_[1], origin_[2] + k * spacing_[2]};
  }
  Vec3 position(std::size_t n) const {
    const auto ijk = unravel(n);
    return position(ijk[0], ijk[1], ijk[2]);
  }
  /// Coordinate of the last node along each axis.
  Vec3 upper() const;
  double cell_volume() const { return spacing_[0] * spacing_[1] * spacing_[2]; }
  double max_spacing() const;
  double box_diagonal() const;
  bool inside_box(const Vec3& x) const;

  bool operator==(const Grid3&) const = default;

 private:
  std::array<int, 3> dims_{8, 8, 8};
  Vec3 spacing_{1.0, 1.0, 1.0};
  Vec3 origin_{0.0, 0.0, 0.0};
  Domain domain_{};
};

}  // namespace stresstomo
