#include "stresstomo/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stresstomo/errors.hpp"

namespace stresstomo {

Domain Domain::box(const Vec3& lower, const Vec3& upper) {
  for (int a = 0; a < 3; ++a) {
    if (!(upper[a] > lower[a])) throw InvalidInput("box domain has empty extent along axis " + std::to_string(a));
  }
  Domain d;
  d.kind = Kind::box;
  d.lower = lower;
  d.upper = upper;
  d.center = 0.5 * (lower + upper);
  d.radius = 0.5 * norm(upper - lower);
  return d;
}

Domain Domain::ball(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw InvalidInput("ball domain radius must be positive");
  Domain d;
  d.kind = Kind::ball;
  d.center = center;
  d.radius = radius;
  d.lower = center - Vec3{radius, radius, radius};
  d.upper = center + Vec3{radius, radius, radius};
  return d;
}

bool Domain::contains(const Vec3& x) const {
  if (kind == Kind::ball) {
    const Vec3 r = x - center;
    return dot(r, r) <= radius * radius;
  }
  for (int a = 0; a < 3; ++a) {
    if (x[a] < lower[a] || x[a] > upper[a]) return false;
  }
  return true;
}

double Domain::signed_distance(const Vec3& x) const {
  if (kind == Kind::ball) return norm(x - center) - radius;
  double outside = 0.0;
  double inside = -1e300;
  for (int a = 0; a < 3; ++a) {
    const double d = std::max(lower[a] - x[a], x[a] - upper[a]);
    if (d > 0.0) outside += d * d;
    inside = std::max(inside, d);
  }
  return outside > 0.0 ? std::sqrt(outside) : inside;
}

std::optional<std::pair<double, double>> Domain::chord(const Vec3& p, const Vec3& dir) const {
  if (kind == Kind::ball) {
    const Vec3 r = p - center;
    const double b = dot(r, dir);
    const double c = dot(r, r) - radius * radius;
    const double disc = b * b - c;
    if (disc <= 0.0) return std::nullopt;
    const double s = std::sqrt(disc);
    return std::make_pair(-b - s, -b + s);
  }
  double s0 = -1e300;
  double s1 = 1e300;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-300) {
      if (p[a] < lower[a] || p[a] > upper[a]) return std::nullopt;
      continue;
    }
    double t0 = (lower[a] - p[a]) / dir[a];
    double t1 = (upper[a] - p[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    s0 = std::max(s0, t0);
    s1 = std::min(s1, t1);
  }
  if (!(s1 > s0)) return std::nullopt;
  return std::make_pair(s0, s1);
}

Vec3 Domain::centroid() const { return kind == Kind::ball ? center : 0.5 * (lower + upper); }

double Domain::bounding_radius() const { return kind == Kind::ball ? radius : 0.5 * norm(upper - lower); }

double Domain::diameter() const { return 2.0 * bounding_radius(); }

Vec3 Domain::outward_normal(const Vec3& x) const {
  if (kind == Kind::ball) return normalized(x - center);
  int best = 0;
  double best_d = -1e300;
  double sign = 1.0;
  for (int a = 0; a < 3; ++a) {
    const double dl = lower[a] - x[a];
    const double du = x[a] - upper[a];
    if (dl > best_d) {
      best_d = dl;
      best = a;
      sign = -1.0;
    }
    if (du > best_d) {
      best_d = du;
      best = a;
      sign = 1.0;
    }
  }
  return sign * unit(best);
}

Grid3::Grid3(std::array<int, 3> dims, Vec3 spacing, Vec3 origin, Domain domain)
    : dims_(dims), spacing_(spacing), origin_(origin), domain_(domain) {
  for (int a = 0; a < 3; ++a) {
    if (dims_[a] < 8) throw InvalidInput("grid needs at least 8 nodes per axis, got " + std::to_string(dims_[a]));
    if (!(spacing_[a] > 0.0)) throw InvalidInput("grid spacing must be positive");
  }
  const Vec3 hi = upper();
  if (domain_.kind == Domain::Kind::ball) {
    for (int a = 0; a < 3; ++a) {
      if (!(domain_.center[a] - domain_.radius > origin_[a] && domain_.center[a] + domain_.radius < hi[a])) {
        throw InvalidInput("ball domain must lie strictly inside the grid box");
      }
    }
  } else {
    for (int a = 0; a < 3; ++a) {
      if (domain_.lower[a] < origin_[a] - 1e-12 || domain_.upper[a] > hi[a] + 1e-12) {
        throw InvalidInput("box domain must lie inside the grid box");
      }
    }
  }
}

Grid3 Grid3::cube(int n, double half_width, const Domain& domain) {
  if (n < 8) throw InvalidInput("grid needs at least 8 nodes per axis");
  const double h = 2.0 * half_width / (n - 1);
  const Vec3 c = domain.centroid();
  return Grid3({n, n, n}, {h, h, h}, c - Vec3{half_width, half_width, half_width}, domain);
}

std::array<int, 3> Grid3::unravel(std::size_t n) const {
  const auto nz = static_cast<std::size_t>(dims_[2]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  const int k = static_cast<int>(n % nz);
  const int j = static_cast<int>((n / nz) % ny);
  const int i = static_cast<int>(n / (nz * ny));
  return {i, j, k};
}

Vec3 Grid3::upper() const { return position(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1); }

double Grid3::max_spacing() const { return std::max({spacing_[0], spacing_[1], spacing_[2]}); }

double Grid3::box_diagonal() const { return norm(upper() - origin_); }

bool Grid3::inside_box(const Vec3& x) const {
  const Vec3 hi = upper();
  for (int a = 0; a < 3; ++a) {
    if (x[a] < origin_[a] || x[a] > hi[a]) return false;
  }
  return true;
}

}  // namespace stresstomo
