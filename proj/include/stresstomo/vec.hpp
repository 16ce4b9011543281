#pragma once

#include <array>
#include <cmath>
#include <complex>

namespace stresstomo {

using Vec3 = std::array<double, 3>;

/// Symmetric 3x3 tensor in the fixed storage order (11, 22, 33, 23, 13, 12).
using Sym3 = std::array<double, 6>;
using Complex = std::complex<double>;

/// Storage slot of component (j, k) of a symmetric tensor, 0-based indices.
constexpr int sym_index(int j, int k) {
  constexpr int table[3][3] = {{0, 5, 4}, {5, 1, 3}, {4, 3, 2}};
  return table[j][k];
}

/// Row/column pair for each storage slot.
constexpr std::array<std::array<int, 2>, 6> kSymPairs = {{{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator-(const Vec3& a) { return {-a[0], -a[1], -a[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline Vec3 operator*(const Vec3& a, double s) { return s * a; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
  a[0] += b[0];
  a[1] += b[1];
  a[2] += b[2];
  return a;
}

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 normalized(const Vec3& a) { return (1.0 / norm(a)) * a; }

inline Vec3 unit(int axis) {
  Vec3 e{0.0, 0.0, 0.0};
  e[axis] = 1.0;
  return e;
}

/// Coefficients c such that u(a, b) = sum_s c[s] * u[s] for symmetric u in storage order.
inline Sym3 bilinear_coeffs(const Vec3& a, const Vec3& b) {
  return {a[0] * b[0],
          a[1] * b[1],
          a[2] * b[2],
          a[1] * b[2] + a[2] * b[1],
          a[0] * b[2] + a[2] * b[0],
          a[0] * b[1] + a[1] * b[0]};
}

inline double contract(const Sym3& u, const Vec3& a, const Vec3& b) {
  const Sym3 c = bilinear_coeffs(a, b);
  double s = 0.0;
  for (int i = 0; i < 6; ++i) s += c[i] * u[i];
  return s;
}

inline double trace(const Sym3& u) { return u[0] + u[1] + u[2]; }

inline Sym3 outer_sym(const Vec3& a, const Vec3& b) {
  // (a b^T + b a^T) / 2
  return {a[0] * b[0],
          a[1] * b[1],
          a[2] * b[2],
          0.5 * (a[1] * b[2] + a[2] * b[1]),
          0.5 * (a[0] * b[2] + a[2] * b[0]),
          0.5 * (a[0] * b[1] + a[1] * b[0])};
}

inline Sym3 identity_sym() { return {1.0, 1.0, 1.0, 0.0, 0.0, 0.0}; }

/// Frobenius norm squared (off-diagonals counted twice).
inline double frobenius2(const Sym3& u) {
  return u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + 2.0 * (u[3] * u[3] + u[4] * u[4] + u[5] * u[5]);
}

inline double sym_get(const Sym3& u, int j, int k) { return u[sym_index(j, k)]; }

/// Any unit vector orthogonal to a unit vector t.
inline Vec3 any_orthogonal(const Vec3& t) {
  int m = 0;
  if (std::abs(t[1]) < std::abs(t[m])) m = 1;
  if (std::abs(t[2]) < std::abs(t[m])) m = 2;
  return normalized(cross(t, unit(m)));
}

}  // namespace stresstomo
