#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stresstomo/errors.hpp"
#include "stresstomo/grid.hpp"
#include "stresstomo/vec.hpp"

namespace stresstomo {

/// Interpolation order, named by stencil width per axis: tensor-product Lagrange of degree width - 1.
enum class Interp : std::uint8_t { linear = 2, cubic = 4, quintic = 6 };

/// Ray transforms default to quintic: lower orders leave an interpolation residue in the kernel of I well above 1e-5.
inline constexpr Interp kRayInterp = Interp::quintic;

/// Tensor-product stencil of a point: first node per axis and per-axis weights. Nodes outside the grid read as zero.
struct Stencil {
  int width = 2;
  int base[3] = {0, 0, 0};
  double w[3][6] = {};
};

inline Stencil make_stencil(const Grid3& g, const Vec3& x, Interp order = Interp::linear) {
  Stencil s;
  s.width = static_cast<int>(order);
  const int half = s.width / 2 - 1;
  for (int a = 0; a < 3; ++a) {
    const double u = (x[a] - g.origin()[a]) / g.spacing()[a];
    const double f = std::floor(u);
    const double t = u - f;
    s.base[a] = static_cast<int>(f) - half;
    // Lagrange basis on nodes -half .. width-1-half relative to floor(u).
    for (int m = 0; m < s.width; ++m) {
      const double xm = m - half;
      double num = 1.0;
      double den = 1.0;
      for (int q = 0; q < s.width; ++q) {
        if (q == m) continue;
        const double xq = q - half;
        num *= t - xq;
        den *= xm - xq;
      }
      s.w[a][m] = num / den;
    }
  }
  return s;
}

/// Grid field with NC real components per node, stored node-major, component-minor.
template <int NC>
class Field {
 public:
  static constexpr int kComponents = NC;

  Field() = default;
  explicit Field(const Grid3& grid) : grid_(grid), values_(grid.node_count() * NC, 0.0) {}

  const Grid3& grid() const { return grid_; }
  std::size_t node_count() const { return grid_.node_count(); }

  double* node(std::size_t n) { return values_.data() + n * NC; }
  const double* node(std::size_t n) const { return values_.data() + n * NC; }
  double& operator()(std::size_t n, int c) { return values_[n * NC + c]; }
  double operator()(std::size_t n, int c) const { return values_[n * NC + c]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Lagrange interpolation of the given order; nodes beyond the grid contribute zero.
  void interpolate(const Vec3& x, double* out, Interp order = Interp::linear) const {
    interpolate(make_stencil(grid_, x, order), out);
  }

  void interpolate(const Stencil& s, double* out) const {
    for (int c = 0; c < NC; ++c) out[c] = 0.0;
    visit(s, [&](std::size_t n, double w) {
      const double* v = node(n);
      for (int c = 0; c < NC; ++c) out[c] += w * v[c];
    });
  }

  /// Adjoint of interpolate: scatters per-component values into the stencil nodes.
  void scatter(const Stencil& s, const double* in) {
    visit(s, [&](std::size_t n, double w) {
      double* v = node(n);
      for (int c = 0; c < NC; ++c) v[c] += w * in[c];
    });
  }

  Field& operator+=(const Field& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  Field& operator-=(const Field& o) {
    require_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  Field& operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
  }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }

  void require_same_grid(const Field& o) const {
    if (!(grid_ == o.grid_)) throw InvalidInput("fields live on different grids");
  }

  /// Zeroes every node outside the domain M.
  void mask_outside_domain() {
    for (std::size_t n = 0; n < node_count(); ++n) {
      if (!grid_.domain().contains(grid_.position(n))) {
        for (int c = 0; c < NC; ++c) values_[n * NC + c] = 0.0;
      }
    }
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

 private:
  Grid3 grid_{};

  template <class Fn>
  void visit(const Stencil& s, Fn&& fn) const {
    const auto& d = grid_.dims();
    for (int di = 0; di < s.width; ++di) {
      const int i = s.base[0] + di;
      if (i < 0 || i >= d[0] || s.w[0][di] == 0.0) continue;
      for (int dj = 0; dj < s.width; ++dj) {
        const int j = s.base[1] + dj;
        if (j < 0 || j >= d[1]) continue;
        const double wij = s.w[0][di] * s.w[1][dj];
        if (wij == 0.0) continue;
        const std::size_t row = grid_.index(i, j, 0);
        for (int dk = 0; dk < s.width; ++dk) {
          const int k = s.base[2] + dk;
          if (k < 0 || k >= d[2]) continue;
          fn(row + static_cast<std::size_t>(k), wij * s.w[2][dk]);
        }
      }
    }
  }
  std::vector<double> values_;
};

using ScalarField = Field<1>;
using CovectorField = Field<3>;
using SymField2 = Field<6>;

inline Sym3 sym_at(const SymField2& u, std::size_t n) {
  const double* p = u.node(n);
  return {p[0], p[1], p[2], p[3], p[4], p[5]};
}
inline void set_sym(SymField2& u, std::size_t n, const Sym3& s) {
  double* p = u.node(n);
  for (int c = 0; c < 6; ++c) p[c] = s[c];
}

/// L2 norm with tensor-aware weighting (symmetric off-diagonals counted twice) and cell volume.
template <int NC>
double l2_norm(const Field<NC>& f) {
  double s = 0.0;
  for (std::size_t n = 0; n < f.node_count(); ++n) {
    const double* p = f.node(n);
    if constexpr (NC == 6) {
      s += p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + 2.0 * (p[3] * p[3] + p[4] * p[4] + p[5] * p[5]);
    } else {
      for (int c = 0; c < NC; ++c) s += p[c] * p[c];
    }
  }
  return std::sqrt(s * f.grid().cell_volume());
}

/// L2 inner product consistent with l2_norm.
template <int NC>
double l2_inner(const Field<NC>& a, const Field<NC>& b) {
  a.require_same_grid(b);
  double s = 0.0;
  for (std::size_t n = 0; n < a.node_count(); ++n) {
    const double* p = a.node(n);
    const double* q = b.node(n);
    for (int c = 0; c < NC; ++c) s += ((NC == 6 && c >= 3) ? 2.0 : 1.0) * p[c] * q[c];
  }
  return s * a.grid().cell_volume();
}

/// Relative L2 error ||a - b|| / ||b||.
template <int NC>
double relative_error(const Field<NC>& approx, const Field<NC>& truth) {
  const double denom = l2_norm(truth);
  const double num = l2_norm(approx - truth);
  if (denom == 0.0) return num;
  return num / denom;
}

/// Plain dot product over stored components (the inner product used by discrete adjoints).
template <int NC>
double stored_dot(const Field<NC>& a, const Field<NC>& b) {
  a.require_same_grid(b);
  double s = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return s;
}

}  // namespace stresstomo
