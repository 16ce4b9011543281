#include "stresstomo/fields.hpp"

#include <cmath>
#include <string>

#include "stresstomo/errors.hpp"

namespace stresstomo {
namespace {

constexpr Complex kI(0.0, 1.0);

/// Levi-Civita symbol for 0-based indices.
constexpr int levi(int i, int j, int k) { return (i - j) * (j - k) * (k - i) / 2; }

double component_weight(int nc, int c) { return (nc == 6 && c >= 3) ? 2.0 : 1.0; }

}  // namespace

FourierSymField2::FourierSymField2(const Grid3& grid, int pad_factor)
    : spectrum_(grid, pad_factor), values_(spectrum_.padded_count() * 6, Complex(0.0, 0.0)) {}

FourierSymField2 FourierSymField2::transform(const SymField2& u, int pad_factor) {
  FourierSymField2 out(u.grid(), pad_factor);
  out.values_ = out.spectrum_.forward(u.values().data(), 6);
  return out;
}

SymField2 FourierSymField2::inverse() const {
  std::vector<Complex> data = values_;
  spectrum_.inverse_inplace(data, 6);
  SymField2 out(grid());
  spectrum_.crop_real(data, 6, out.values().data());
  return out;
}

double FourierSymField2::l2_norm() const {
  double s = 0.0;
  for (std::size_t n = 0; n < node_count(); ++n) {
    const Complex* p = node(n);
    for (int c = 0; c < 6; ++c) s += component_weight(6, c) * std::norm(p[c]);
  }
  return std::sqrt(s / static_cast<double>(node_count()) * grid().cell_volume());
}

Sym3 tangential_projector(const Vec3& y) {
  const double y2 = dot(y, y);
  if (y2 == 0.0) return Sym3{};
  Sym3 e = identity_sym();
  for (int s = 0; s < 6; ++s) e[s] -= y[kSymPairs[s][0]] * y[kSymPairs[s][1]] / y2;
  return e;
}

void project_node(const Vec3& y, Complex* u) {
  const double y2 = dot(y, y);
  if (y2 == 0.0) {
    for (int c = 0; c < 6; ++c) u[c] = 0.0;
    return;
  }
  double P[3][3];
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) P[j][k] = (j == k ? 1.0 : 0.0) - y[j] * y[k] / y2;
  }
  Complex U[3][3];
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) U[j][k] = u[sym_index(j, k)];
  }
  Complex PU[3][3];
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      Complex s = 0.0;
      for (int p = 0; p < 3; ++p) s += P[j][p] * U[p][k];
      PU[j][k] = s;
    }
  }
  for (int s = 0; s < 6; ++s) {
    const int j = kSymPairs[s][0];
    const int k = kSymPairs[s][1];
    Complex v = 0.0;
    for (int q = 0; q < 3; ++q) v += PU[j][q] * P[q][k];
    u[s] = v;
  }
}

std::vector<double> partials(const double* values, int nc, const Grid3& grid, DerivativeBackend backend) {
  const std::size_t nn = grid.node_count();
  std::vector<double> out(nn * 3 * nc, 0.0);
  const auto& d = grid.dims();
  if (backend == DerivativeBackend::centered) {
    for (int a = 0; a < 3; ++a) {
      if (d[a] < 3) throw InvalidInput("centered differences need at least 3 nodes per axis");
    }
    for (int i = 0; i < d[0]; ++i) {
      for (int j = 0; j < d[1]; ++j) {
        for (int k = 0; k < d[2]; ++k) {
          const int ijk[3] = {i, j, k};
          const std::size_t n = grid.index(i, j, k);
          for (int a = 0; a < 3; ++a) {
            const double h = grid.spacing()[a];
            auto at = [&](int shift) {
              int q[3] = {i, j, k};
              q[a] += shift;
              return values + grid.index(q[0], q[1], q[2]) * nc;
            };
            double* dst = out.data() + (n * 3 + a) * nc;
            if (ijk[a] == 0) {
              const double *f0 = at(0), *f1 = at(1), *f2 = at(2);
              for (int c = 0; c < nc; ++c) dst[c] = (-3.0 * f0[c] + 4.0 * f1[c] - f2[c]) / (2.0 * h);
            } else if (ijk[a] == d[a] - 1) {
              const double *f0 = at(0), *f1 = at(-1), *f2 = at(-2);
              for (int c = 0; c < nc; ++c) dst[c] = (3.0 * f0[c] - 4.0 * f1[c] + f2[c]) / (2.0 * h);
            } else {
              const double *fp = at(1), *fm = at(-1);
              for (int c = 0; c < nc; ++c) dst[c] = (fp[c] - fm[c]) / (2.0 * h);
            }
          }
        }
      }
    }
    return out;
  }
  const Spectrum spec(grid);
  const std::vector<Complex> hat = spec.forward(values, nc);
  std::vector<Complex> work(hat.size());
  std::vector<double> comp(nn * nc);
  const auto& P = spec.padded();
  for (int a = 0; a < 3; ++a) {
    for (int i = 0; i < P[0]; ++i) {
      for (int j = 0; j < P[1]; ++j) {
        for (int k = 0; k < P[2]; ++k) {
          const int ijk[3] = {i, j, k};
          const Complex m = kI * spec.frequency(a, ijk[a]);
          const std::size_t n = spec.index(i, j, k);
          for (int c = 0; c < nc; ++c) work[n * nc + c] = m * hat[n * nc + c];
        }
      }
    }
    spec.inverse_inplace(work, nc);
    spec.crop_real(work, nc, comp.data());
    for (std::size_t n = 0; n < nn; ++n) {
      for (int c = 0; c < nc; ++c) out[(n * 3 + a) * nc + c] = comp[n * nc + c];
    }
  }
  return out;
}

CovectorField gradient(const ScalarField& f, DerivativeBackend backend) {
  const std::vector<double> d = partials(f.values().data(), 1, f.grid(), backend);
  CovectorField g(f.grid());
  for (std::size_t i = 0; i < d.size(); ++i) g.values()[i] = d[i];
  return g;
}

SymField2 inner_derivative(const CovectorField& v, DerivativeBackend backend) {
  const std::vector<double> d = partials(v.values().data(), 3, v.grid(), backend);
  SymField2 out(v.grid());
  for (std::size_t n = 0; n < v.node_count(); ++n) {
    const double* dn = d.data() + n * 9;  // dn[a*3 + c] = d_a v_c
    double* o = out.node(n);
    for (int s = 0; s < 6; ++s) {
      const int j = kSymPairs[s][0];
      const int k = kSymPairs[s][1];
      o[s] = 0.5 * (dn[j * 3 + k] + dn[k * 3 + j]);
    }
  }
  return out;
}

CovectorField divergence(const SymField2& u, DerivativeBackend backend, const ScalarField* speed) {
  const std::vector<double> d = partials(u.values().data(), 6, u.grid(), backend);
  CovectorField out(u.grid());
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const double* dn = d.data() + n * 18;  // dn[a*6 + s] = d_a u_s
    double* o = out.node(n);
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += dn[k * 6 + sym_index(j, k)];
      o[j] = s;
    }
  }
  if (speed == nullptr) return out;
  if (!(speed->grid() == u.grid())) throw InvalidInput("speed and tensor field live on different grids");
  // h = e^{2 phi} g with phi = -log v: (delta u)_j = v^2 [d_k u_jk - d_j phi tr u + d_m phi u_jm].
  ScalarField phi(u.grid());
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const double v = (*speed)(n, 0);
    if (!(v > 0.0)) throw InvalidInput("speed must be positive");
    phi(n, 0) = -std::log(v);
  }
  const CovectorField gphi = gradient(phi, backend);
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const double v2 = (*speed)(n, 0) * (*speed)(n, 0);
    const double* g = gphi.node(n);
    const double* un = u.node(n);
    const double tr = un[0] + un[1] + un[2];
    double* o = out.node(n);
    for (int j = 0; j < 3; ++j) {
      double s = o[j] - g[j] * tr;
      for (int m = 0; m < 3; ++m) s += g[m] * un[sym_index(j, m)];
      o[j] = v2 * s;
    }
  }
  return out;
}

ScalarField trace(const SymField2& u, const ScalarField* speed) {
  ScalarField out(u.grid());
  if (speed != nullptr && !(speed->grid() == u.grid())) {
    throw InvalidInput("speed and tensor field live on different grids");
  }
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const double* p = u.node(n);
    const double w = speed ? (*speed)(n, 0) * (*speed)(n, 0) : 1.0;
    out(n, 0) = w * (p[0] + p[1] + p[2]);
  }
  return out;
}

ScalarField trace(const SymField2& u, double speed) {
  ScalarField out(u.grid());
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const double* p = u.node(n);
    out(n, 0) = speed * speed * (p[0] + p[1] + p[2]);
  }
  return out;
}

void solenoidal_project(FourierSymField2& u) {
  const Spectrum& spec = u.spectrum();
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const auto ijk = spec.unravel(n);
    project_node(spec.frequency(ijk[0], ijk[1], ijk[2]), u.node(n));
  }
}

SymField2 solenoidal_project(const SymField2& u) {
  FourierSymField2 hat = FourierSymField2::transform(u);
  solenoidal_project(hat);
  return hat.inverse();
}

FourierSymField2 inner_derivative_fourier(const CovectorField& v) {
  FourierSymField2 out(v.grid());
  const Spectrum& spec = out.spectrum();
  const std::vector<Complex> vh = spec.forward(v.values().data(), 3);
  for (std::size_t n = 0; n < out.node_count(); ++n) {
    const auto ijk = spec.unravel(n);
    const Vec3 y = spec.frequency(ijk[0], ijk[1], ijk[2]);
    const Complex* vn = vh.data() + n * 3;
    Complex* o = out.node(n);
    for (int s = 0; s < 6; ++s) {
      const int j = kSymPairs[s][0];
      const int k = kSymPairs[s][1];
      o[s] = 0.5 * kI * (y[j] * vn[k] + y[k] * vn[j]);
    }
  }
  return out;
}

std::vector<Complex> divergence_fourier(const FourierSymField2& u) {
  const Spectrum& spec = u.spectrum();
  std::vector<Complex> out(u.node_count() * 3);
  for (std::size_t n = 0; n < u.node_count(); ++n) {
    const auto ijk = spec.unravel(n);
    const Vec3 y = spec.frequency(ijk[0], ijk[1], ijk[2]);
    const Complex* un = u.node(n);
    for (int j = 0; j < 3; ++j) {
      Complex s = 0.0;
      for (int k = 0; k < 3; ++k) s += y[k] * un[sym_index(j, k)];
      out[n * 3 + j] = kI * s;
    }
  }
  return out;
}

template <int NC>
void require_interior_support(const Field<NC>& f, double margin, double support_tol, const char* what) {
  const double peak = f.max_abs();
  if (peak == 0.0) return;
  const Grid3& g = f.grid();
  for (std::size_t n = 0; n < f.node_count(); ++n) {
    if (g.domain().signed_distance(g.position(n)) <= -margin) continue;
    const double* p = f.node(n);
    for (int c = 0; c < NC; ++c) {
      if (std::abs(p[c]) > support_tol * peak) {
        throw InvalidInput(std::string(what) + " is not supported strictly inside the domain margin");
      }
    }
  }
}

template void require_interior_support<1>(const Field<1>&, double, double, const char*);
template void require_interior_support<3>(const Field<3>&, double, double, const char*);
template void require_interior_support<6>(const Field<6>&, double, double, const char*);

SymField2 inc_potential(const SymField2& A, const IncOptions& options) {
  require_interior_support(A, options.margin, options.support_tol, "inc potential");
  FourierSymField2 hat = FourierSymField2::transform(A);
  const Spectrum& spec = hat.spectrum();
  for (std::size_t n = 0; n < hat.node_count(); ++n) {
    const auto ijk = spec.unravel(n);
    const Vec3 y = spec.frequency(ijk[0], ijk[1], ijk[2]);
    Complex* a = hat.node(n);
    Complex Aq[3][3];
    for (int q = 0; q < 3; ++q) {
      for (int s = 0; s < 3; ++s) Aq[q][s] = a[sym_index(q, s)];
    }
    Complex R[6];
    for (int t = 0; t < 6; ++t) {
      const int j = kSymPairs[t][0];
      const int k = kSymPairs[t][1];
      Complex sum = 0.0;
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) {
          const int e1 = levi(j, p, q);
          if (e1 == 0) continue;
          for (int r = 0; r < 3; ++r) {
            for (int s = 0; s < 3; ++s) {
              const int e2 = levi(k, r, s);
              if (e2 == 0) continue;
              sum += static_cast<double>(e1 * e2) * y[p] * y[r] * Aq[q][s];
            }
          }
        }
      }
      R[t] = -sum;  // (i y_p)(i y_r) = -y_p y_r
    }
    for (int t = 0; t < 6; ++t) a[t] = R[t];
  }
  SymField2 out = hat.inverse();
  out.mask_outside_domain();
  return out;
}

double Bump::profile_value(const Vec3& x) const {
  const Vec3 r = x - center;
  const double r2 = dot(r, r);
  if (profile == Profile::gaussian) return std::exp(-0.5 * r2 / (width * width));
  const double t = 1.0 - r2 / (width * width);
  if (t <= 0.0) return 0.0;
  return std::pow(t, power);
}

std::vector<Bump> random_bumps(std::mt19937_64& rng, const BumpSpec& spec, int components) {
  if (components < 1 || components > 6) throw InvalidInput("bump component count must be in [1, 6]");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  std::vector<Bump> out;
  out.reserve(static_cast<std::size_t>(spec.count));
  for (int b = 0; b < spec.count; ++b) {
    Bump bump;
    bump.profile = spec.profile;
    bump.power = spec.power;
    Vec3 c;
    do {
      c = {unit(rng), unit(rng), unit(rng)};
    } while (dot(c, c) > 1.0);
    bump.center = spec.center_radius * c;
    bump.width = spec.width_min + (spec.width_max - spec.width_min) * frac(rng);
    for (int k = 0; k < components; ++k) bump.amplitude[k] = unit(rng);
    out.push_back(bump);
  }
  return out;
}

SymField2 random_residual_stress(const Grid3& grid, std::mt19937_64& rng, const BumpSpec& spec,
                                 const IncOptions& options) {
  std::vector<Bump> bumps = random_bumps(rng, spec, 6);
  for (Bump& b : bumps) b.center = b.center + grid.domain().centroid();
  return inc_potential(sample_bumps<6>(grid, bumps), options);
}

}  // namespace stresstomo
