#include "stresstomo/inversion.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "stresstomo/errors.hpp"

namespace stresstomo {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Orthonormal basis (u1, u2) of the plane orthogonal to y.
std::pair<Vec3, Vec3> perp_basis(const Vec3& y) {
  const Vec3 yh = normalized(y);
  const Vec3 u1 = any_orthogonal(yh);
  return {u1, cross(yh, u1)};
}

/// Stored components of A u1u1 + B u2u2 + C (u1u2 + u2u1).
void assemble_2form(const Vec3& u1, const Vec3& u2, const Complex* abc, Complex* out) {
  for (int s = 0; s < 6; ++s) {
    const int j = kSymPairs[s][0];
    const int k = kSymPairs[s][1];
    out[s] = abc[0] * (u1[j] * u1[k]) + abc[1] * (u2[j] * u2[k]) + abc[2] * (u1[j] * u2[k] + u2[j] * u1[k]);
  }
}

Complex form_at(const Complex* m, const Vec3& a, const Vec3& b) {
  Complex s = 0.0;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) s += a[j] * b[k] * m[sym_index(j, k)];
  }
  return s;
}

double ramlak(int n, double dt) {
  if (n == 0) return 1.0 / (4.0 * dt * dt);
  if (n % 2 == 0) return 0.0;
  const double pi = std::numbers::pi;
  return -1.0 / (static_cast<double>(n) * n * pi * pi * dt * dt);
}

void require_same_grids(const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families) {
  if (families.size() != 3) throw InvalidInput("solenoidal inversion needs the three line families");
  for (int k = 0; k < 3; ++k) {
    if (families[static_cast<std::size_t>(k)]->axis() != k) throw InvalidInput("line families must be ordered by axis");
    if (!(families[static_cast<std::size_t>(k)]->grid() == families[0]->grid())) {
      throw InvalidInput("line families live on different grids");
    }
  }
}

double field_l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------- report

ReconReport::ReconReport(std::string pipeline) { doc_["pipeline"] = std::move(pipeline); }

void ReconReport::add_stage(const std::string& name, double residual, double seconds, nlohmann::json extra) {
  nlohmann::json s = {{"name", name}, {"residual", residual}, {"seconds", seconds}};
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) s[it.key()] = it.value();
  }
  doc_["stages"].push_back(std::move(s));
}

bool ReconReport::has_stage(const std::string& name) const {
  for (const auto& s : doc_.at("stages")) {
    if (s.at("name") == name) return true;
  }
  return false;
}

const nlohmann::json& ReconReport::stage(const std::string& name) const {
  for (const auto& s : doc_.at("stages")) {
    if (s.at("name") == name) return s;
  }
  throw InvalidInput("report has no stage '" + name + "'");
}

ReconReport ReconReport::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("pipeline") || !j.contains("stages") || !j.at("stages").is_array()) {
    throw InvalidInput("not a reconstruction report");
  }
  ReconReport r;
  r.doc_ = j;
  return r;
}

// ---------------------------------------------------------------- filtered backprojection

std::vector<double> filtered_backprojection_padded(const Sinogram& data, const CoordinatePlaneFamily& family,
                                                   const Spectrum& spec, Exec exec) {
  if (data.kind != RecordKind::scalar) throw InvalidInput("backprojection expects scalar records");
  const Grid3& grid = family.grid();
  if (!(spec.grid() == grid)) throw InvalidInput("spectrum and family grids differ");
  const int axis = family.axis();
  const int au = family.axis_u();
  const int aw = family.axis_w();
  if (family.slices() != grid.dims()[axis]) {
    throw InvalidInput("backprojection needs one slice per grid plane");
  }
  const int A = family.angles();
  const int O = family.offsets();
  const double dt = family.offset_spacing();
  const double rho = -family.offset_coordinate(0);
  const Vec3 c = family.center();
  const auto& P = spec.padded();

  double tmax = 0.0;
  for (int i = 0; i < P[au]; ++i) {
    for (int j = 0; j < P[aw]; ++j) {
      const double du = spec.coordinate(au, i) - c[au];
      const double dw = spec.coordinate(aw, j) - c[aw];
      tmax = std::max(tmax, std::hypot(du, dw));
    }
  }
  const int K = std::max(0, static_cast<int>(std::ceil((tmax - rho) / dt))) + 2;
  const int E = O + 2 * K;

  std::vector<double> kernel(static_cast<std::size_t>(2 * (O + K) + 1));
  for (int n = -(O + K); n <= O + K; ++n) kernel[static_cast<std::size_t>(n + O + K)] = ramlak(n, dt);

  std::vector<Vec3> normals(static_cast<std::size_t>(A));
  for (int j = 0; j < A; ++j) normals[static_cast<std::size_t>(j)] = family.normal(j);

  const std::vector<double> dense = data.dense(family.size());
  std::vector<double> out(spec.padded_count(), 0.0);
  const double bp = std::numbers::pi / A;
  const int slices = family.slices();

  auto do_slice = [&](int s) {
    std::vector<double> q(static_cast<std::size_t>(A) * E, 0.0);
    for (int j = 0; j < A; ++j) {
      const double* p = dense.data() + family.slot(s, j, 0);
      double* qj = q.data() + static_cast<std::size_t>(j) * E;
      for (int e = 0; e < E; ++e) {
        double acc = 0.0;
        for (int o = 0; o < O; ++o) acc += kernel[static_cast<std::size_t>(e - K - o + O + K)] * p[o];
        qj[e] = dt * acc;
      }
    }
    std::array<int, 3> idx{};
    idx[axis] = s;
    for (int i = 0; i < P[au]; ++i) {
      const double du = spec.coordinate(au, i) - c[au];
      idx[au] = i;
      for (int k = 0; k < P[aw]; ++k) {
        const double dw = spec.coordinate(aw, k) - c[aw];
        idx[aw] = k;
        double acc = 0.0;
        for (int j = 0; j < A; ++j) {
          const Vec3& n = normals[static_cast<std::size_t>(j)];
          const double t = du * n[au] + dw * n[aw];
          const double u = (t + rho) / dt + K;
          const int e0 = static_cast<int>(std::floor(u));
          if (e0 < 0 || e0 + 1 >= E) continue;
          const double f = u - e0;
          const double* qj = q.data() + static_cast<std::size_t>(j) * E;
          acc += (1.0 - f) * qj[e0] + f * qj[e0 + 1];
        }
        out[spec.index(idx[0], idx[1], idx[2])] = bp * acc;
      }
    }
  };

  if (exec == Exec::serial) {
    for (int s = 0; s < slices; ++s) do_slice(s);
  } else {
#pragma omp parallel for schedule(static)
    for (int s = 0; s < slices; ++s) do_slice(s);
  }
  return out;
}

ScalarField filtered_backprojection(const Sinogram& data, const CoordinatePlaneFamily& family, Exec exec) {
  const Spectrum spec(family.grid());
  const std::vector<double> padded = filtered_backprojection_padded(data, family, spec, exec);
  std::vector<Complex> tmp(padded.begin(), padded.end());
  ScalarField out(family.grid());
  spec.crop_real(tmp, 1, out.values().data());
  return out;
}

// ---------------------------------------------------------------- solenoidal inversion

SolenoidalResult invert_I_solenoidal_spectrum(const std::vector<Sinogram>& data,
                                              const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families,
                                              const SolenoidalOptions& options, Exec exec) {
  require_same_grids(families);
  if (data.size() != 3) throw InvalidInput("solenoidal inversion needs one sinogram per line family");
  const Grid3& grid = families[0]->grid();
  for (const auto& f : families) {
    if (f->offset_spacing() > grid.max_spacing() * (1.0 + 1e-9)) {
      throw InvalidInput("line offsets are coarser than the grid spacing");
    }
  }

  SolenoidalResult res{FourierSymField2(grid, options.pad_factor)};
  const Spectrum& spec = res.spectrum.spectrum();
  const std::size_t N = spec.padded_count();

  std::array<std::vector<Complex>, 3> G;
  for (int k = 0; k < 3; ++k) {
    const std::vector<double> g =
        filtered_backprojection_padded(data[static_cast<std::size_t>(k)], *families[static_cast<std::size_t>(k)], spec, exec);
    G[static_cast<std::size_t>(k)].assign(g.begin(), g.end());
    spec.forward_inplace(G[static_cast<std::size_t>(k)], 1);
  }

  std::vector<std::uint8_t> degenerate(N, 0);
  std::vector<double> cond(N, 0.0);

  // Normal matrix of the node system; rhs for real and imaginary parts together.
  auto node_system = [&](std::size_t n, const Vec3& y, Eigen::Matrix3d& MtM, Eigen::Vector3cd& Mtb) {
    const auto [u1, u2] = perp_basis(y);
    const auto dirs = line_family_directions(y);
    MtM.setZero();
    Mtb.setZero();
    for (int k = 0; k < 3; ++k) {
      if (!dirs[static_cast<std::size_t>(k)]) continue;
      const Vec3& xi = *dirs[static_cast<std::size_t>(k)];
      const double c = dot(xi, u1);
      const double s = dot(xi, u2);
      const Eigen::Vector3d row(c * c, s * s, 2.0 * c * s);
      MtM += row * row.transpose();
      Mtb += row.cast<Complex>() * G[static_cast<std::size_t>(k)][n];
    }
  };

  auto solve_pass = [&](std::size_t n) {
    Complex* out = res.spectrum.node(n);
    const auto ijk = spec.unravel(n);
    for (int c = 0; c < 6; ++c) out[c] = 0.0;
    if (spec.is_nyquist(0, ijk[0]) || spec.is_nyquist(1, ijk[1]) || spec.is_nyquist(2, ijk[2])) return;
    const Vec3 y = spec.frequency(ijk[0], ijk[1], ijk[2]);
    if (dot(y, y) == 0.0) return;
    Eigen::Matrix3d MtM;
    Eigen::Vector3cd Mtb;
    node_system(n, y, MtM, Mtb);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(MtM, Eigen::EigenvaluesOnly);
    const double lmax = eig.eigenvalues()(2);
    const double lmin = std::max(eig.eigenvalues()(0), 0.0);
    if (lmin <= 1e-12 * lmax) {
      degenerate[n] = 1;
      return;
    }
    cond[n] = std::sqrt(lmax / lmin);
    const Eigen::Matrix3d A = MtM + options.tikhonov * lmax * Eigen::Matrix3d::Identity();
    const Eigen::Vector3cd x = A.ldlt().solve(Mtb);
    const auto [u1, u2] = perp_basis(y);
    const Complex abc[3] = {x(0), x(1), x(2)};
    assemble_2form(u1, u2, abc, out);
  };

  const auto count = static_cast<std::ptrdiff_t>(N);
  if (exec == Exec::serial) {
    for (std::ptrdiff_t n = 0; n < count; ++n) solve_pass(static_cast<std::size_t>(n));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < count; ++n) solve_pass(static_cast<std::size_t>(n));
  }

  // Coordinate-plane nodes: the unresolved direction is taken from the generic neighbours,
  // the resolved ones from the data.
  const auto& P = spec.padded();
  auto fill_pass = [&](std::size_t n) {
    if (!degenerate[n]) return;
    const auto ijk = spec.unravel(n);
    const Vec3 y = spec.frequency(ijk[0], ijk[1], ijk[2]);
    Complex prior[6] = {};
    int used = 0;
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int dk = -1; dk <= 1; ++dk) {
          const int i = (ijk[0] + di + P[0]) % P[0];
          const int j = (ijk[1] + dj + P[1]) % P[1];
          const int k = (ijk[2] + dk + P[2]) % P[2];
          const std::size_t m = spec.index(i, j, k);
          if (degenerate[m] || cond[m] == 0.0) continue;
          const Complex* v = res.spectrum.node(m);
          for (int c = 0; c < 6; ++c) prior[c] += v[c];
          ++used;
        }
      }
    }
    if (used > 0) {
      for (Complex& c : prior) c /= static_cast<double>(used);
    }
    project_node(y, prior);
    const auto [u1, u2] = perp_basis(y);
    const Eigen::Vector3cd x0(form_at(prior, u1, u1), form_at(prior, u2, u2), form_at(prior, u1, u2));
    Eigen::Matrix3d MtM;
    Eigen::Vector3cd Mtb;
    node_system(n, y, MtM, Mtb);
    const double mu = 1e-8 * std::max(MtM.norm(), 1e-300);
    const Eigen::Matrix3d A = MtM + mu * Eigen::Matrix3d::Identity();
    const Eigen::Vector3cd x = A.ldlt().solve(Mtb + mu * x0);
    const Complex abc[3] = {x(0), x(1), x(2)};
    assemble_2form(u1, u2, abc, res.spectrum.node(n));
  };
  if (exec == Exec::serial) {
    for (std::ptrdiff_t n = 0; n < count; ++n) fill_pass(static_cast<std::size_t>(n));
  } else {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t n = 0; n < count; ++n) fill_pass(static_cast<std::size_t>(n));
  }

  int generic = 0;
  double div = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    if (degenerate[n]) ++res.degenerate_nodes;
    if (cond[n] > 0.0) {
      ++generic;
      res.max_condition = std::max(res.max_condition, cond[n]);
      if (cond[n] > options.condition_threshold) ++res.poorly_conditioned_nodes;
    }
    const auto ijk = spec.unravel(n);
    const Vec3 y = spec.frequency(ijk[0], ijk[1], ijk[2]);
    const Complex* m = res.spectrum.node(n);
    double mag = 0.0;
    Complex ym[3] = {};
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        ym[j] += y[k] * m[sym_index(j, k)];
        mag = std::max(mag, std::abs(m[sym_index(j, k)]));
      }
    }
    const double ny = norm(y);
    if (mag > 0.0 && ny > 0.0) {
      const double r = std::sqrt(std::norm(ym[0]) + std::norm(ym[1]) + std::norm(ym[2])) / (mag * ny);
      div = std::max(div, r);
    }
  }
  res.spectral_divergence = div;
  if (generic > 0 && res.poorly_conditioned_nodes > options.max_bad_fraction * generic) {
    throw ConditionError("insufficient angular sampling: " + std::to_string(res.poorly_conditioned_nodes) +
                         " Fourier nodes exceed the condition threshold");
  }
  return res;
}

SymField2 invert_I_solenoidal(const std::vector<Sinogram>& data,
                              const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families,
                              const SolenoidalOptions& options, Exec exec) {
  return invert_I_solenoidal_spectrum(data, families, options, exec).spectrum.inverse();
}

// ---------------------------------------------------------------- trace detangling

void tangle_node(const Vec3& y, Complex* f, double a) {
  const Sym3 eps = tangential_projector(y);
  const Complex tr = f[0] + f[1] + f[2];
  for (int c = 0; c < 6; ++c) f[c] += a * tr * eps[c];
}

void detangle_node(const Vec3& y, Complex* m, double a) {
  const Sym3 eps = tangential_projector(y);
  // tr eps = 2 away from y = 0, where eps vanishes and m passes through.
  const double tr_eps = eps[0] + eps[1] + eps[2];
  const Complex trf = (m[0] + m[1] + m[2]) / (1.0 + a * tr_eps);
  for (int c = 0; c < 6; ++c) m[c] -= a * trf * eps[c];
}

void require_detangle_unique(double a, double floor) {
  if (std::abs(1.0 + 2.0 * a) < floor) {
    throw NonUniqueError("trace detangling is not unique: 1 + 2a vanishes (nu1+nu2+nu3+nu4 = -1); "
                         "every field S(alpha g) is invisible");
  }
}

void detangle_trace(FourierSymField2& m, double a, double floor) {
  require_detangle_unique(a, floor);
  const Spectrum& spec = m.spectrum();
  for (std::size_t n = 0; n < m.node_count(); ++n) {
    const auto ijk = spec.unravel(n);
    detangle_node(spec.frequency(ijk[0], ijk[1], ijk[2]), m.node(n), a);
  }
}

SymField2 detangle_trace(const SymField2& m, double a, double floor) {
  require_detangle_unique(a, floor);
  FourierSymField2 hat = FourierSymField2::transform(m);
  detangle_trace(hat, a, floor);
  return hat.inverse();
}

// ---------------------------------------------------------------- compressional pipeline

double relative_divergence(const SymField2& R) {
  const CovectorField d = divergence(R);
  const std::vector<double> p = partials(R.values().data(), 6, R.grid(), DerivativeBackend::spectral);
  double num = 0.0;
  for (double v : d.values()) num += v * v;
  double den = 0.0;
  for (std::size_t n = 0; n < R.node_count(); ++n) {
    for (int a = 0; a < 3; ++a) {
      for (int c = 0; c < 6; ++c) {
        const double v = p[(n * 3 + static_cast<std::size_t>(a)) * 6 + static_cast<std::size_t>(c)];
        den += (c < 3 ? 1.0 : 2.0) * v * v;
      }
    }
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

PipelineResult pwave_pipeline(const std::vector<Sinogram>& data,
                              const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families,
                              const MaterialParams& params, const PWaveOptions& options, const SymField2* truth,
                              Exec exec) {
  const auto t_all = Clock::now();
  const PointParams p = params.point();
  const ConditionReport cond = check_pwave_conditions(params, options.condition_floor);
  for (const char* name : {"nzero1", "nzero2"}) {
    const ConditionResult& c = cond.get(name);
    if (!c.pass) throw ConditionError("condition " + c.name + " fails: " + c.detail);
  }
  const double a = pwave_a(p);
  require_detangle_unique(a, options.condition_floor);

  PipelineResult out{SymField2(families.at(0)->grid()), ReconReport("pwave")};
  out.report.set("conditions", cond.to_json());
  out.report.set("a", a);
  out.report.set("scale", pwave_scale(p));

  const double s = pwave_scale(p);
  // One pass of the Fourier inverse: solenoidal part, detangling, rescale, support mask.
  auto approximate_inverse = [&](const std::vector<Sinogram>& d, bool record) {
    auto t0 = Clock::now();
    SolenoidalResult sol = invert_I_solenoidal_spectrum(d, families, options.solenoidal, exec);
    if (record) {
      out.report.add_stage("solenoidal", sol.spectral_divergence, seconds_since(t0),
                           {{"degenerate_nodes", sol.degenerate_nodes},
                            {"poorly_conditioned_nodes", sol.poorly_conditioned_nodes},
                            {"max_condition", sol.max_condition}});
    }
    t0 = Clock::now();
    detangle_trace(sol.spectrum, a, options.condition_floor);
    SymField2 f = sol.spectrum.inverse();
    f *= 1.0 / s;
    if (options.mask || options.refinement_iterations > 0) f.mask_outside_domain();
    if (record) out.report.add_stage("detangle", relative_divergence(f), seconds_since(t0));
    return f;
  };

  double data_norm2 = 0.0;
  for (const Sinogram& d : data) {
    for (double v : d.values) data_norm2 += v * v;
  }
  auto misfit = [&](const SymField2& R, std::vector<Sinogram>& residual) {
    double r2 = 0.0;
    residual.clear();
    for (std::size_t k = 0; k < families.size(); ++k) {
      Sinogram model = pwave_data(R, params, *families[k], exec, options.condition_floor);
      if (model.slots != data[k].slots) throw NumericalError("refinement: forward rays differ from the data rays");
      for (std::size_t i = 0; i < model.values.size(); ++i) {
        model.values[i] = data[k].values[i] - model.values[i];
        r2 += model.values[i] * model.values[i];
      }
      residual.push_back(std::move(model));
    }
    return data_norm2 > 0.0 ? std::sqrt(r2 / data_norm2) : 0.0;
  };

  out.R = approximate_inverse(data, true);
  if (options.refinement_iterations > 0) {
    // The single pass misses the coordinate-plane nodes and the periodization of the non-compact
    // solenoidal part; iterating on the data misfit under the support constraint removes both.
    const auto t0 = Clock::now();
    std::vector<Sinogram> residual;
    double rel = misfit(out.R, residual);
    nlohmann::json history = nlohmann::json::array({rel});
    for (int it = 0; it < options.refinement_iterations && rel > options.refinement_tolerance; ++it) {
      SymField2 next = out.R;
      next += approximate_inverse(residual, false);
      std::vector<Sinogram> next_residual;
      const double next_rel = misfit(next, next_residual);
      // Keep the last estimate once the misfit stops decreasing (noise floor).
      if (!(next_rel < rel)) break;
      out.R = std::move(next);
      residual = std::move(next_residual);
      rel = next_rel;
      history.push_back(rel);
    }
    out.report.add_stage("refinement", rel, seconds_since(t0), {{"misfit_history", history}});
  }
  const double div = relative_divergence(out.R);
  out.report.set("divergence_residual", div);

  if (truth != nullptr) {
    out.report.set("relative_error", relative_error(out.R, *truth));
  }
  out.report.set("seconds", seconds_since(t_all));
  return out;
}

// ---------------------------------------------------------------- shear-wave stages

const std::array<std::array<double, 6>, 5>& tracefree_basis() {
  static const std::array<std::array<double, 6>, 5> basis = [] {
    const double r2 = 1.0 / std::sqrt(2.0);
    const double r6 = 1.0 / std::sqrt(6.0);
    return std::array<std::array<double, 6>, 5>{{{r2, -r2, 0, 0, 0, 0},
                                                 {r6, r6, -2.0 * r6, 0, 0, 0},
                                                 {0, 0, 0, r2, 0, 0},
                                                 {0, 0, 0, 0, r2, 0},
                                                 {0, 0, 0, 0, 0, r2}}};
  }();
  return basis;
}

namespace {

struct KCoeff {
  void operator()(const Ray& ray, std::size_t i, double* c) const {
    const Vec3 a = ray.speed[i] * ray.frame1[i];
    const Vec3 b = ray.speed[i] * ray.frame2[i];
    const Sym3 aa = bilinear_coeffs(a, a);
    const Sym3 bb = bilinear_coeffs(b, b);
    const Sym3 ab = bilinear_coeffs(a, b);
    for (int k = 0; k < 6; ++k) {
      c[k] = 0.5 * (aa[k] - bb[k]);
      c[6 + k] = ab[k];
    }
  }
};

/// Coefficient vector (5 per node inside M) <-> symmetric field.
class TraceFreeMap {
 public:
  explicit TraceFreeMap(const Grid3& grid) : grid_(grid) {
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      if (grid.domain().contains(grid.position(n))) inside_.push_back(n);
    }
  }
  std::size_t size() const { return inside_.size() * 5; }
  void expand(const std::vector<double>& x, SymField2& u) const {
    for (double& v : u.values()) v = 0.0;
    const auto& B = tracefree_basis();
    for (std::size_t i = 0; i < inside_.size(); ++i) {
      double* o = u.node(inside_[i]);
      for (int b = 0; b < 5; ++b) {
        const double xb = x[i * 5 + static_cast<std::size_t>(b)];
        for (int c = 0; c < 6; ++c) o[c] += xb * B[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)];
      }
    }
  }
  /// Transpose of expand under the plain stored dot product.
  void reduce(const SymField2& u, std::vector<double>& x) const {
    const auto& B = tracefree_basis();
    for (std::size_t i = 0; i < inside_.size(); ++i) {
      const double* v = u.node(inside_[i]);
      for (int b = 0; b < 5; ++b) {
        double s = 0.0;
        for (int c = 0; c < 6; ++c) s += B[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)] * v[c];
        x[i * 5 + static_cast<std::size_t>(b)] = s;
      }
    }
  }

 private:
  Grid3 grid_;
  std::vector<std::size_t> inside_;
};

double dotv(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

CgResult invert_K_tracefree(const Sinogram& kdata, const RayFamily& family, const Grid3& grid,
                            const CgOptions& options, Exec exec) {
  if (kdata.kind != RecordKind::kdata) throw InvalidInput("trace-free inversion expects (d, o) records");
  const auto op = make_ray_operator<6, 2>(family, KCoeff{}, options.interp);
  const TraceFreeMap map(grid);
  const std::vector<double> d = kdata.dense(family.size());

  SymField2 work(grid);
  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    map.expand(x, work);
    op.forward(work, y.data(), nullptr, exec);
  };
  auto apply_t = [&](const std::vector<double>& r, std::vector<double>& x) {
    for (double& v : work.values()) v = 0.0;
    op.adjoint(r.data(), work, exec);
    map.reduce(work, x);
  };

  CgResult res{SymField2(grid)};
  std::vector<double> x(map.size(), 0.0);
  std::vector<double> s(map.size());
  apply_t(d, s);
  const double norm_atd = std::sqrt(dotv(s, s));
  const double norm_d = field_l2(d);
  if (norm_d == 0.0 || norm_atd == 0.0) {
    res.converged = true;
    return res;
  }
  const double lambda = options.lambda_factor * norm_atd / norm_d;
  res.lambda = lambda;
  std::vector<double> r = d;
  std::vector<double> p = s;
  std::vector<double> q(d.size());
  double gamma = dotv(s, s);
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    apply(p, q);
    const double denom = dotv(q, q) + lambda * dotv(p, p);
    if (!(denom > 0.0)) break;
    const double alpha = gamma / denom;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= alpha * q[i];
    apply_t(r, s);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] -= lambda * x[i];
    const double gamma_new = dotv(s, s);
    res.relative_residual = std::sqrt(gamma_new) / norm_atd;
    if (res.relative_residual <= options.tolerance) {
      res.converged = true;
      ++it;
      break;
    }
    const double beta = gamma_new / gamma;
    gamma = gamma_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = s[i] + beta * p[i];
  }
  res.iterations = it;
  if (!res.converged && options.require_convergence) {
    throw NumericalError("conjugate gradients did not reach tolerance within " +
                         std::to_string(options.max_iterations) + " iterations (residual " +
                         std::to_string(res.relative_residual) + ")");
  }
  map.expand(x, res.field);
  double tr = 0.0;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    const double* v = res.field.node(n);
    tr = std::max(tr, std::abs(v[0] + v[1] + v[2]));
  }
  const double mx = res.field.max_abs();
  res.max_trace = mx > 0.0 ? tr / mx : 0.0;
  return res;
}

TraceResult recover_trace(const Sinogram& ldata, const SymField2& tracefree, double a,
                          const CoordinatePlaneFamily& family, double floor, Exec exec) {
  if (std::abs(a + 2.0 / 3.0) < floor) {
    throw NonUniqueError("trace recovery is not unique: 3a + 2 vanishes");
  }
  if (ldata.kind != RecordKind::quadform) throw InvalidInput("trace recovery expects quadratic-form records");
  const Sinogram J = transverse_transform(tracefree, family, exec);
  const Sinogram I = longitudinal_transform(tracefree, family, exec);
  if (J.slots != ldata.slots) throw InvalidInput("quadratic-form data and family rays disagree");
  Sinogram rhs = ldata.with_kind(RecordKind::scalar);
  double diff2 = 0.0;
  double mean2 = 0.0;
  for (std::size_t i = 0; i < ldata.size(); ++i) {
    const double* l = ldata.record(i);
    const double* j = J.record(i);
    const double in = I.record(i)[0];
    const double p1 = l[0] - j[0] - in;
    const double p2 = l[1] - j[1] - in;
    rhs.record(i)[0] = 0.5 * (p1 + p2);
    diff2 += (p1 - p2) * (p1 - p2);
    mean2 += 0.25 * (p1 + p2) * (p1 + p2);
  }
  TraceResult res{filtered_backprojection(rhs, family, exec)};
  res.trace *= 1.0 / (a + 2.0 / 3.0);
  res.trace.mask_outside_domain();
  res.eta_inconsistency = mean2 > 0.0 ? std::sqrt(diff2 / mean2) : 0.0;
  return res;
}

PipelineResult swave_pipeline(const Sinogram& dense_propagators, const RayFamily& dense_family,
                              const Sinogram& plane_propagators, const CoordinatePlaneFamily& plane_family,
                              const MaterialParams& params, const SWaveOptions& options, const SymField2* truth,
                              Exec exec) {
  const auto t_all = Clock::now();
  const PointParams p = params.point();
  const ConditionReport cond = check_swave_conditions(params, options.condition_floor);
  if (!cond.get("nu4_nonzero").pass) throw ConditionError("shear-wave inversion needs nu4 != 0");
  const double a = swave_a(p);
  const double fscale = swave_scale(p);
  const Grid3& grid = plane_family.grid();

  double scale = options.scale;
  for (const Sinogram* s : {&dense_propagators, &plane_propagators}) {
    if (s->meta.contains("scale") && std::abs(s->meta.at("scale").get<double>() - scale) > 1e-12 * scale) {
      throw InvalidInput("propagator data were generated with a different Born scale");
    }
  }

  PipelineResult out{SymField2(grid), ReconReport("swave")};
  out.report.set("conditions", cond.to_json());
  out.report.set("a", a);
  out.report.set("scale", scale);
  out.report.set("born_max_unitarity_defect",
                 std::max(dense_propagators.meta.value("max_unitarity_defect", 0.0),
                          plane_propagators.meta.value("max_unitarity_defect", 0.0)));

  std::optional<SymField2> F_true;
  std::optional<SymField2> Ft_true;
  std::optional<ScalarField> tr_true;
  if (truth != nullptr) {
    F_true = fscale * *truth;
    Ft_true = *F_true;
    tr_true = ScalarField(grid);
    for (std::size_t n = 0; n < grid.node_count(); ++n) {
      double* v = Ft_true->node(n);
      const double t = v[0] + v[1] + v[2];
      (*tr_true)(n, 0) = t;
      for (int c = 0; c < 3; ++c) v[c] -= t / 3.0;
    }
  }

  auto t0 = Clock::now();
  const Sinogram K = truncated_reduce(born_reduce(dense_propagators, scale));
  CgResult cg = invert_K_tracefree(K, dense_family, grid, options.cg, exec);
  nlohmann::json cg_info = {{"iterations", cg.iterations}, {"lambda", cg.lambda}, {"max_trace", cg.max_trace}};
  if (Ft_true) cg_info["relative_error"] = relative_error(cg.field, *Ft_true);
  out.report.add_stage("tracefree", cg.relative_residual, seconds_since(t0), cg_info);

  t0 = Clock::now();
  const TraceResult tr = recover_trace(born_reduce(plane_propagators, scale), cg.field, a, plane_family,
                                       options.condition_floor, exec);
  nlohmann::json tr_info = {{"eta_inconsistency", tr.eta_inconsistency}};
  if (tr_true) tr_info["relative_error"] = relative_error(tr.trace, *tr_true);
  out.report.add_stage("trace", tr.eta_inconsistency, seconds_since(t0), tr_info);

  SymField2 F = cg.field;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    double* v = F.node(n);
    for (int c = 0; c < 3; ++c) v[c] += tr.trace(n, 0) / 3.0;
  }
  F *= 1.0 / fscale;
  if (options.mask) F.mask_outside_domain();
  out.R = std::move(F);
  out.report.set("divergence_residual", relative_divergence(out.R));
  if (truth != nullptr) out.report.set("relative_error", relative_error(out.R, *truth));
  out.report.set("seconds", seconds_since(t_all));
  return out;
}

// ---------------------------------------------------------------- Poincare inequality

PoincareResult verify_poincare(const CovectorField& v, const ConformalMetric& metric, double D, double margin,
                               double support_tol) {
  if (!(D > 0.0)) throw InvalidInput("diameter must be positive");
  require_interior_support<3>(v, margin, support_tol, "covector field");
  const Grid3& grid = v.grid();
  const std::vector<double> dv = partials(v.values().data(), 3, grid, DerivativeBackend::spectral);
  PoincareResult res;
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    const Vec3 x = grid.position(n);
    Vec3 gs;
    const double s = metric.speed_and_gradient(x, gs);
    const Vec3 phi = (-1.0 / s) * gs;  // gradient of -log v
    const double* vn = v.node(n);
    const Vec3 vv{vn[0], vn[1], vn[2]};
    const double pv = dot(phi, vv);
    double sym2 = 0.0;
    double tr = 0.0;
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        const double djk = 0.5 * (dv[(n * 3 + static_cast<std::size_t>(j)) * 3 + static_cast<std::size_t>(k)] +
                                  dv[(n * 3 + static_cast<std::size_t>(k)) * 3 + static_cast<std::size_t>(j)]) -
                           (vv[j] * phi[k] + vv[k] * phi[j] - (j == k ? pv : 0.0));
        sym2 += djk * djk;
        if (j == k) tr += djk;
      }
    }
    const double s2 = s * s;
    const double vol = 1.0 / (s2 * s);
    res.v_norm2 += s2 * dot(vv, vv) * vol;
    res.dv_norm2 += s2 * s2 * sym2 * vol;
    const double delta = s2 * tr;
    res.delta_v_norm2 += delta * delta * vol;
    worst = std::max(worst, delta * delta - 3.0 * s2 * s2 * sym2);
    scale = std::max(scale, 3.0 * s2 * s2 * sym2);
  }
  const double cv = grid.cell_volume();
  res.v_norm2 *= cv;
  res.dv_norm2 *= cv;
  res.delta_v_norm2 *= cv;
  const double rhs = D * D / 10.0 * (2.0 * res.dv_norm2 + res.delta_v_norm2);
  res.ratio = rhs > 0.0 ? res.v_norm2 / rhs : 0.0;
  res.pointwise_excess = scale > 0.0 ? worst / scale : 0.0;
  return res;
}

}  // namespace stresstomo
