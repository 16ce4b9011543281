#include "stresstomo/forward.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stresstomo/errors.hpp"
#include "stresstomo/io.hpp"

namespace stresstomo {
namespace {

using cd = std::complex<double>;

constexpr Sym3 kTraceCoeffs{1.0, 1.0, 1.0, 0.0, 0.0, 0.0};

Vec3 gamma_dot(const Ray& ray, std::size_t i) { return ray.speed[i] * ray.tangent[i]; }
Vec3 eta1(const Ray& ray, std::size_t i) { return ray.speed[i] * ray.frame1[i]; }
Vec3 eta2(const Ray& ray, std::size_t i) { return ray.speed[i] * ray.frame2[i]; }

void put_coeffs(double* c, const Sym3& s) {
  for (int k = 0; k < 6; ++k) c[k] = s[k];
}

struct ScalarCoeff {
  void operator()(const Ray&, std::size_t, double* c) const { c[0] = 1.0; }
};

struct LongitudinalCoeff {
  void operator()(const Ray& ray, std::size_t i, double* c) const {
    const Vec3 g = gamma_dot(ray, i);
    put_coeffs(c, bilinear_coeffs(g, g));
  }
};

struct TransverseCoeff {
  void operator()(const Ray& ray, std::size_t i, double* c) const {
    const Vec3 a = eta1(ray, i);
    const Vec3 b = eta2(ray, i);
    put_coeffs(c, bilinear_coeffs(a, a));
    put_coeffs(c + 6, bilinear_coeffs(b, b));
    put_coeffs(c + 12, bilinear_coeffs(a, b));
  }
};

struct TruncatedCoeff {
  void operator()(const Ray& ray, std::size_t i, double* c) const {
    const Vec3 a = eta1(ray, i);
    const Vec3 b = eta2(ray, i);
    const Sym3 aa = bilinear_coeffs(a, a);
    const Sym3 bb = bilinear_coeffs(b, b);
    for (int k = 0; k < 6; ++k) c[k] = 0.5 * (aa[k] - bb[k]);
    put_coeffs(c + 6, bilinear_coeffs(a, b));
  }
};

template <int NC, int W, class Coeff>
Sinogram linear_forward(const Field<NC>& f, const RayFamily& family, RecordKind kind, Coeff coeff, Exec exec) {
  const auto op = make_ray_operator<NC, W>(family, coeff);
  std::vector<double> dense(family.size() * W);
  std::vector<std::uint8_t> present(family.size());
  op.forward(f, dense.data(), present.data(), exec);
  return Sinogram::from_dense(kind, family, dense, present);
}

template <int NC, int W, class Coeff>
void linear_adjoint(const Sinogram& data, const RayFamily& family, RecordKind kind, Field<NC>& out, Coeff coeff,
                    Exec exec) {
  if (data.kind != kind) throw InvalidInput("sinogram kind " + to_string(data.kind) + ", expected " + to_string(kind));
  const auto op = make_ray_operator<NC, W>(family, coeff);
  const std::vector<double> dense = data.dense(family.size());
  op.adjoint(dense.data(), out, exec);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Mat2c mul(const Mat2c& a, const Mat2c& b) {
  return {a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
          a[2] * b[1] + a[3] * b[3]};
}

Mat2c axpy(const Mat2c& x, double h, const Mat2c& k) {
  Mat2c r;
  for (int i = 0; i < 4; ++i) r[i] = x[i] + h * k[i];
  return r;
}

/// A = -i scale G as a complex matrix.
Mat2c ode_matrix(const Gen2& g, double scale) {
  const cd m(0.0, -scale);
  return {m * g[0], m * g[2], m * g[2], m * g[1]};
}

Gen2 lerp3(const Gen2& a, const Gen2& m, const Gen2& b, double t) {
  // Quadratic through (0, a), (1/2, m), (1, b).
  const double la = 2.0 * (t - 0.5) * (t - 1.0);
  const double lm = -4.0 * t * (t - 1.0);
  const double lb = 2.0 * t * (t - 0.5);
  return {la * a[0] + lm * m[0] + lb * b[0], la * a[1] + lm * m[1] + lb * b[1], la * a[2] + lm * m[2] + lb * b[2]};
}

/// Tau steps between consecutive nodes recovered from trapezoid weights.
std::vector<double> tau_steps(const Ray& ray) {
  const std::size_t n = ray.size();
  std::vector<double> h(n > 0 ? n - 1 : 0);
  if (n < 2) return h;
  h[0] = 2.0 * ray.weight[0];
  for (std::size_t i = 1; i + 1 < n; ++i) h[i] = 2.0 * ray.weight[i] - h[i - 1];
  return h;
}

Mat2c integrate(const RytovGenerator& gen, const std::vector<double>& steps, double scale, int sub) {
  Mat2c U = identity2();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double h = steps[i] / sub;
    for (int k = 0; k < sub; ++k) {
      const double t0 = static_cast<double>(k) / sub;
      const double t1 = static_cast<double>(k + 1) / sub;
      const Gen2 g0 = lerp3(gen.nodes[i], gen.midpoints[i], gen.nodes[i + 1], t0);
      const Gen2 gm = lerp3(gen.nodes[i], gen.midpoints[i], gen.nodes[i + 1], 0.5 * (t0 + t1));
      const Gen2 g1 = lerp3(gen.nodes[i], gen.midpoints[i], gen.nodes[i + 1], t1);
      const Mat2c A0 = ode_matrix(g0, scale);
      const Mat2c Am = ode_matrix(gm, scale);
      const Mat2c A1 = ode_matrix(g1, scale);
      const Mat2c k1 = mul(A0, U);
      const Mat2c k2 = mul(Am, axpy(U, 0.5 * h, k1));
      const Mat2c k3 = mul(Am, axpy(U, 0.5 * h, k2));
      const Mat2c k4 = mul(A1, axpy(U, h, k3));
      for (int e = 0; e < 4; ++e) U[e] += (h / 6.0) * (k1[e] + 2.0 * k2[e] + 2.0 * k3[e] + k4[e]);
    }
  }
  return U;
}

void require_kind(const Sinogram& s, RecordKind k, const char* what) {
  if (s.kind != k) throw InvalidInput(std::string(what) + " expects a " + to_string(k) + " sinogram");
}

}  // namespace

int record_width(RecordKind kind) {
  switch (kind) {
    case RecordKind::scalar:
      return 1;
    case RecordKind::propagator:
      return 8;
    case RecordKind::kdata:
      return 2;
    case RecordKind::quadform:
      return 3;
  }
  return 0;
}

std::string to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::scalar:
      return "scalar";
    case RecordKind::propagator:
      return "propagator";
    case RecordKind::kdata:
      return "kdata";
    case RecordKind::quadform:
      return "quadform";
  }
  return "unknown";
}

RecordKind record_kind_from_string(const std::string& s) {
  for (RecordKind k : {RecordKind::scalar, RecordKind::propagator, RecordKind::kdata, RecordKind::quadform}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidInput("unknown sinogram record kind '" + s + "'");
}

std::vector<double> Sinogram::dense(std::size_t slot_count) const {
  const auto w = static_cast<std::size_t>(width());
  std::vector<double> out(slot_count * w, 0.0);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i] >= slot_count) throw InvalidInput("sinogram slot beyond the family size");
    std::copy_n(record(i), w, out.begin() + static_cast<std::ptrdiff_t>(slots[i] * w));
  }
  return out;
}

Sinogram Sinogram::from_dense(RecordKind kind, const RayFamily& family, const std::vector<double>& dense,
                              const std::vector<std::uint8_t>& present) {
  Sinogram s;
  s.kind = kind;
  s.manifest = family.manifest();
  const auto w = static_cast<std::size_t>(record_width(kind));
  for (std::size_t slot = 0; slot < present.size(); ++slot) {
    if (!present[slot]) continue;
    s.slots.push_back(slot);
    s.ids.push_back(family.id(slot));
    s.values.insert(s.values.end(), dense.begin() + static_cast<std::ptrdiff_t>(slot * w),
                    dense.begin() + static_cast<std::ptrdiff_t>((slot + 1) * w));
  }
  return s;
}

Sinogram Sinogram::with_kind(RecordKind k) const {
  Sinogram s;
  s.kind = k;
  s.manifest = manifest;
  s.slots = slots;
  s.ids = ids;
  s.meta = meta;
  s.values.assign(slots.size() * static_cast<std::size_t>(record_width(k)), 0.0);
  return s;
}

void Sinogram::write(const std::string& csv_path) const {
  std::string text = "family,slice,angle,offset,slot,kind";
  for (int r = 0; r < width(); ++r) text += ",v" + std::to_string(r);
  text += "\n";
  const std::string k = to_string(kind);
  for (std::size_t i = 0; i < size(); ++i) {
    const RayId& id = ids[i];
    text += std::to_string(id.family) + "," + std::to_string(id.slice) + "," + std::to_string(id.angle) + "," +
            std::to_string(id.offset) + "," + std::to_string(slots[i]) + "," + k;
    const double* r = record(i);
    for (int c = 0; c < width(); ++c) text += "," + fmt(r[c]);
    text += "\n";
  }
  write_text_file(csv_path, text);
  write_json_file(csv_path + ".manifest.json",
                  {{"kind", k}, {"width", width()}, {"rays", size()}, {"family", manifest}, {"meta", meta}});
}

Sinogram Sinogram::read(const std::string& csv_path) {
  const nlohmann::json side = read_json_file(csv_path + ".manifest.json");
  Sinogram s;
  try {
    s.kind = record_kind_from_string(side.at("kind").get<std::string>());
    s.manifest = side.at("family");
    s.meta = side.value("meta", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed sinogram manifest '" + csv_path + ".manifest.json': " + e.what());
  }
  std::istringstream in(read_text_file(csv_path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("family,slice,angle,offset,slot,kind", 0) != 0) throw InvalidInput("'" + csv_path + "' lacks a sinogram header");
  const int w = s.width();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != static_cast<std::size_t>(6 + w) || cells[5] != to_string(s.kind)) {
      throw InvalidInput("'" + csv_path + "' line " + std::to_string(lineno) + ": malformed record");
    }
    try {
      s.ids.push_back({std::stoi(cells[0]), std::stoi(cells[1]), std::stoi(cells[2]), std::stoi(cells[3])});
      s.slots.push_back(std::stoull(cells[4]));
      for (int c = 0; c < w; ++c) s.values.push_back(std::stod(cells[6 + static_cast<std::size_t>(c)]));
    } catch (const std::exception&) {
      throw InvalidInput("'" + csv_path + "' line " + std::to_string(lineno) + ": unparsable number");
    }
  }
  if (s.size() != side.value("rays", s.size())) throw InvalidInput("'" + csv_path + "' ray count disagrees with manifest");
  return s;
}

void add_noise(Sinogram& s, double level, std::mt19937_64& rng) {
  if (level < 0.0) throw InvalidInput("noise level must be non-negative");
  if (level == 0.0 || s.values.empty()) return;
  double ss = 0.0;
  for (double v : s.values) ss += v * v;
  const double sigma = level * std::sqrt(ss / static_cast<double>(s.values.size()));
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : s.values) v += dist(rng);
  s.meta["noise_level"] = level;
  s.meta["noise_sigma"] = sigma;
}

double ray_integral_scalar(const ScalarField& f, const Ray& ray) {
  if (ray.empty()) throw InvalidInput("ray has no nodes");
  double acc = 0.0;
  for (std::size_t i = 0; i < ray.size(); ++i) {
    double v = 0.0;
    f.interpolate(ray.points[i], &v, kRayInterp);
    acc += ray.weight[i] * v;
  }
  return acc;
}

double longitudinal_ray(const SymField2& u, const Ray& ray) {
  if (ray.empty()) throw InvalidInput("ray has no nodes");
  double acc = 0.0;
  for (std::size_t i = 0; i < ray.size(); ++i) {
    Sym3 v;
    u.interpolate(ray.points[i], v.data(), kRayInterp);
    const Vec3 g = gamma_dot(ray, i);
    acc += ray.weight[i] * contract(v, g, g);
  }
  return acc;
}

double transverse_ray(const SymField2& F, const Ray& ray, const Vec3& eta) {
  if (ray.empty()) throw InvalidInput("ray has no nodes");
  double acc = 0.0;
  for (std::size_t i = 0; i < ray.size(); ++i) {
    Sym3 v;
    F.interpolate(ray.points[i], v.data(), kRayInterp);
    const Vec3 e = ray.speed[i] * eta;
    acc += ray.weight[i] * contract(v, e, e);
  }
  return acc;
}

Sinogram scalar_transform(const ScalarField& f, const RayFamily& family, Exec exec) {
  return linear_forward<1, 1>(f, family, RecordKind::scalar, ScalarCoeff{}, exec);
}

void scalar_adjoint(const Sinogram& data, const RayFamily& family, ScalarField& out, Exec exec) {
  linear_adjoint<1, 1>(data, family, RecordKind::scalar, out, ScalarCoeff{}, exec);
}

Sinogram longitudinal_transform(const SymField2& u, const RayFamily& family, Exec exec) {
  return linear_forward<6, 1>(u, family, RecordKind::scalar, LongitudinalCoeff{}, exec);
}

void longitudinal_adjoint(const Sinogram& data, const RayFamily& family, SymField2& out, Exec exec) {
  linear_adjoint<6, 1>(data, family, RecordKind::scalar, out, LongitudinalCoeff{}, exec);
}

Sinogram transverse_transform(const SymField2& F, const RayFamily& family, Exec exec) {
  return linear_forward<6, 3>(F, family, RecordKind::quadform, TransverseCoeff{}, exec);
}

Sinogram truncated_transform(const SymField2& F, const RayFamily& family, Exec exec) {
  return linear_forward<6, 2>(F, family, RecordKind::kdata, TruncatedCoeff{}, exec);
}

void truncated_adjoint(const Sinogram& data, const RayFamily& family, SymField2& out, Exec exec) {
  linear_adjoint<6, 2>(data, family, RecordKind::kdata, out, TruncatedCoeff{}, exec);
}

SymField2 pwave_source(const SymField2& R, const MaterialParams& params) {
  const auto pg = params.grid();
  if (pg && !(*pg == R.grid())) throw InvalidInput("material fields and stress live on different grids");
  const bool constant = params.constants_mode();
  const PointParams p0 = params.at(0);
  SymField2 out(R.grid());
  for (std::size_t n = 0; n < R.node_count(); ++n) {
    const PointParams p = constant ? p0 : params.at(n);
    const double s = pwave_scale(p);
    const double a = pwave_a(p);
    const double* r = R.node(n);
    const double tr = r[0] + r[1] + r[2];
    double* o = out.node(n);
    for (int c = 0; c < 6; ++c) o[c] = s * (r[c] + a * tr * kTraceCoeffs[c]);
  }
  return out;
}

Sinogram pwave_data(const SymField2& R, const MaterialParams& params, const RayFamily& family, Exec exec,
                    double floor) {
  const ConditionReport cond = check_pwave_conditions(params, floor);
  for (const char* name : {"nzero1", "nzero2"}) {
    const ConditionResult& c = cond.get(name);
    if (!c.pass) throw ConditionError("condition " + c.name + " fails: " + c.detail);
  }
  Sinogram s = longitudinal_transform(pwave_source(R, params), family, exec);
  s.meta["operation"] = "pwave_data";
  return s;
}

Gen2 RytovGenerator::at_point(const Sym3& R, const PointParams& p, const Vec3& gd, const Vec3& e1, const Vec3& e2,
                              double speed) {
  const double vs = p.vs();
  const double s = 1.0 / (4.0 * p.rho * vs * vs * vs * vs);
  const double nu2 = p.nu[1];
  const double nu4 = p.nu[3];
  const double diag = nu4 * contract(R, gd, gd) + nu2 * speed * speed * trace(R);
  return {s * (nu4 * contract(R, e1, e1) + diag), s * (nu4 * contract(R, e2, e2) + diag), s * nu4 * contract(R, e1, e2)};
}

Gen2 RytovGenerator::from_rank4(const Rank4& W, const Vec3& gd, const Vec3& e1, const Vec3& e2) {
  return {W.contract(gd, gd, e1, e1), W.contract(gd, gd, e2, e2),
          0.5 * (W.contract(gd, gd, e1, e2) + W.contract(gd, gd, e2, e1))};
}

RytovGenerator RytovGenerator::build(const SymField2& R, const MaterialParams& params, const Ray& ray) {
  RytovGenerator g;
  const std::size_t n = ray.size();
  const bool constant = params.constants_mode();
  const PointParams p0 = constant ? params.point() : PointParams{};
  auto eval = [&](const Vec3& x, const Vec3& t, const Vec3& f1, const Vec3& f2, double v) {
    Sym3 r;
    R.interpolate(x, r.data(), kRayInterp);
    const PointParams p = constant ? p0 : params.at_point(x);
    return at_point(r, p, v * t, v * f1, v * f2, v);
  };
  g.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes[i] = eval(ray.points[i], ray.tangent[i], ray.frame1[i], ray.frame2[i], ray.speed[i]);
  }
  g.midpoints.resize(n > 0 ? n - 1 : 0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec3 x = 0.5 * (ray.points[i] + ray.points[i + 1]);
    const Vec3 t = normalized(ray.tangent[i] + ray.tangent[i + 1]);
    // Frame halves are re-orthonormalized against the averaged tangent.
    Vec3 f1 = ray.frame1[i] + ray.frame1[i + 1];
    f1 = normalized(f1 - dot(f1, t) * t);
    const Vec3 f2 = cross(t, f1);
    const Vec3 f2_ref = ray.frame2[i] + ray.frame2[i + 1];
    const double sign = dot(f2, f2_ref) < 0.0 ? -1.0 : 1.0;
    g.midpoints[i] = eval(x, t, f1, sign * f2, 0.5 * (ray.speed[i] + ray.speed[i + 1]));
  }
  return g;
}

Mat2c identity2() { return {cd(1.0), cd(0.0), cd(0.0), cd(1.0)}; }

double unitarity_defect(const Mat2c& U) {
  const Mat2c H{std::conj(U[0]), std::conj(U[2]), std::conj(U[1]), std::conj(U[3])};
  const Mat2c P = mul(H, U);
  const Mat2c E = identity2();
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += std::norm(P[i] - E[i]);
  return std::sqrt(s);
}

Mat2c rytov_propagate(const RytovGenerator& gen, const Ray& ray, double scale, const RytovOptions& options) {
  if (ray.size() < 2) throw InvalidInput("ray needs at least two nodes");
  if (gen.nodes.size() != ray.size() || gen.midpoints.size() + 1 != ray.size()) {
    throw InvalidInput("generator does not match the ray");
  }
  const std::vector<double> steps = tau_steps(ray);
  int sub = 1;
  for (int attempt = 0; attempt <= options.max_halvings; ++attempt, sub *= 2) {
    const Mat2c U = integrate(gen, steps, scale, sub);
    if (unitarity_defect(U) <= options.unitarity_tol) return U;
  }
  throw NumericalError("polarization propagator drifted from unitarity after step halving");
}

Mat2c rytov_propagate(const SymField2& R, const MaterialParams& params, const Ray& ray, double scale,
                      const RytovOptions& options) {
  return rytov_propagate(RytovGenerator::build(R, params, ray), ray, scale, options);
}

Sinogram propagator_sinogram(const SymField2& R, const MaterialParams& params, const RayFamily& family, double scale,
                             Exec exec, const RytovOptions& options) {
  const std::size_t count = family.size();
  std::vector<double> dense(count * 8, 0.0);
  std::vector<std::uint8_t> present(count, 0);
  std::vector<double> defect(count, 0.0);
  for_each_ray(family, exec, [&](std::size_t slot, const Ray& ray) {
    const Mat2c U = rytov_propagate(R, params, ray, scale, options);
    for (int e = 0; e < 4; ++e) {
      dense[slot * 8 + 2 * e] = U[e].real();
      dense[slot * 8 + 2 * e + 1] = U[e].imag();
    }
    defect[slot] = unitarity_defect(U);
    present[slot] = 1;
  });
  Sinogram s = Sinogram::from_dense(RecordKind::propagator, family, dense, present);
  s.meta["operation"] = "propagator";
  s.meta["scale"] = scale;
  s.meta["max_unitarity_defect"] = *std::max_element(defect.begin(), defect.end());
  return s;
}

Sinogram born_reduce(const Sinogram& U, double scale) {
  require_kind(U, RecordKind::propagator, "born_reduce");
  if (!(scale > 0.0)) throw InvalidInput("Born scale must be positive");
  Sinogram L = U.with_kind(RecordKind::quadform);
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double* u = U.record(i);
    double* l = L.record(i);
    // Re(i z) = -Im z; the identity has no imaginary part.
    l[0] = -u[1] / scale;
    l[1] = -u[7] / scale;
    l[2] = -0.5 * (u[3] + u[5]) / scale;
  }
  L.meta["operation"] = "born_reduce";
  L.meta["scale"] = scale;
  return L;
}

Sinogram mixed_transform_direct(const SymField2& R, const MaterialParams& params, const RayFamily& family,
                                Exec exec) {
  const std::size_t count = family.size();
  std::vector<double> dense(count * 3, 0.0);
  std::vector<std::uint8_t> present(count, 0);
  for_each_ray(family, exec, [&](std::size_t slot, const Ray& ray) {
    double acc[3] = {};
    for (std::size_t i = 0; i < ray.size(); ++i) {
      Sym3 r;
      R.interpolate(ray.points[i], r.data(), kRayInterp);
      const Rank4 W = f_from_R(r, params.at_point(ray.points[i]), ray.speed[i]);
      const Gen2 g = RytovGenerator::from_rank4(W, gamma_dot(ray, i), eta1(ray, i), eta2(ray, i));
      for (int c = 0; c < 3; ++c) acc[c] += ray.weight[i] * g[c];
    }
    std::copy_n(acc, 3, dense.begin() + static_cast<std::ptrdiff_t>(slot * 3));
    present[slot] = 1;
  });
  return Sinogram::from_dense(RecordKind::quadform, family, dense, present);
}

Gen2 integrate_generator(const RytovGenerator& gen, const Ray& ray) {
  if (gen.nodes.size() != ray.size() || gen.midpoints.size() + 1 != ray.size()) {
    throw InvalidInput("generator does not match the ray");
  }
  const std::vector<double> steps = tau_steps(ray);
  Gen2 acc{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      acc[c] += steps[i] / 6.0 * (gen.nodes[i][c] + 4.0 * gen.midpoints[i][c] + gen.nodes[i + 1][c]);
    }
  }
  return acc;
}

Sinogram generator_integral(const SymField2& R, const MaterialParams& params, const RayFamily& family, Exec exec) {
  const std::size_t count = family.size();
  std::vector<double> dense(count * 3, 0.0);
  std::vector<std::uint8_t> present(count, 0);
  for_each_ray(family, exec, [&](std::size_t slot, const Ray& ray) {
    const Gen2 acc = integrate_generator(RytovGenerator::build(R, params, ray), ray);
    std::copy(acc.begin(), acc.end(), dense.begin() + static_cast<std::ptrdiff_t>(slot * 3));
    present[slot] = 1;
  });
  return Sinogram::from_dense(RecordKind::quadform, family, dense, present);
}

Sinogram truncated_reduce(const Sinogram& L) {
  require_kind(L, RecordKind::quadform, "truncated_reduce");
  Sinogram K = L.with_kind(RecordKind::kdata);
  for (std::size_t i = 0; i < L.size(); ++i) {
    const double* l = L.record(i);
    K.record(i)[0] = 0.5 * (l[0] - l[1]);
    K.record(i)[1] = l[2];
  }
  K.meta["operation"] = "truncated_reduce";
  return K;
}

std::array<double, 2> rotate_kdata(double d, double o, double theta) {
  const double c = std::cos(2.0 * theta);
  const double s = std::sin(2.0 * theta);
  return {c * d + s * o, -s * d + c * o};
}

}  // namespace stresstomo
