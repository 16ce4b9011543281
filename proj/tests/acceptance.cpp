// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stresstomo/fields.hpp"
#include "stresstomo/forward.hpp"
#include "stresstomo/geometry.hpp"
#include "stresstomo/inversion.hpp"
#include "stresstomo/material.hpp"

using namespace stresstomo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

const Domain kBall = Domain::ball({0.0, 0.0, 0.0}, 1.0);
constexpr double kDiameter = 2.0;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    const Vec3 v{n(rng), n(rng), n(rng)};
    if (norm(v) > 1e-8) return normalized(v);
  }
}

Sym3 random_sym(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Sym3 s;
  for (double& v : s) v = n(rng);
  return s;
}

CovectorField polynomial_covector(const Grid3& g, std::mt19937_64& rng, double width, double center_radius) {
  BumpSpec spec;
  spec.profile = Bump::Profile::polynomial;
  spec.count = 3;
  spec.width_min = spec.width_max = width;
  spec.center_radius = center_radius;
  return sample_bumps<3>(g, random_bumps(rng, spec, 3));
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double spectral_max(const FourierSymField2& f) {
  double m = 0.0;
  for (const Complex& z : f.values()) m = std::max(m, std::abs(z));
  return m;
}

Mat2c record_matrix(const double* r) {
  return {Complex(r[0], r[1]), Complex(r[2], r[3]), Complex(r[4], r[5]), Complex(r[6], r[7])};
}

/// Trace-free part and Euclidean trace of a symmetric field.
void split_trace(const SymField2& F, SymField2& tracefree, ScalarField& tr) {
  tracefree = F;
  tr = ScalarField(F.grid());
  for (std::size_t m = 0; m < F.node_count(); ++m) {
    double* v = tracefree.node(m);
    const double t = v[0] + v[1] + v[2];
    tr(m, 0) = t;
    for (int c = 0; c < 3; ++c) v[c] -= t / 3.0;
  }
}

// ---------------------------------------------------------------- criteria

Outcome kernel_of_longitudinal_transform() {
  const auto t0 = Clock::now();
  const Grid3 g = Grid3::cube(48, 1.1, kBall);
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit01(0.0, 1.0);
  const double step = 0.5 * g.max_spacing();
  double worst = 0.0;
  int rays = 0;
  for (int field = 0; field < 20; ++field) {
    const SymField2 dv = inner_derivative(polynomial_covector(g, rng, 0.6, 0.3));
    const double bound = dv.max_abs() * kDiameter;
    Ray ray;
    for (int k = 0; k < 1000; ++k) {
      const Vec3 dir = random_unit(rng);
      const Vec3 e1 = any_orthogonal(dir);
      const Vec3 e2 = cross(dir, e1);
      // Uniform point of the unit disc orthogonal to dir.
      const double r = std::sqrt(unit01(rng)) * 0.999;
      const double phi = 2.0 * std::acos(-1.0) * unit01(rng);
      const Vec3 p = r * std::cos(phi) * e1 + r * std::sin(phi) * e2;
      const auto chord = kBall.chord(p, dir);
      const double L = chord->second - chord->first;
      const auto nodes = static_cast<std::size_t>(std::ceil(L / step)) + 1;
      ray.set_line(p + chord->first * dir, dir, L, nodes, e1, e2);
      worst = std::max(worst, std::abs(longitudinal_ray(dv, ray)) / bound);
      ++rays;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-5 && t <= 120.0,
          fmt("max |I(dv)| / (|dv|_inf diam) = %.3e over 20 fields x %d rays at 48^3 (limit 1e-5); %.1f s (limit 120)",
              worst, rays / 20, t)};
}

Outcome solenoidal_projector_algebra() {
  const auto t0 = Clock::now();
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  std::mt19937_64 rng(202);
  BumpSpec spec;
  spec.profile = Bump::Profile::polynomial;
  spec.width_min = spec.width_max = 0.5;
  spec.center_radius = 0.3;
  double idem = 0.0;
  double kills = 0.0;
  double div = 0.0;
  double trace_err = 0.0;
  const double nyquist = std::acos(-1.0) / g.max_spacing();
  for (int k = 0; k < 3; ++k) {
    FourierSymField2 u = FourierSymField2::transform(sample_bumps<6>(g, random_bumps(rng, spec, 6)));
    solenoidal_project(u);
    FourierSymField2 uu = u;
    solenoidal_project(uu);
    double diff = 0.0;
    for (std::size_t i = 0; i < u.values().size(); ++i) diff = std::max(diff, std::abs(uu.values()[i] - u.values()[i]));
    const double scale = spectral_max(u);
    idem = std::max(idem, diff / scale);
    double dmax = 0.0;
    for (const Complex& z : divergence_fourier(u)) dmax = std::max(dmax, std::abs(z));
    div = std::max(div, dmax / (scale * nyquist));

    FourierSymField2 dv = inner_derivative_fourier(polynomial_covector(g, rng, 0.6, 0.3));
    const double dscale = spectral_max(dv);
    solenoidal_project(dv);
    kills = std::max(kills, spectral_max(dv) / dscale);
  }
  for (int k = 0; k < 1000; ++k) {
    const Sym3 P = tangential_projector(3.7 * random_unit(rng));
    trace_err = std::max(trace_err, std::abs(P[0] + P[1] + P[2] - 2.0));
  }
  const double t = seconds_since(t0);
  const bool pass = idem <= 1e-10 && kills <= 1e-8 && div <= 1e-8 && trace_err <= 1e-14 && t <= 30.0;
  return {pass, fmt("S.S - S %.2e (1e-10); S.d %.2e (1e-8); div.S %.2e (1e-8); |tr eps - 2| %.1e (1e-14); %.1f s (limit 30)",
                    idem, kills, div, trace_err, t)};
}

Outcome contraction_identity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> nu(-0.5, 0.5);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    PointParams p;
    p.lambda = pos(rng);
    p.mu = pos(rng);
    p.rho = pos(rng);
    for (double& x : p.nu) x = nu(rng);
    worst = std::max(worst, contraction_identity_check(random_sym(rng), p, p.vp() * random_unit(rng)).relative());
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t <= 1.0,
          fmt("max relative residual %.2e over 100 draws (limit 1e-12); %.3f s (limit 1)", worst, t)};
}

/// Delta(psi) I - Hess(psi): divergence-free and compactly supported; it differs from Delta(psi) g by a potential.
SymField2 laplacian_witness(const ScalarField& psi) {
  const Grid3& g = psi.grid();
  const CovectorField grad = gradient(psi);
  const std::vector<double> H = partials(grad.values().data(), 3, g, DerivativeBackend::spectral);
  SymField2 f(g);
  for (std::size_t m = 0; m < g.node_count(); ++m) {
    const double* h = &H[m * 9];
    const double lap = h[0] + h[4] + h[8];
    for (int s = 0; s < 6; ++s) {
      const int j = kSymPairs[static_cast<std::size_t>(s)][0];
      const int k = kSymPairs[static_cast<std::size_t>(s)][1];
      f(m, s) = (j == k ? lap : 0.0) - 0.5 * (h[j * 3 + k] + h[k * 3 + j]);
    }
  }
  return f;
}

Outcome trace_detangling() {
  std::mt19937_64 rng(404);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);

  double roundtrip = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Vec3 y = (0.1 + 10.0 * std::abs(gauss(rng))) * random_unit(rng);
    Complex f[6];
    for (Complex& z : f) z = Complex(gauss(rng), gauss(rng));
    project_node(y, f);
    double a = coef(rng);
    if (std::abs(1.0 + 2.0 * a) < 0.05) a += 0.1;
    Complex m[6];
    std::copy(f, f + 6, m);
    tangle_node(y, m, a);
    detangle_node(y, m, a);
    double num = 0.0;
    double den = 0.0;
    for (int c = 0; c < 6; ++c) {
      num = std::max(num, std::abs(m[c] - f[c]));
      den = std::max(den, std::abs(f[c]));
    }
    roundtrip = std::max(roundtrip, num / den);
  }

  // The uniqueness guard must fire exactly when |1 + 2a| < floor.
  const double floor = 1e-6;
  int mismatches = 0;
  int probes = 0;
  for (double k : {0.0, 0.25, 0.5, 0.999, 1.001, 2.0, 10.0}) {
    for (double sign : {-1.0, 1.0}) {
      const double a = -0.5 + sign * 0.5 * k * floor;
      bool threw = false;
      try {
        require_detangle_unique(a, floor);
      } catch (const NonUniqueError&) {
        threw = true;
      }
      mismatches += threw != (std::abs(1.0 + 2.0 * a) < floor);
      ++probes;
    }
  }

  // Null space at a = -1/2: S(alpha g) gives vanishing compressional data.
  const Grid3 g = Grid3::cube(48, 1.1, kBall);
  const MaterialParams params = MaterialParams::constants(1.0, 1.0, 1.0, {-1.0, 0.0, 0.0, 0.0});
  const double scale = pwave_scale(params.point());
  const auto families = build_line_families(g, 32, 32, 12);
  double witness = 0.0;
  for (int k = 0; k < 10; ++k) {
    BumpSpec spec;
    spec.profile = Bump::Profile::polynomial;
    spec.width_min = spec.width_max = 0.8;
    spec.center_radius = 0.1;
    const SymField2 f = laplacian_witness(sample_bumps<1>(g, random_bumps(rng, spec, 1)));
    for (const auto& fam : families) {
      witness = std::max(witness, max_abs(pwave_data(f, params, *fam).values) / (scale * f.max_abs() * kDiameter));
    }
  }
  const bool pass = roundtrip <= 1e-12 && mismatches == 0 && witness <= 1e-6;
  return {pass, fmt("round trip %.2e (1e-12); guard mismatches %d of %d; null-space data %.2e over 10 fields (1e-6)",
                    roundtrip, mismatches, probes, witness)};
}

Outcome compressional_reconstruction() {
  const Grid3 g = Grid3::cube(48, 1.1, kBall);
  std::mt19937_64 rng(505);
  BumpSpec spec;
  const SymField2 R = random_residual_stress(g, rng, spec);
  const MaterialParams params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, -0.05, 0.2, 0.3});
  const auto families = build_line_families(g, 96, 64, 48);
  double err[2] = {};
  double secs[2] = {};
  for (int run = 0; run < 2; ++run) {
    const auto t0 = Clock::now();
    std::vector<Sinogram> data;
    for (const auto& f : families) {
      data.push_back(pwave_data(R, params, *f));
      if (run == 1) add_noise(data.back(), 0.01, rng);
    }
    const PipelineResult res = pwave_pipeline(data, families, params, {}, &R);
    err[run] = res.report.json()["relative_error"].get<double>();
    secs[run] = seconds_since(t0);
  }
  const bool pass = err[0] <= 0.05 && err[1] <= 0.15 && secs[0] <= 600.0 && secs[1] <= 600.0;
  return {pass, fmt("48^3, 96x64x48 per family: clean %.2f%% (5%%), 1%% noise %.2f%% (15%%); %.0f s and %.0f s (600)",
                    100.0 * err[0], 100.0 * err[1], secs[0], secs[1])};
}

Outcome polarization_transport() {
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  std::mt19937_64 rng(606);
  BumpSpec spec;
  const SymField2 R = random_residual_stress(g, rng, spec);
  const MaterialParams params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.4, -0.2, 0.5});
  const auto families = build_line_families(g, 64, 48, 32);

  double defect = 0.0;
  for (double s : {1e-2, 1e-3}) {
    const Sinogram U = propagator_sinogram(R, params, *families[2], s);
    for (std::size_t i = 0; i < U.size(); ++i) defect = std::max(defect, unitarity_defect(record_matrix(U.record(i))));
  }

  std::vector<std::size_t> slots;
  {
    std::vector<std::size_t> present;
    Ray ray;
    for (std::size_t s = 0; s < families[0]->size(); ++s) {
      if (families[0]->make_ray(s, ray)) present.push_back(s);
    }
    for (std::size_t k = 0; k < present.size(); k += std::max<std::size_t>(1, present.size() / 200)) {
      slots.push_back(present[k]);
    }
  }
  const std::vector<double> scales{1e-2, 1e-3, 1e-4};
  std::vector<double> rem;
  for (double s : scales) {
    double worst = 0.0;
    Ray ray;
    for (std::size_t slot : slots) {
      families[0]->make_ray(slot, ray);
      const RytovGenerator gen = RytovGenerator::build(R, params, ray);
      const Mat2c U = rytov_propagate(gen, ray, s);
      const Gen2 G = integrate_generator(gen, ray);
      const Complex mi(0.0, -s);
      const Mat2c first{1.0 + mi * G[0], mi * G[2], mi * G[2], 1.0 + mi * G[1]};
      double d = 0.0;
      for (int e = 0; e < 4; ++e) d += std::norm(U[static_cast<std::size_t>(e)] - first[static_cast<std::size_t>(e)]);
      worst = std::max(worst, std::sqrt(d));
    }
    rem.push_back(worst);
  }
  // Least-squares slope of log remainder against log scale.
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    mx += std::log(scales[k]) / 3.0;
    my += std::log(rem[k]) / 3.0;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < scales.size(); ++k) {
    sxy += (std::log(scales[k]) - mx) * (std::log(rem[k]) - my);
    sxx += (std::log(scales[k]) - mx) * (std::log(scales[k]) - mx);
  }
  const double slope = sxy / sxx;

  // Frame rotation: data in a rotated frame equals the spin-2 rotation of the data in the original frame.
  const double theta = 0.37;
  const DenseSphereFamily base(g, 12, 16);
  const DenseSphereFamily rotated(g, 12, 16, 0.0, theta);
  const double s = 1e-3;
  const Sinogram k0 = truncated_reduce(born_reduce(propagator_sinogram(R, params, base, s), s));
  const Sinogram k1 = truncated_reduce(born_reduce(propagator_sinogram(R, params, rotated, s), s));
  const double kscale = max_abs(k0.values);
  double rot = 0.0;
  for (std::size_t i = 0; i < k0.size(); ++i) {
    const auto r = rotate_kdata(k0.record(i)[0], k0.record(i)[1], theta);
    rot = std::max({rot, std::abs(r[0] - k1.record(i)[0]), std::abs(r[1] - k1.record(i)[1])});
  }
  rot /= kscale;

  const bool pass = defect <= 1e-8 && std::abs(slope - 2.0) <= 0.1 && rot <= 1e-10;
  return {pass, fmt("unitarity defect %.2e (1e-8); Born remainder slope %.4f over 1e-2..1e-4 (2 +- 0.1); "
                    "frame rotation %.2e (1e-10)",
                    defect, slope, rot)};
}

Outcome shear_reconstruction() {
  const auto t0 = Clock::now();
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  std::mt19937_64 rng(707);
  BumpSpec spec;
  spec.width_min = spec.width_max = 0.12;
  spec.center_radius = 0.1;
  const SymField2 R = random_residual_stress(g, rng, spec);
  const MaterialParams params = MaterialParams::constants(1.0, 1.0, 1.0, {0.1, 0.4, -0.2, 0.5});
  const double scale = 1e-3;
  const DenseSphereFamily dense(g, 60, 48);
  const auto planes = build_line_families(g, 96, 64, 32);
  const Sinogram du = propagator_sinogram(R, params, dense, scale);
  const Sinogram pu = propagator_sinogram(R, params, *planes[2], scale);
  SWaveOptions options;
  options.scale = scale;
  const PipelineResult res = swave_pipeline(du, dense, pu, *planes[2], params, options, &R);
  const double t = seconds_since(t0);
  const double total = res.report.json()["relative_error"].get<double>();
  const double tracefree = res.report.stage("tracefree")["relative_error"].get<double>();

  // Trace stage on its own, fed the exact trace-free part.
  SymField2 Ft;
  ScalarField tr;
  split_trace(swave_scale(params.point()) * R, Ft, tr);
  const TraceResult alone = recover_trace(born_reduce(pu, scale), Ft, swave_a(params.point()), *planes[2]);
  const double trace_err = relative_error(alone.trace, tr);

  const bool pass = total <= 0.15 && tracefree <= 0.10 && trace_err <= 0.05 && t <= 1200.0;
  return {pass, fmt("32^3, 60 directions: total %.2f%% (15%%), trace-free %.2f%% (10%%), trace alone %.2f%% (5%%); "
                    "%.0f s (1200)",
                    100.0 * total, 100.0 * tracefree, 100.0 * trace_err, t)};
}

Outcome poincare_inequality() {
  const Grid3 g = Grid3::cube(32, 1.1, kBall);
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> width(0.2, 0.6);
  const ConformalMetric metric = ConformalMetric::constant(1.0);
  double worst = 0.0;
  double excess = -1.0;
  for (int k = 0; k < 50; ++k) {
    const double w = width(rng);
    // Supports stay inside the unit ball with a 0.05 margin.
    const PoincareResult p = verify_poincare(polynomial_covector(g, rng, w, 0.95 - w), metric, kDiameter);
    worst = std::max(worst, p.ratio);
    excess = std::max(excess, p.pointwise_excess);
  }
  return {worst <= 1.0 && excess <= 1e-10,
          fmt("max ratio %.4f over 50 fields (limit 1); pointwise codifferential excess %.2e", worst, excess)};
}

struct ConditionRow {
  std::array<double, 4> nu;
  // nzero1, nzero2, uniqueness, strict ellipticity, symbol positivity, bound, nu4 != 0, trace recovery
  std::array<bool, 8> expect;
  bool indeterminate;
};

Outcome condition_table() {
  // Expected flags derived by hand from a = (nu1+nu2)/(2(1+nu3+nu4)) and the shear weight nu2/nu4.
  const std::vector<ConditionRow> rows = {
      {{0.0, 0.0, 0.0, 0.0}, {1, 1, 1, 0, 1, 1, 0, 0}, false},
      {{0.1, -0.05, 0.2, 0.3}, {1, 1, 1, 1, 1, 1, 1, 1}, false},
      {{-0.5, 0.0, 0.25, 0.25}, {1, 1, 1, 0, 1, 0, 1, 1}, false},  // a = -1/6: bound exactly 1
      {{-1.0, 0.0, 0.0, 0.0}, {1, 1, 0, 0, 0, 0, 0, 0}, false},    // a = -1/2: not unique
      {{-2.0 / 3.0, 0.0, 0.0, 0.0}, {0, 1, 1, 0, 0, 0, 0, 0}, true},
      {{0.2, 0.0, -0.5, -0.5}, {1, 0, 1, 0, 0, 0, 1, 1}, true},
      {{0.3, 0.3, 0.1, 0.1}, {1, 1, 1, 1, 1, 1, 1, 1}, false},
      {{-0.2, 0.0, 0.0, 0.0}, {1, 1, 1, 0, 1, 1, 0, 0}, false},
      {{0.2, -0.2, 0.0, 0.3}, {1, 1, 1, 0, 1, 1, 1, 0}, false},
      {{-0.8, 0.0, 0.0, 0.0}, {1, 1, 1, 0, 0, 0, 0, 0}, false},
      {{-2.0, 0.0, 0.0, 0.0}, {1, 1, 1, 1, 1, 0, 0, 0}, false},
      {{-0.48, 0.0, 0.25, 0.25}, {1, 1, 1, 0, 1, 1, 1, 1}, false},
  };
  int wrong = 0;
  std::string first_wrong;
  double bound_at_sixth = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const MaterialParams m = MaterialParams::constants(1.0, 1.0, 1.0, rows[r].nu);
    const ConditionReport pc = check_pwave_conditions(m);
    const ConditionReport sc = check_swave_conditions(m);
    const VariableConditionReport vc = check_variable_conditions(m, kDiameter);
    const std::array<bool, 8> got = {pc.get("nzero1").pass,      pc.get("nzero2").pass,      pc.get("uniqueness").pass,
                                     vc.ellipticity_pass,        vc.symbol_positive,         vc.bound_pass,
                                     sc.get("nu4_nonzero").pass, sc.get("trace_recovery").pass};
    if (got != rows[r].expect || vc.indeterminate != rows[r].indeterminate) {
      ++wrong;
      if (first_wrong.empty()) first_wrong = fmt(" (first mismatch: row %zu)", r + 1);
    }
    if (r == 2) bound_at_sixth = vc.bound;
  }
  const bool bound_ok = std::abs(bound_at_sixth - 1.0) <= 1e-12;
  return {wrong == 0 && bound_ok, fmt("%zu parameter sets, %d mismatches%s; bound at a = -1/6 is %.15f (expected 1)",
                                      rows.size(), wrong, first_wrong.c_str(), bound_at_sixth)};
}

Outcome constant_speed_geodesics() {
  std::mt19937_64 rng(909);
  double deviation = 0.0;
  double diameter_err = 0.0;
  for (double v : {0.5, 1.0, 2.0}) {
    const ConformalMetric metric = ConformalMetric::constant(v);
    for (int k = 0; k < 20; ++k) {
      const Vec3 x0 = random_unit(rng);
      Vec3 dir = random_unit(rng);
      if (dot(dir, x0) > -0.1) dir = normalized(dir - (dot(dir, x0) + 0.5) * x0);
      GeodesicOptions opts;
      opts.step = 0.02 / v;
      const Ray ray = trace_geodesic(metric, kBall, x0, dir, opts);
      for (std::size_t i = 0; i < ray.size(); ++i) {
        const Vec3 d = ray.points[i] - x0;
        deviation = std::max(deviation, norm(d - dot(d, dir) * dir));
        deviation = std::max(deviation, norm(ray.tangent[i] - dir));
      }
    }
    const DiameterEstimate est = diameter(metric, kBall, 24);
    diameter_err = std::max(diameter_err, std::abs(est.value - 2.0 / v) * v / 2.0);
  }
  return {deviation <= 1e-8 && diameter_err <= 1e-6,
          fmt("max deviation from chords %.2e (1e-8); relative diameter error vs 2/v %.2e (1e-6)", deviation,
              diameter_err)};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "kernel of the longitudinal transform", kernel_of_longitudinal_transform},
      {2, "solenoidal projector algebra", solenoidal_projector_algebra},
      {3, "contraction identity", contraction_identity},
      {4, "trace detangling", trace_detangling},
      {5, "compressional reconstruction", compressional_reconstruction},
      {6, "polarization transport", polarization_transport},
      {7, "shear reconstruction", shear_reconstruction},
      {8, "poincare inequality", poincare_inequality},
      {9, "condition table", condition_table},
      {10, "constant-speed geodesics", constant_speed_geodesics},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
