#include "stresstomo/material.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "stresstomo/errors.hpp"
#include "stresstomo/fields.hpp"
#include "stresstomo/io.hpp"

namespace stresstomo {
namespace {

double kd(int a, int b) { return a == b ? 1.0 : 0.0; }

const char* const kParamNames[7] = {"lambda", "mu", "rho", "nu1", "nu2", "nu3", "nu4"};

ScalarField point_field(const MaterialParams& params, const Grid3& grid, double (*fn)(const PointParams&)) {
  ScalarField out(grid);
  const auto pg = params.grid();
  if (pg && !(*pg == grid)) throw InvalidInput("parameter fields live on a different grid");
  for (std::size_t n = 0; n < grid.node_count(); ++n) out(n, 0) = fn(params.at(params.constants_mode() ? 0 : n));
  return out;
}

}  // namespace

double PointParams::vp() const { return std::sqrt((lambda + 2.0 * mu) / rho); }
double PointParams::vs() const { return std::sqrt(mu / rho); }

ParamField ParamField::constant(double v) {
  ParamField p;
  p.value_ = v;
  return p;
}

ParamField ParamField::sampled(ScalarField f, std::string source) {
  ParamField p;
  p.field_ = std::make_shared<ScalarField>(std::move(f));
  p.source_ = std::move(source);
  return p;
}

MaterialParams MaterialParams::constants(double lambda, double mu, double rho, const std::array<double, 4>& nu) {
  MaterialParams m;
  m.lambda = ParamField::constant(lambda);
  m.mu = ParamField::constant(mu);
  m.rho = ParamField::constant(rho);
  for (int i = 0; i < 4; ++i) m.nu[i] = ParamField::constant(nu[i]);
  m.validate();
  return m;
}

bool MaterialParams::constants_mode() const {
  if (!lambda.is_constant() || !mu.is_constant() || !rho.is_constant()) return false;
  return std::all_of(nu.begin(), nu.end(), [](const ParamField& p) { return p.is_constant(); });
}

std::optional<Grid3> MaterialParams::grid() const {
  const ParamField* all[7] = {&lambda, &mu, &rho, &nu[0], &nu[1], &nu[2], &nu[3]};
  for (const ParamField* p : all) {
    if (p->field()) return p->field()->grid();
  }
  return std::nullopt;
}

PointParams MaterialParams::at(std::size_t node) const {
  PointParams p;
  p.lambda = lambda.value(node);
  p.mu = mu.value(node);
  p.rho = rho.value(node);
  for (int i = 0; i < 4; ++i) p.nu[i] = nu[i].value(node);
  return p;
}

PointParams MaterialParams::at_point(const Vec3& x) const {
  const auto g = grid();
  if (!g) return at(0);
  Vec3 y = x;
  const Vec3 hi = g->upper();
  for (int a = 0; a < 3; ++a) y[a] = std::clamp(y[a], g->origin()[a], hi[a]);
  auto sample = [&](const ParamField& f) {
    if (f.is_constant()) return f.constant_value();
    double v = 0.0;
    f.field()->interpolate(y, &v);
    return v;
  };
  PointParams p;
  p.lambda = sample(lambda);
  p.mu = sample(mu);
  p.rho = sample(rho);
  for (int i = 0; i < 4; ++i) p.nu[i] = sample(nu[i]);
  return p;
}

PointParams MaterialParams::point() const {
  if (!constants_mode()) throw InvalidInput("operation requires constant material parameters");
  return at(0);
}

std::size_t MaterialParams::sample_count() const {
  const auto g = grid();
  return g ? g->node_count() : 1;
}

void MaterialParams::validate() const {
  const ParamField* all[7] = {&lambda, &mu, &rho, &nu[0], &nu[1], &nu[2], &nu[3]};
  const auto g = grid();
  for (const ParamField* p : all) {
    if (p->field() && !(p->field()->grid() == *g)) throw InvalidInput("parameter fields must share one grid");
  }
  for (std::size_t n = 0; n < sample_count(); ++n) {
    const PointParams p = at(n);
    if (!(p.rho > 0.0)) throw InvalidInput("density rho must be positive");
    if (!(p.mu > 0.0)) throw InvalidInput("shear modulus mu must be positive");
    if (!(p.lambda + 2.0 * p.mu > 0.0)) throw InvalidInput("lambda + 2 mu must be positive");
    for (double v : p.nu) {
      if (!std::isfinite(v)) throw InvalidInput("nu coefficients must be finite");
    }
  }
}

nlohmann::json MaterialParams::to_json() const {
  nlohmann::json j;
  const ParamField* all[7] = {&lambda, &mu, &rho, &nu[0], &nu[1], &nu[2], &nu[3]};
  for (int i = 0; i < 7; ++i) {
    if (all[i]->is_constant()) {
      j[kParamNames[i]] = all[i]->constant_value();
    } else {
      j[kParamNames[i]] = {{"file", all[i]->source()}};
    }
  }
  return j;
}

MaterialParams MaterialParams::from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw InvalidInput("material parameters must be an object");
  MaterialParams m;
  ParamField* all[7] = {&m.lambda, &m.mu, &m.rho, &m.nu[0], &m.nu[1], &m.nu[2], &m.nu[3]};
  for (const auto& item : j.items()) {
    const bool known = std::any_of(std::begin(kParamNames), std::end(kParamNames),
                                   [&](const char* n) { return item.key() == n; });
    if (!known) throw InvalidInput("unknown material parameter '" + item.key() + "'");
  }
  for (int i = 0; i < 7; ++i) {
    if (!j.contains(kParamNames[i])) {
      if (i < 3) throw InvalidInput(std::string("missing material parameter '") + kParamNames[i] + "'");
      continue;
    }
    const auto& v = j.at(kParamNames[i]);
    if (v.is_number()) {
      *all[i] = ParamField::constant(v.get<double>());
    } else if (v.is_object() && v.contains("file")) {
      std::filesystem::path path = v.at("file").get<std::string>();
      if (path.is_relative() && !base_dir.empty()) path = std::filesystem::path(base_dir) / path;
      *all[i] = ParamField::sampled(read_field<1>(path.string()), path.string());
    } else {
      throw InvalidInput(std::string("parameter '") + kParamNames[i] + "' must be a number or {\"file\": path}");
    }
  }
  m.validate();
  return m;
}

double Rank4::contract(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) const {
  double s = 0.0;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      const double ab = a[j] * b[k];
      if (ab == 0.0) continue;
      for (int l = 0; l < 3; ++l) {
        for (int m = 0; m < 3; ++m) s += ab * c[l] * d[m] * (*this)(j, k, l, m);
      }
    }
  }
  return s;
}

double Rank4::max_abs() const {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Rank4 c_from_R(const Sym3& R, const PointParams& p) {
  const double tr = trace(R);
  const auto& nu = p.nu;
  Rank4 c;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        for (int m = 0; m < 3; ++m) {
          c(j, k, l, m) = nu[0] * tr * kd(j, k) * kd(l, m) +
                          0.5 * nu[1] * tr * (kd(j, l) * kd(k, m) + kd(j, m) * kd(k, l)) +
                          nu[2] * (sym_get(R, j, k) * kd(l, m) + sym_get(R, l, m) * kd(j, k)) +
                          0.5 * nu[3] *
                              (sym_get(R, j, l) * kd(k, m) + sym_get(R, j, m) * kd(k, l) +
                               sym_get(R, k, l) * kd(j, m) + sym_get(R, k, m) * kd(j, l));
        }
      }
    }
  }
  return c;
}

Rank4 f_from_R(const Sym3& R, const PointParams& p, double metric_speed) {
  const double v2 = metric_speed * metric_speed;
  const double hs = 1.0 / v2;  // h_jk = delta_jk / v^2
  const double tr = v2 * trace(R);
  const double vs = p.vs();
  const double pre = 1.0 / (4.0 * p.rho * vs * vs * vs * vs);
  const auto& nu = p.nu;
  auto h = [hs](int a, int b) { return a == b ? hs : 0.0; };
  Rank4 w;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        for (int m = 0; m < 3; ++m) {
          const double t1 = nu[0] * tr * (h(j, l) * h(k, m) + h(j, m) * h(k, l));
          const double t2 = 0.5 * nu[1] * tr * (2.0 * h(j, k) * h(l, m) + h(j, l) * h(k, m) + h(j, m) * h(k, l));
          const double t3 = nu[2] * (sym_get(R, j, l) * h(k, m) + sym_get(R, k, m) * h(j, l) +
                                     sym_get(R, j, m) * h(k, l) + sym_get(R, k, l) * h(j, m));
          const double t4 =
              0.5 * nu[3] *
              (2.0 * sym_get(R, j, k) * h(l, m) + sym_get(R, j, l) * h(k, m) + sym_get(R, j, m) * h(k, l) +
               sym_get(R, k, l) * h(j, m) + sym_get(R, k, m) * h(j, l) + 2.0 * sym_get(R, l, m) * h(j, k));
          w(j, k, l, m) = pre * (t1 + t2 + t3 + t4);
        }
      }
    }
  }
  return w;
}

Rank4 f_from_c(const Sym3& R, const PointParams& p) {
  const Rank4 c = c_from_R(R, p);
  const double vs = p.vs();
  const double pre = 1.0 / (4.0 * p.rho * std::pow(vs, 6));
  Rank4 w;
  for (int j = 0; j < 3; ++j) {
    for (int k = 0; k < 3; ++k) {
      for (int l = 0; l < 3; ++l) {
        for (int m = 0; m < 3; ++m) w(j, k, l, m) = pre * (c(j, l, k, m) + c(j, m, k, l));
      }
    }
  }
  return w;
}

ContractionCheck contraction_identity_check(const Sym3& R, const PointParams& p, const Vec3& direction) {
  const double vp = p.vp();
  const double len = norm(direction);
  if (std::abs(len / vp - 1.0) > 1e-10) throw InvalidInput("direction must have unit length in the metric h");
  const Rank4 c = c_from_R(R, p);
  ContractionCheck out;
  out.lhs = c.contract(direction, direction, direction, direction);
  const double Rgg = contract(R, direction, direction);
  const double trh = vp * vp * trace(R);
  const auto& nu = p.nu;
  out.rhs = vp * vp * (2.0 * (nu[2] + nu[3]) * Rgg + (nu[0] + nu[1]) * trh);
  out.residual = std::abs(out.lhs - out.rhs);
  double nsum = 0.0;
  for (double v : nu) nsum += std::abs(v);
  out.scale = std::max({std::abs(out.lhs), std::abs(out.rhs),
                        std::pow(vp, 4) * nsum * std::sqrt(frobenius2(R))});
  return out;
}

double pwave_scale(const PointParams& p) {
  const double vp = p.vp();
  return (1.0 + p.nu[2] + p.nu[3]) / (p.rho * vp * vp * vp * vp);
}

double pwave_a(const PointParams& p) { return (p.nu[0] + p.nu[1]) / (2.0 * (1.0 + p.nu[2] + p.nu[3])); }

double pwave_b(const PointParams& p) {
  const double vp = p.vp();
  return p.rho * vp * vp * vp * vp / (1.0 + p.nu[2] + p.nu[3]);
}

double swave_scale(const PointParams& p) {
  const double vs = p.vs();
  return p.nu[3] / (4.0 * p.rho * vs * vs * vs * vs);
}

double swave_a(const PointParams& p) { return p.nu[1] / p.nu[3]; }

PWaveWeights pwave_weights(const MaterialParams& params, const Grid3& grid) {
  PWaveWeights w{point_field(params, grid, pwave_scale), point_field(params, grid, pwave_a),
                 point_field(params, grid, pwave_b), CovectorField(grid), CovectorField(grid)};
  if (params.constants_mode()) return w;
  ScalarField logb(grid);
  ScalarField logc(grid);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    const PointParams p = params.at(n);
    logb(n, 0) = std::log(std::abs(pwave_b(p)));
    logc(n, 0) = std::log(p.vp() * p.vp());
  }
  const CovectorField gb = gradient(logb, DerivativeBackend::centered);
  const CovectorField gc = gradient(logc, DerivativeBackend::centered);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    for (int a = 0; a < 3; ++a) {
      w.alpha(n, a) = gb(n, a) + 0.5 * gc(n, a);
      w.beta(n, a) = -0.5 * gc(n, a);
    }
  }
  return w;
}

SWaveWeights swave_weights(const MaterialParams& params, const Grid3& grid) {
  return {point_field(params, grid, swave_scale), point_field(params, grid, swave_a)};
}

bool ConditionReport::all_pass() const {
  return std::all_of(items.begin(), items.end(), [](const ConditionResult& c) { return c.pass; });
}

const ConditionResult& ConditionReport::get(const std::string& name) const {
  for (const auto& c : items) {
    if (c.name == name) return c;
  }
  throw InvalidInput("no condition named '" + name + "'");
}

nlohmann::json ConditionReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : items) {
    arr.push_back({{"name", c.name}, {"value", c.value}, {"floor", c.floor}, {"pass", c.pass}, {"detail", c.detail}});
  }
  return arr;
}

ConditionReport check_pwave_conditions(const MaterialParams& params, double floor) {
  double m1 = std::numeric_limits<double>::infinity();
  double m2 = m1;
  double m3 = m1;
  for (std::size_t n = 0; n < params.sample_count(); ++n) {
    const auto& nu = params.at(n).nu;
    m1 = std::min(m1, std::abs(3.0 * (nu[0] + nu[1]) + 2.0 * (1.0 + nu[2] + nu[3])));
    m2 = std::min(m2, std::abs(1.0 + nu[2] + nu[3]));
    m3 = std::min(m3, std::abs(nu[0] + nu[1] + nu[2] + nu[3] + 1.0));
  }
  ConditionReport r;
  r.items.push_back({"nzero1", m1, floor, m1 > floor, "|3(nu1+nu2) + 2(1+nu3+nu4)| must not vanish"});
  r.items.push_back({"nzero2", m2, floor, m2 > floor, "|1+nu3+nu4| must not vanish"});
  r.items.push_back(
      {"uniqueness", m3, floor, m3 > floor, "nu1+nu2+nu3+nu4 != -1 (equivalently 1+2a != 0) for uniqueness"});
  return r;
}

ConditionReport check_swave_conditions(const MaterialParams& params, double floor) {
  double m1 = std::numeric_limits<double>::infinity();
  double m2 = m1;
  for (std::size_t n = 0; n < params.sample_count(); ++n) {
    const auto& nu = params.at(n).nu;
    m1 = std::min(m1, std::abs(nu[3]));
    // |3a+2| with a = nu2/nu4; reported as +inf-safe when nu4 vanishes.
    m2 = std::min(m2, nu[3] == 0.0 ? 0.0 : std::abs(3.0 * nu[1] / nu[3] + 2.0));
  }
  ConditionReport r;
  r.items.push_back({"nu4_nonzero", m1, floor, m1 > floor, "nu4 must not vanish for shear-wave inversion"});
  r.items.push_back({"trace_recovery", m2, floor, m2 > floor, "3a+2 != 0 with a = nu2/nu4 for trace recovery"});
  return r;
}

nlohmann::json VariableConditionReport::to_json() const {
  return {{"a0", a0},
          {"alpha0", alpha0},
          {"beta0", beta0},
          {"diameter", diameter},
          {"bound", bound},
          {"bound_pass", bound_pass},
          {"ellipticity_pass", ellipticity_pass},
          {"symbol_positive", symbol_positive},
          {"kappa_min", kappa_min},
          {"indeterminate", indeterminate}};
}

VariableConditionReport check_variable_conditions(const MaterialParams& params, double diameter, const Grid3* grid,
                                                  double floor) {
  VariableConditionReport r;
  r.diameter = diameter;
  r.ellipticity_pass = true;
  r.symbol_positive = true;
  r.kappa_min = std::numeric_limits<double>::infinity();
  std::optional<PWaveWeights> w;
  std::optional<Grid3> g = params.grid();
  if (!g && grid) g = *grid;
  if (!params.constants_mode()) w = pwave_weights(params, *g);
  double sup_alpha = 0.0;
  double sup_beta = 0.0;
  for (std::size_t n = 0; n < params.sample_count(); ++n) {
    if (g && !params.constants_mode() && !g->domain().contains(g->position(n))) continue;
    const PointParams p = params.at(n);
    const double a = pwave_a(p);
    const double d = 1.0 + 3.0 * a;
    // a itself is undefined when 1+nu3+nu4 vanishes.
    if (!std::isfinite(a) || std::abs(d) <= floor) {
      r.indeterminate = true;
      continue;
    }
    r.a0 = std::max(r.a0, std::abs(a / d));
    if (!(std::abs(1.0 + a) < std::abs(d) - kConditionSlack)) r.ellipticity_pass = false;
    const double kappa = (1.0 + a) / d;
    r.kappa_min = std::min(r.kappa_min, kappa);
    if (!(kappa > -1.0 + kConditionSlack)) r.symbol_positive = false;
    if (w) {
      // Norms of covectors in the metric h = v_p^-2 g.
      const double vp = p.vp();
      Vec3 al, be;
      for (int c = 0; c < 3; ++c) {
        al[c] = w->alpha(n, c);
        be[c] = (a * w->alpha(n, c) - w->beta(n, c)) / d;
      }
      sup_alpha = std::max(sup_alpha, vp * norm(al));
      sup_beta = std::max(sup_beta, vp * norm(be));
    }
  }
  r.alpha0 = std::sqrt(sup_alpha);
  r.beta0 = std::sqrt(sup_beta);
  r.bound = 3.0 * r.a0 + 0.5 * r.alpha0 + 1.5 * r.beta0 +
            0.25 * (std::pow(r.alpha0, 3) + std::pow(r.beta0, 3)) * diameter * diameter;
  r.bound_pass = !r.indeterminate && r.bound < 1.0 - kConditionSlack;
  if (r.indeterminate) {
    r.ellipticity_pass = false;
    r.symbol_positive = false;
  }
  return r;
}

}  // namespace stresstomo
