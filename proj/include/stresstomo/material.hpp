#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresstomo/field.hpp"

namespace stresstomo {

/// Material parameters at one point.
struct PointParams {
  double lambda = 1.0;
  double mu = 1.0;
  double rho = 1.0;
  std::array<double, 4> nu{0.0, 0.0, 0.0, 0.0};

  double vp() const;
  double vs() const;
};

/// A material parameter given either as a constant or as a grid field.
class ParamField {
 public:
  ParamField() = default;
  static ParamField constant(double v);
  static ParamField sampled(ScalarField f, std::string source = "");

  bool is_constant() const { return field_ == nullptr; }
  double value(std::size_t node) const { return field_ ? (*field_)(node, 0) : value_; }
  double constant_value() const { return value_; }
  const ScalarField* field() const { return field_.get(); }
  const std::string& source() const { return source_; }

 private:
  double value_ = 0.0;
  std::shared_ptr<const ScalarField> field_;
  std::string source_;
};

class MaterialParams {
 public:
  ParamField lambda = ParamField::constant(1.0);
  ParamField mu = ParamField::constant(1.0);
  ParamField rho = ParamField::constant(1.0);
  std::array<ParamField, 4> nu{ParamField::constant(0.0), ParamField::constant(0.0), ParamField::constant(0.0),
                               ParamField::constant(0.0)};

  static MaterialParams constants(double lambda, double mu, double rho, const std::array<double, 4>& nu);

  /// True when every parameter is a constant.
  bool constants_mode() const;
  /// Grid shared by the sampled parameters, if any.
  std::optional<Grid3> grid() const;
  PointParams at(std::size_t node) const;
  /// Trilinear sample at a point, clamped to the parameter grid box.
  PointParams at_point(const Vec3& x) const;
  /// Values of a constants-mode parameter set; throws otherwise.
  PointParams point() const;
  /// rho > 0, mu > 0, lambda + 2 mu > 0 everywhere and consistent grids.
  void validate() const;
  /// Number of sample points: 1 in constants mode, node count otherwise.
  std::size_t sample_count() const;

  nlohmann::json to_json() const;
  /// Parses constants or {"file": path} references (paths relative to base_dir).
  static MaterialParams from_json(const nlohmann::json& j, const std::string& base_dir = "");
};

/// Rank-4 tensor at a point, dense 3^4 storage.
struct Rank4 {
  std::array<double, 81> v{};
  double& operator()(int j, int k, int l, int m) { return v[((j * 3 + k) * 3 + l) * 3 + m]; }
  double operator()(int j, int k, int l, int m) const { return v[((j * 3 + k) * 3 + l) * 3 + m]; }
  /// Full contraction with a, b, c, d.
  double contract(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) const;
  double max_abs() const;
};

/// Stress-dependent elastic correction c_jklm built from R (Euclidean Cartesian form).
Rank4 c_from_R(const Sym3& R, const PointParams& p);

/// Real rank-4 tensor W with f = -i W, from the closed-form expression in the metric h = v^-2 g
/// (v = metric_speed; tr R is the h-trace v^2 tr_E R).
Rank4 f_from_R(const Sym3& R, const PointParams& p, double metric_speed = 1.0);

/// The same W assembled from c: W_jklm = (c_jlkm + c_jmkl) / (4 rho v_s^6) in Euclidean components.
Rank4 f_from_c(const Sym3& R, const PointParams& p);

struct ContractionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
  /// Magnitude used to normalize the residual.
  double scale = 0.0;
  double relative() const { return scale > 0.0 ? residual / scale : residual; }
};

/// Compares c(t,t,t,t) with v_p^2 (2(nu3+nu4) R(t,t) + (nu1+nu2) tr R) for an h-unit t (|t|_E = v_p).
ContractionCheck contraction_identity_check(const Sym3& R, const PointParams& p, const Vec3& direction);

/// Compressional weights: f = scale * R and a = (nu1+nu2) / (2(1+nu3+nu4)).
double pwave_scale(const PointParams& p);
double pwave_a(const PointParams& p);
/// b = rho v_p^4 / (1+nu3+nu4).
double pwave_b(const PointParams& p);
/// Shear weights: F = scale * R (real part) and a = nu2/nu4.
double swave_scale(const PointParams& p);
double swave_a(const PointParams& p);

struct PWaveWeights {
  ScalarField scale;
  ScalarField a;
  ScalarField b;
  CovectorField alpha;
  CovectorField beta;
};

/// Pointwise compressional weights on a grid; alpha and beta vanish identically in constants mode.
PWaveWeights pwave_weights(const MaterialParams& params, const Grid3& grid);

struct SWaveWeights {
  ScalarField scale;
  ScalarField a;
};

SWaveWeights swave_weights(const MaterialParams& params, const Grid3& grid);

struct ConditionResult {
  std::string name;
  /// Worst (minimum) value of the monitored quantity over the samples.
  double value = 0.0;
  double floor = 0.0;
  bool pass = false;
  std::string detail;
};

struct ConditionReport {
  std::vector<ConditionResult> items;
  bool all_pass() const;
  const ConditionResult& get(const std::string& name) const;
  nlohmann::json to_json() const;
};

/// Minima of |3(nu1+nu2)+2(1+nu3+nu4)|, |1+nu3+nu4| and |nu1+nu2+nu3+nu4+1| against the floor.
ConditionReport check_pwave_conditions(const MaterialParams& params, double floor = 1e-6);

/// Minima of |nu4| and |3a+2| with a = nu2/nu4.
ConditionReport check_swave_conditions(const MaterialParams& params, double floor = 1e-6);

struct VariableConditionReport {
  double a0 = 0.0;
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double diameter = 0.0;
  /// 3 a0 + alpha0/2 + 3 beta0/2 + (alpha0^3 + beta0^3) D^2 / 4.
  double bound = 0.0;
  bool bound_pass = false;
  /// |1+a| < |1+3a| at every sample.
  bool ellipticity_pass = false;
  /// kappa = (1+a)/(1+3a) > -1 at every sample.
  bool symbol_positive = false;
  double kappa_min = 0.0;
  /// True when 1+3a vanishes somewhere; the other entries are then meaningless.
  bool indeterminate = false;
  nlohmann::json to_json() const;
};

/// Strict inequalities are evaluated with this slack so exact boundary cases fail deterministically.
inline constexpr double kConditionSlack = 1e-12;

VariableConditionReport check_variable_conditions(const MaterialParams& params, double diameter,
                                                  const Grid3* grid = nullptr, double floor = 1e-6);

}  // namespace stresstomo
