#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresstomo/fields.hpp"
#include "stresstomo/forward.hpp"
#include "stresstomo/geometry.hpp"
#include "stresstomo/material.hpp"

namespace stresstomo {

/// Structured reconstruction report; round-trips through JSON without loss.
class ReconReport {
 public:
  ReconReport() = default;
  explicit ReconReport(std::string pipeline);

  void set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }
  /// Appends a stage entry; every stage carries its residual and wall time.
  void add_stage(const std::string& name, double residual, double seconds, nlohmann::json extra = nullptr);
  /// Stage entry by name; throws InvalidInput when absent.
  const nlohmann::json& stage(const std::string& name) const;
  bool has_stage(const std::string& name) const;
  const nlohmann::json& json() const { return doc_; }
  nlohmann::json& json() { return doc_; }

  nlohmann::json to_json() const { return doc_; }
  static ReconReport from_json(const nlohmann::json& j);

 private:
  nlohmann::json doc_ = {{"pipeline", ""}, {"stages", nlohmann::json::array()}};
};

/// 2D parallel-beam filtered backprojection (Ram-Lak) of one coordinate-plane family, slice by slice.
/// Values are evaluated on the zero-padded grid of spec (spectrum index layout, periodic coordinates).
std::vector<double> filtered_backprojection_padded(const Sinogram& data, const CoordinatePlaneFamily& family,
                                                   const Spectrum& spec, Exec exec = Exec::omp);
/// The same cropped to the family grid.
ScalarField filtered_backprojection(const Sinogram& data, const CoordinatePlaneFamily& family, Exec exec = Exec::omp);

struct SolenoidalOptions {
  int pad_factor = 2;
  /// Tikhonov weight relative to the largest eigenvalue of each node's normal matrix.
  double tikhonov = 1e-10;
  /// Nodes whose system condition number exceeds this count as poorly sampled.
  double condition_threshold = 1e8;
  /// Allowed fraction of poorly sampled non-degenerate nodes.
  double max_bad_fraction = 0.01;
};

struct SolenoidalResult {
  FourierSymField2 spectrum;
  int degenerate_nodes = 0;
  int poorly_conditioned_nodes = 0;
  double max_condition = 0.0;
  /// Max over nodes of |y . m(y)| relative to max |m(y)| |y|.
  double spectral_divergence = 0.0;
};

/// Solenoidal part S(u) from longitudinal data of the three line families (ordered by axis).
/// Per Fourier node y the three directions e_k x y give a 3x3 system for the 2-form on y-perp;
/// nodes on coordinate planes take the unresolved component from their neighbours.
SolenoidalResult invert_I_solenoidal_spectrum(const std::vector<Sinogram>& data,
                                              const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families,
                                              const SolenoidalOptions& options = {}, Exec exec = Exec::omp);
SymField2 invert_I_solenoidal(const std::vector<Sinogram>& data,
                              const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families,
                              const SolenoidalOptions& options = {}, Exec exec = Exec::omp);

/// m = f + a tr(f) eps at one Fourier node (f tangential).
void tangle_node(const Vec3& y, Complex* f, double a);
/// Inverse of tangle_node: tr f = tr m / (1 + 2a), f = m - a tr(f) eps.
void detangle_node(const Vec3& y, Complex* m, double a);

/// Throws NonUniqueError when |1 + 2a| < floor.
void require_detangle_unique(double a, double floor);
void detangle_trace(FourierSymField2& m, double a, double floor = 1e-6);
SymField2 detangle_trace(const SymField2& m, double a, double floor = 1e-6);

struct PWaveOptions {
  SolenoidalOptions solenoidal;
  double condition_floor = 1e-6;
  /// Mask the result to M.
  bool mask = true;
  /// Support-constrained corrections on the data misfit; they always mask.
  int refinement_iterations = 6;
  /// Relative data misfit at which refinement stops.
  double refinement_tolerance = 1e-4;
};

struct PipelineResult {
  SymField2 R;
  ReconReport report;
};

/// Three-family compressional reconstruction in constants mode. truth, when given, adds error metrics.
PipelineResult pwave_pipeline(const std::vector<Sinogram>& data,
                              const std::vector<std::shared_ptr<CoordinatePlaneFamily>>& families,
                              const MaterialParams& params, const PWaveOptions& options = {},
                              const SymField2* truth = nullptr, Exec exec = Exec::omp);

/// Orthonormal trace-free basis in storage order (11,22,33,23,13,12) under the Frobenius inner product.
const std::array<std::array<double, 6>, 5>& tracefree_basis();

struct CgOptions {
  /// Tikhonov lambda = lambda_factor * |K* d| / |d|.
  double lambda_factor = 1e-6;
  int max_iterations = 500;
  /// Stop when |normal residual| <= tol * |K* d|.
  double tolerance = 1e-6;
  /// Raise NumericalError when the budget is exhausted before tolerance.
  bool require_convergence = true;
  /// Cubic halves the cost of quintic per iteration at equal accuracy; linear loses several percent.
  Interp interp = Interp::cubic;
};

struct CgResult {
  SymField2 field;
  int iterations = 0;
  double relative_residual = 0.0;
  double lambda = 0.0;
  bool converged = false;
  /// Max pointwise |trace| relative to max |field|.
  double max_trace = 0.0;
};

/// Regularized least squares for a trace-free field supported in M from (d, o) data of one family.
CgResult invert_K_tracefree(const Sinogram& kdata, const RayFamily& family, const Grid3& grid,
                            const CgOptions& options = {}, Exec exec = Exec::omp);

struct TraceResult {
  ScalarField trace;
  /// Relative discrepancy between the two frame polarizations of the scalar right-hand side.
  double eta_inconsistency = 0.0;
};

/// tr F from first-order quadratic-form data of a coordinate-plane family and the recovered trace-free part.
TraceResult recover_trace(const Sinogram& ldata, const SymField2& tracefree, double a,
                          const CoordinatePlaneFamily& family, double floor = 1e-6, Exec exec = Exec::omp);

struct SWaveOptions {
  double scale = 1e-3;
  CgOptions cg;
  double condition_floor = 1e-6;
  bool mask = true;
};

/// Shear-wave reconstruction from propagator data: dense directions for the trace-free part,
/// one coordinate-plane family for the trace.
PipelineResult swave_pipeline(const Sinogram& dense_propagators, const RayFamily& dense_family,
                              const Sinogram& plane_propagators, const CoordinatePlaneFamily& plane_family,
                              const MaterialParams& params, const SWaveOptions& options = {},
                              const SymField2* truth = nullptr, Exec exec = Exec::omp);

struct PoincareResult {
  double ratio = 0.0;
  double v_norm2 = 0.0;
  double dv_norm2 = 0.0;
  double delta_v_norm2 = 0.0;
  /// Largest pointwise (delta v)^2 - 3 |dv|^2 relative to max 3|dv|^2; nonpositive when the pointwise bound holds.
  double pointwise_excess = 0.0;
};

/// |v|^2 / ((D^2/10)(2 |dv|^2 + |delta v|^2)) in the metric h = v^-2 g; 0/0 is reported as 0.
PoincareResult verify_poincare(const CovectorField& v, const ConformalMetric& metric, double D,
                               double margin = 0.05, double support_tol = 1e-10);

/// |delta R| / |grad R| with spectral derivatives (dimensionless divergence residual).
double relative_divergence(const SymField2& R);

}  // namespace stresstomo
