#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "stresstomo/field.hpp"
#include "stresstomo/geometry.hpp"
#include "stresstomo/kernels.hpp"
#include "stresstomo/material.hpp"

namespace stresstomo {

/// Record layout of a sinogram. Widths: scalar 1, propagator 8 (re/im of U00, U01, U10, U11),
/// kdata 2 (d, o), quadform 3 (L11, L22, L12).
enum class RecordKind : std::uint8_t { scalar, propagator, kdata, quadform };

int record_width(RecordKind kind);
std::string to_string(RecordKind kind);
RecordKind record_kind_from_string(const std::string& s);

/// Ray-indexed measurements of one family; only rays meeting M are stored, in slot order.
struct Sinogram {
  RecordKind kind = RecordKind::scalar;
  nlohmann::json manifest;
  std::vector<std::size_t> slots;
  std::vector<RayId> ids;
  std::vector<double> values;
  /// Provenance: config hash, seed and operation parameters.
  nlohmann::json meta = nlohmann::json::object();

  std::size_t size() const { return slots.size(); }
  bool empty() const { return slots.empty(); }
  int width() const { return record_width(kind); }
  double* record(std::size_t i) { return values.data() + i * static_cast<std::size_t>(width()); }
  const double* record(std::size_t i) const { return values.data() + i * static_cast<std::size_t>(width()); }

  /// Values scattered over all slot_count slots; absent rays read as zero.
  std::vector<double> dense(std::size_t slot_count) const;
  /// Compacts dense values, keeping slots flagged present.
  static Sinogram from_dense(RecordKind kind, const RayFamily& family, const std::vector<double>& dense,
                             const std::vector<std::uint8_t>& present);
  /// Same rays, new records of another kind (zeroed).
  Sinogram with_kind(RecordKind k) const;

  /// CSV with header family,slice,angle,offset,slot,kind,v0.. and a sidecar <path>.manifest.json.
  void write(const std::string& csv_path) const;
  static Sinogram read(const std::string& csv_path);
};

/// Adds zero-mean Gaussian noise with standard deviation level * rms(values).
void add_noise(Sinogram& s, double level, std::mt19937_64& rng);

/// Trapezoid quadrature of the interpolated field along one ray.
double ray_integral_scalar(const ScalarField& f, const Ray& ray);
/// Integral of u(gamma', gamma') along one ray, gamma' = speed * tangent.
double longitudinal_ray(const SymField2& u, const Ray& ray);
/// Integral of F(eta, eta) along one ray for a frame-independent covector eta (Euclidean components, scaled by speed).
double transverse_ray(const SymField2& F, const Ray& ray, const Vec3& eta);

Sinogram scalar_transform(const ScalarField& f, const RayFamily& family, Exec exec = Exec::omp);
void scalar_adjoint(const Sinogram& data, const RayFamily& family, ScalarField& out, Exec exec = Exec::omp);

/// I u: per ray, the integral of u_jk gamma'^j gamma'^k.
Sinogram longitudinal_transform(const SymField2& u, const RayFamily& family, Exec exec = Exec::omp);
void longitudinal_adjoint(const Sinogram& data, const RayFamily& family, SymField2& out, Exec exec = Exec::omp);

/// J F in the ray frame: (F(eta1,eta1), F(eta2,eta2), F(eta1,eta2)) integrated, as a quadform sinogram.
Sinogram transverse_transform(const SymField2& F, const RayFamily& family, Exec exec = Exec::omp);

/// K F in the ray frame: d = integral of (F(eta1,eta1) - F(eta2,eta2))/2, o = integral of F(eta1,eta2).
Sinogram truncated_transform(const SymField2& F, const RayFamily& family, Exec exec = Exec::omp);
void truncated_adjoint(const Sinogram& data, const RayFamily& family, SymField2& out, Exec exec = Exec::omp);

/// Pointwise compressional source scale*(R + a tr_E(R) g), whose longitudinal transform is the phase data.
SymField2 pwave_source(const SymField2& R, const MaterialParams& params);

/// Compressional phase integrals; throws ConditionError when a non-vanishing condition fails.
Sinogram pwave_data(const SymField2& R, const MaterialParams& params, const RayFamily& family,
                    Exec exec = Exec::omp, double floor = 1e-6);

/// Frame generator of the polarization ODE at one point: (G11, G22, G12).
using Gen2 = std::array<double, 3>;

/// Symmetric 2x2 generators along a ray, at the nodes and at the interval midpoints.
struct RytovGenerator {
  std::vector<Gen2> nodes;
  std::vector<Gen2> midpoints;

  /// G_ab = s (nu4 R(eta_a,eta_b) + delta_ab (nu4 R(gamma',gamma') + nu2 tr R)) with s = 1/(4 rho vs^4).
  static Gen2 at_point(const Sym3& R, const PointParams& p, const Vec3& gamma_dot, const Vec3& eta1,
                       const Vec3& eta2, double speed);
  /// The same contraction taken from a rank-4 W: G_ab = (W(g,g,e_a,e_b) + W(g,g,e_b,e_a)) / 2.
  static Gen2 from_rank4(const Rank4& W, const Vec3& gamma_dot, const Vec3& eta1, const Vec3& eta2);
  static RytovGenerator build(const SymField2& R, const MaterialParams& params, const Ray& ray);
};

/// Row-major 2x2 complex matrix.
using Mat2c = std::array<std::complex<double>, 4>;

Mat2c identity2();
/// Frobenius norm of U^H U - E.
double unitarity_defect(const Mat2c& U);

struct RytovOptions {
  double unitarity_tol = 1e-8;
  /// Each retry halves the step; after this many the propagator is rejected.
  int max_halvings = 3;
};

/// Integrates dc/dtau = -i scale G(tau) c along the ray with classic RK4 and returns U with c(end) = U c(0).
/// Throws NumericalError when unitarity cannot be met.
Mat2c rytov_propagate(const RytovGenerator& gen, const Ray& ray, double scale, const RytovOptions& options = {});
Mat2c rytov_propagate(const SymField2& R, const MaterialParams& params, const Ray& ray, double scale,
                      const RytovOptions& options = {});

/// Propagators for every ray of a family; meta records scale and the worst unitarity defect.
Sinogram propagator_sinogram(const SymField2& R, const MaterialParams& params, const RayFamily& family, double scale,
                             Exec exec = Exec::omp, const RytovOptions& options = {});

/// First-order data: L = sym(Re(i (U - E))) / scale as a quadform sinogram.
Sinogram born_reduce(const Sinogram& propagators, double scale);

/// Direct mixed transform: integral of W(gamma',gamma',eta_a,eta_b) with W from the closed-form rank-4 field.
Sinogram mixed_transform_direct(const SymField2& R, const MaterialParams& params, const RayFamily& family,
                                Exec exec = Exec::omp);

/// Simpson integral of G over the ray: the first-order term of the RK4 propagator, U = E - i scale (this) + O(scale^2).
Gen2 integrate_generator(const RytovGenerator& gen, const Ray& ray);

/// Frame integral of G for every ray of a family, as a quadform sinogram.
Sinogram generator_integral(const SymField2& R, const MaterialParams& params, const RayFamily& family,
                            Exec exec = Exec::omp);

/// Trace-free part in the frame: d = (L11 - L22)/2, o = L12.
Sinogram truncated_reduce(const Sinogram& quadform);

/// Spin-2 rotation of (d, o) under a frame rotation by theta.
std::array<double, 2> rotate_kdata(double d, double o, double theta);

}  // namespace stresstomo
