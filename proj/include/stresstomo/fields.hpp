#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "stresstomo/field.hpp"
#include "stresstomo/spectral.hpp"

namespace stresstomo {

enum class DerivativeBackend { spectral, centered };

/// Spectrum of a symmetric field on the zero-padded grid; node 0 is the y = 0 node.
class FourierSymField2 {
 public:
  explicit FourierSymField2(const Grid3& grid, int pad_factor = 2);

  static FourierSymField2 transform(const SymField2& u, int pad_factor = 2);
  /// Inverse transform cropped to the original grid (real part).
  SymField2 inverse() const;

  const Grid3& grid() const { return spectrum_.grid(); }
  const Spectrum& spectrum() const { return spectrum_; }
  std::size_t node_count() const { return spectrum_.padded_count(); }
  static constexpr std::size_t zero_node() { return 0; }

  Complex* node(std::size_t n) { return values_.data() + n * 6; }
  const Complex* node(std::size_t n) const { return values_.data() + n * 6; }
  std::vector<Complex>& values() { return values_; }
  const std::vector<Complex>& values() const { return values_; }

  /// Parseval-consistent L2 norm of the padded spatial field (off-diagonals counted twice).
  double l2_norm() const;

 private:
  Spectrum spectrum_;
  std::vector<Complex> values_;
};

/// Tangential projector eps(y) = I - y y^T / |y|^2; zero when y = 0.
Sym3 tangential_projector(const Vec3& y);

/// Applies P u P with P = eps(y) to one symmetric complex 3x3 value.
void project_node(const Vec3& y, Complex* u);

/// Partial derivatives of every component: out[(n*3 + a)*NC + c] = d_a f_c at node n.
std::vector<double> partials(const double* values, int nc, const Grid3& grid, DerivativeBackend backend);

CovectorField gradient(const ScalarField& f, DerivativeBackend backend = DerivativeBackend::spectral);

/// (dv)_jk = (d_j v_k + d_k v_j) / 2.
SymField2 inner_derivative(const CovectorField& v, DerivativeBackend backend = DerivativeBackend::spectral);

/// Divergence; with a speed field v the metric is h = v^-2 g and the result is the covariant divergence.
CovectorField divergence(const SymField2& u, DerivativeBackend backend = DerivativeBackend::spectral,
                         const ScalarField* speed = nullptr);

/// Trace with respect to h = v^-2 g (Euclidean when speed is null).
ScalarField trace(const SymField2& u, const ScalarField* speed = nullptr);
ScalarField trace(const SymField2& u, double speed);

/// S(u) evaluated on the padded spectrum then cropped to the grid.
SymField2 solenoidal_project(const SymField2& u);
/// In-place projection of a padded spectrum (no cropping, exact projector algebra).
void solenoidal_project(FourierSymField2& u);

/// Spectral inner derivative on the padded spectrum.
FourierSymField2 inner_derivative_fourier(const CovectorField& v);
/// Spectral divergence of a padded spectrum; 3 complex values per node.
std::vector<Complex> divergence_fourier(const FourierSymField2& u);

struct IncOptions {
  /// Distance from the boundary of M inside which the potential must vanish.
  double margin = 0.1;
  /// Relative magnitude below which a potential value counts as zero.
  double support_tol = 1e-10;
};

/// R_jk = eps_jpq eps_krs d_p d_r A_qs with spectral derivatives, masked to M.
SymField2 inc_potential(const SymField2& A, const IncOptions& options = {});

/// Throws InvalidInput when a field is not negligible within the boundary margin of M.
template <int NC>
void require_interior_support(const Field<NC>& f, double margin, double support_tol, const char* what);

/// Smooth localized profile used to synthesize test fields.
struct Bump {
  enum class Profile : std::uint8_t { gaussian = 0, polynomial = 1 };
  Profile profile = Profile::gaussian;
  Vec3 center{0.0, 0.0, 0.0};
  /// Standard deviation (gaussian) or support radius (polynomial).
  double width = 0.1;
  /// Exponent of (1 - r^2/width^2) for the polynomial profile.
  int power = 8;
  std::array<double, 6> amplitude{};

  double profile_value(const Vec3& x) const;
};

struct BumpSpec {
  Bump::Profile profile = Bump::Profile::gaussian;
  int count = 3;
  double center_radius = 0.15;
  double width_min = 0.1;
  double width_max = 0.1;
  int power = 8;
};

std::vector<Bump> random_bumps(std::mt19937_64& rng, const BumpSpec& spec, int components);

template <int NC>
Field<NC> sample_bumps(const Grid3& grid, const std::vector<Bump>& bumps) {
  Field<NC> f(grid);
  for (std::size_t n = 0; n < grid.node_count(); ++n) {
    const Vec3 x = grid.position(n);
    double* p = f.node(n);
    for (const Bump& b : bumps) {
      const double w = b.profile_value(x);
      if (w == 0.0) continue;
      for (int c = 0; c < NC; ++c) p[c] += w * b.amplitude[c];
    }
  }
  return f;
}

/// Random admissible residual stress: inc of a random symmetric bump potential.
SymField2 random_residual_stress(const Grid3& grid, std::mt19937_64& rng, const BumpSpec& spec,
                                 const IncOptions& options = {});

}  // namespace stresstomo
