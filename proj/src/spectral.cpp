#include "stresstomo/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "stresstomo/errors.hpp"

namespace stresstomo {
namespace {

using PlanKey = std::tuple<int, int, int, int, int>;

/// Plans are created once per shape under a lock and executed lock-free through the new-array API.
fftw_plan cached_plan(const std::array<int, 3>& n, int nc, int sign) {
  static std::mutex mutex;
  static std::map<PlanKey, fftw_plan> plans;
  std::lock_guard<std::mutex> lock(mutex);
  const PlanKey key{n[0], n[1], n[2], nc, sign};
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  const std::size_t count = static_cast<std::size_t>(n[0]) * n[1] * n[2] * nc;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * count));
  const int dims[3] = {n[0], n[1], n[2]};
  fftw_plan p = fftw_plan_many_dft(3, dims, nc, buf, nullptr, nc, 1, buf, nullptr, nc, 1, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  if (p == nullptr) throw NumericalError("FFT planning failed");
  plans.emplace(key, p);
  return p;
}

void execute(std::vector<Complex>& data, const std::array<int, 3>& n, int nc, int sign) {
  fftw_plan p = cached_plan(n, nc, sign);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(p, ptr, ptr);
}

}  // namespace

Spectrum::Spectrum(const Grid3& grid, int pad_factor) : grid_(grid) {
  if (pad_factor < 1) throw InvalidInput("padding factor must be at least 1");
  for (int a = 0; a < 3; ++a) padded_[a] = grid.dims()[a] * pad_factor;
}

std::array<int, 3> Spectrum::unravel(std::size_t n) const {
  const auto nz = static_cast<std::size_t>(padded_[2]);
  const auto ny = static_cast<std::size_t>(padded_[1]);
  return {static_cast<int>(n / (nz * ny)), static_cast<int>((n / nz) % ny), static_cast<int>(n % nz)};
}

double Spectrum::raw_frequency(int axis, int i) const {
  const int p = padded_[axis];
  const int m = (i <= p / 2) ? i : i - p;
  return 2.0 * std::numbers::pi * m / (p * grid_.spacing()[axis]);
}

double Spectrum::frequency(int axis, int i) const {
  if (is_nyquist(axis, i)) return 0.0;
  return raw_frequency(axis, i);
}

double Spectrum::coordinate(int axis, int i) const {
  const int n = grid_.dims()[axis];
  const int p = padded_[axis];
  const int m = (i < n + (p - n) / 2) ? i : i - p;
  return grid_.origin()[axis] + m * grid_.spacing()[axis];
}

std::vector<Complex> Spectrum::forward(const double* values, int nc) const {
  std::vector<Complex> data(padded_count() * nc, Complex(0.0, 0.0));
  const auto& d = grid_.dims();
  for (int i = 0; i < d[0]; ++i) {
    for (int j = 0; j < d[1]; ++j) {
      for (int k = 0; k < d[2]; ++k) {
        const double* src = values + grid_.index(i, j, k) * nc;
        Complex* dst = data.data() + index(i, j, k) * nc;
        for (int c = 0; c < nc; ++c) dst[c] = src[c];
      }
    }
  }
  forward_inplace(data, nc);
  return data;
}

void Spectrum::forward_inplace(std::vector<Complex>& data, int nc) const {
  if (data.size() != padded_count() * nc) throw InvalidInput("spectral buffer has the wrong size");
  execute(data, padded_, nc, FFTW_FORWARD);
}

void Spectrum::inverse_inplace(std::vector<Complex>& data, int nc) const {
  if (data.size() != padded_count() * nc) throw InvalidInput("spectral buffer has the wrong size");
  execute(data, padded_, nc, FFTW_BACKWARD);
  const double s = 1.0 / static_cast<double>(padded_count());
  for (Complex& z : data) z *= s;
}

void Spectrum::crop_real(const std::vector<Complex>& data, int nc, double* out) const {
  const auto& d = grid_.dims();
  for (int i = 0; i < d[0]; ++i) {
    for (int j = 0; j < d[1]; ++j) {
      for (int k = 0; k < d[2]; ++k) {
        const Complex* src = data.data() + index(i, j, k) * nc;
        double* dst = out + grid_.index(i, j, k) * nc;
        for (int c = 0; c < nc; ++c) dst[c] = src[c].real();
      }
    }
  }
}

}  // namespace stresstomo
