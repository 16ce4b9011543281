#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "stresstomo/grid.hpp"
#include "stresstomo/vec.hpp"

namespace stresstomo {

/// Zero-padded FFT context for a grid. Padding is appended after the last node along each axis,
/// so padded index i maps to the coordinate origin + i*h for the lower half of the padding and
/// origin + (i - P)*h for the upper half (periodic wrap).
class Spectrum {
 public:
  explicit Spectrum(const Grid3& grid, int pad_factor = 2);

  const Grid3& grid() const { return grid_; }
  const std::array<int, 3>& padded() const { return padded_; }
  std::size_t padded_count() const {
    return static_cast<std::size_t>(padded_[0]) * static_cast<std::size_t>(padded_[1]) *
           static_cast<std::size_t>(padded_[2]);
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(padded_[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(padded_[2]) +
           static_cast<std::size_t>(k);
  }
  std::array<int, 3> unravel(std::size_t n) const;

  /// Angular frequency 2*pi*m/(P*h) of padded index i along an axis.
  double raw_frequency(int axis, int i) const;
  /// Frequency used by derivative multipliers: the raw frequency with the Nyquist index zeroed.
  double frequency(int axis, int i) const;
  Vec3 frequency(int i, int j, int k) const {
    return {frequency(0, i), frequency(1, j), frequency(2, k)};
  }
  Vec3 raw_frequency(int i, int j, int k) const {
    return {raw_frequency(0, i), raw_frequency(1, j), raw_frequency(2, k)};
  }
  bool is_nyquist(int axis, int i) const { return padded_[axis] % 2 == 0 && i == padded_[axis] / 2; }
  /// Spatial coordinate of a padded index along an axis.
  double coordinate(int axis, int i) const;

  /// Zero-pads nc-component node-major real data and transforms each component.
  std::vector<Complex> forward(const double* values, int nc) const;
  /// In-place forward transform of padded complex data with nc interleaved components.
  void forward_inplace(std::vector<Complex>& data, int nc) const;
  /// In-place normalized inverse transform.
  void inverse_inplace(std::vector<Complex>& data, int nc) const;
  /// Copies the real part of the unpadded block into node-major output.
  void crop_real(const std::vector<Complex>& data, int nc, double* out) const;

 private:
  Grid3 grid_;
  std::array<int, 3> padded_{};
};

}  // namespace stresstomo
