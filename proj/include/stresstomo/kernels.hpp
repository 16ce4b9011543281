#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "stresstomo/field.hpp"
#include "stresstomo/geometry.hpp"

namespace stresstomo {

/// Execution policy of the ray kernels. Both produce identical results for a fixed thread count.
enum class Exec { serial, omp };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

/// Calls fn(slot, ray) for every slot whose ray meets the domain. fn must only write slot-owned state.
template <class Fn>
void for_each_ray(const RayFamily& family, Exec exec, Fn&& fn) {
  const auto count = static_cast<std::ptrdiff_t>(family.size());
  if (exec == Exec::serial) {
    Ray ray;
    for (std::ptrdiff_t s = 0; s < count; ++s) {
      if (family.make_ray(static_cast<std::size_t>(s), ray)) fn(static_cast<std::size_t>(s), ray);
    }
    return;
  }
  // Exceptions cannot cross the parallel region; the one from the lowest slot is rethrown.
  std::exception_ptr error;
  std::ptrdiff_t error_slot = count;
#pragma omp parallel
  {
    Ray ray;
#pragma omp for schedule(static)
    for (std::ptrdiff_t s = 0; s < count; ++s) {
      try {
        if (family.make_ray(static_cast<std::size_t>(s), ray)) fn(static_cast<std::size_t>(s), ray);
      } catch (...) {
#pragma omp critical(stresstomo_ray_error)
        {
          if (s < error_slot) {
            error_slot = s;
            error = std::current_exception();
          }
        }
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Linear ray operator with per-node coefficients: for slot s with quadrature weights w_i,
///   out[s*W + r] = sum_i w_i sum_c coeff_i[r*NC + c] * field_c(x_i).
/// coeff(ray, i, double* c) fills all W*NC coefficients at node i.
template <int NC, int W, class Coeff>
class RayOperator {
 public:
  RayOperator(const RayFamily& family, Coeff coeff, Interp order = kRayInterp)
      : family_(family), coeff_(coeff), order_(order) {}

  std::size_t slots() const { return family_.size(); }
  Interp order() const { return order_; }

  /// Dense over slots; present[s] = 0 for slots missing the domain (their values are 0).
  void forward(const Field<NC>& field, double* out, std::uint8_t* present, Exec exec) const {
    const std::size_t count = family_.size();
    for (std::size_t s = 0; s < count * W; ++s) out[s] = 0.0;
    if (present != nullptr) {
      for (std::size_t s = 0; s < count; ++s) present[s] = 0;
    }
    for_each_ray(family_, exec, [&](std::size_t slot, const Ray& ray) {
      double c[W * NC];
      double vals[NC];
      double acc[W] = {};
      for (std::size_t i = 0; i < ray.size(); ++i) {
        coeff_(ray, i, c);
        field.interpolate(ray.points[i], vals, order_);
        for (int r = 0; r < W; ++r) {
          double s = 0.0;
          for (int k = 0; k < NC; ++k) s += c[r * NC + k] * vals[k];
          acc[r] += ray.weight[i] * s;
        }
      }
      for (int r = 0; r < W; ++r) out[slot * W + r] = acc[r];
      if (present != nullptr) present[slot] = 1;
    });
  }

  /// Transpose of forward: accumulates into out (which is not cleared).
  void adjoint(const double* data, Field<NC>& out, Exec exec) const {
    if (exec == Exec::serial) {
      for_each_ray(family_, Exec::serial, [&](std::size_t slot, const Ray& ray) { scatter_ray(slot, ray, data, out); });
      return;
    }
    const int threads = max_threads();
    std::vector<Field<NC>> partial;
    partial.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) partial.emplace_back(out.grid());
    const auto count = static_cast<std::ptrdiff_t>(family_.size());
#pragma omp parallel num_threads(threads)
    {
      Ray ray;
      Field<NC>& mine = partial[static_cast<std::size_t>(thread_id())];
#pragma omp for schedule(static)
      for (std::ptrdiff_t s = 0; s < count; ++s) {
        if (family_.make_ray(static_cast<std::size_t>(s), ray)) scatter_ray(static_cast<std::size_t>(s), ray, data, mine);
      }
    }
    // Fixed-order reduction keeps results independent of scheduling.
    auto dst = out.values();
    for (int t = 0; t < threads; ++t) {
      const auto src = partial[static_cast<std::size_t>(t)].values();
      for (std::size_t n = 0; n < dst.size(); ++n) dst[n] += src[n];
    }
  }

 private:
  const RayFamily& family_;
  Coeff coeff_;
  Interp order_;

  void scatter_ray(std::size_t slot, const Ray& ray, const double* data, Field<NC>& out) const {
    const double* d = data + slot * W;
    bool any = false;
    for (int r = 0; r < W; ++r) any = any || d[r] != 0.0;
    if (!any) return;
    double c[W * NC];
    double tmp[NC];
    for (std::size_t i = 0; i < ray.size(); ++i) {
      coeff_(ray, i, c);
      for (int k = 0; k < NC; ++k) {
        double s = 0.0;
        for (int r = 0; r < W; ++r) s += c[r * NC + k] * d[r];
        tmp[k] = ray.weight[i] * s;
      }
      out.scatter(make_stencil(out.grid(), ray.points[i], order_), tmp);
    }
  }
};

template <int NC, int W, class Coeff>
RayOperator<NC, W, Coeff> make_ray_operator(const RayFamily& family, Coeff coeff, Interp order = kRayInterp) {
  return RayOperator<NC, W, Coeff>(family, coeff, order);
}

}  // namespace stresstomo
