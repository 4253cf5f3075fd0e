#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ensemble.hpp"

namespace glkpz {

// Characteristic shift D(t) = 2 N^{3/2} int_0^t alpha_bar and its integer-crossing times.
class Characteristic {
 public:
  Characteristic() = default;
  Characteristic(const CoefficientCache& cache, int N, double T_final, double grid_step = 0.0)
      : cache_(&cache), N_(N), T_(T_final) {
    if (T_final > cache.t_max() + 1e-12)
      throw std::out_of_range("characteristic horizon exceeds the coefficient table");
    scale_ = 2.0 * N * std::sqrt(static_cast<double>(N));
    if (T_final <= 0) return;
    if (grid_step <= 0) grid_step = cache.step();
    // refine until D moves by less than 1/2 per cell, so each cell holds at most one crossing
    int cells = std::max(1, static_cast<int>(std::ceil(T_final / grid_step)));
    while (D(T_final) / cells >= 0.5) cells *= 2;
    double t0 = 0.0, d0 = D(0.0);
    for (int i = 1; i <= cells; ++i) {
      const double t1 = T_final * i / cells;
      const double d1 = D(t1);
      const double k = std::floor(d1);
      if (k > std::floor(d0)) jumps_.push_back(crossing(t0, t1, k));
      t0 = t1;
      d0 = d1;
    }
  }

  double D(double t) const { return scale_ * cache_->int_alpha(0.0, t); }

  // number of jump times in (0, t]; equals floor(D(t)) away from crossings
  long offset(double t) const {
    return static_cast<long>(std::upper_bound(jumps_.begin(), jumps_.end(), t) - jumps_.begin());
  }
  long offset(double s, double t) const { return offset(t) - offset(s); }

  // x(t) = x - floor(D(t))
  long shifted(long x, double t) const { return x - offset(t); }

  const std::vector<double>& jumps() const { return jumps_; }
  int N() const { return N_; }
  double horizon() const { return T_; }
  const CoefficientCache& cache() const { return *cache_; }

 private:
  double crossing(double a, double b, double k) const {
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, b); ++it) {
      const double m = 0.5 * (a + b);
      if (D(m) >= k) b = m; else a = m;
    }
    return b;
  }

  const CoefficientCache* cache_ = nullptr;
  int N_ = 0;
  double T_ = 0.0;
  double scale_ = 0.0;
  std::vector<double> jumps_;
};

}  // namespace glkpz
