#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include "quadrature.hpp"

namespace glkpz {

// Cubic B-spline on a uniform grid, optionally periodic, with exact cell-wise integrals.
class GridSpline {
 public:
  GridSpline() = default;

  // Samples f at t0 + i*h for i in [-pad, n + pad]; queries allowed on [t0, t0 + n*h].
  GridSpline(const std::function<double(double)>& f, double t0, double h, int n,
             double period = 0.0)
      : t0_(t0), h_(h), n_(n), period_(period) {
    const int pad = 3;
    std::vector<double> v;
    v.reserve(n + 2 * pad + 1);
    for (int i = -pad; i <= n + pad; ++i) {
      const double t = t0 + i * h;
      v.push_back(f(period > 0 ? wrap(t) : t));
    }
    data_ = v;
    spline_ = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(
        v.begin(), v.end(), t0 - pad * h, h);
    // cumulative integral from t0 at each knot (piecewise cubic: 2-point Gauss is exact)
    cum_.assign(n + 1, 0.0);
    for (int i = 0; i < n; ++i)
      cum_[i + 1] = cum_[i] + cell_integral(t0 + i * h, t0 + (i + 1) * h);
  }

  double operator()(double t) const { return (*spline_)(arg(t)); }
  double prime(double t) const { return spline_->prime(arg(t)); }

  // int_{t0}^{t} of the spline (non-periodic use only)
  double integral(double t) const {
    if (period_ > 0) throw std::logic_error("integral on periodic spline");
    check(t);
    int i = static_cast<int>(std::floor((t - t0_) / h_));
    i = std::clamp(i, 0, n_ - 1);
    return cum_[i] + cell_integral(t0_ + i * h_, t);
  }

  double t_begin() const { return t0_; }
  double t_end() const { return t0_ + n_ * h_; }
  double step() const { return h_; }
  int cells() const { return n_; }

 private:
  double wrap(double t) const {
    double r = std::fmod(t - t0_, period_);
    if (r < 0) r += period_;
    return t0_ + r;
  }
  void check(double t) const {
    const double slack = 1e-9 * h_;
    if (t < t0_ - slack || t > t0_ + n_ * h_ + slack)
      throw std::out_of_range("spline query outside tabulated range");
  }
  double arg(double t) const {
    if (period_ > 0) return wrap(t);
    check(t);
    return t;
  }
  double cell_integral(double a, double b) const {
    static const double g = 1.0 / std::sqrt(3.0);
    const double m = 0.5 * (a + b), r = 0.5 * (b - a);
    return r * ((*spline_)(m - g * r) + (*spline_)(m + g * r));
  }

  double t0_ = 0.0, h_ = 1.0;
  int n_ = 0;
  double period_ = 0.0;
  std::vector<double> data_;
  std::vector<double> cum_;
  std::shared_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> spline_;
};

}  // namespace glkpz
