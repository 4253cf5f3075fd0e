#pragma once

// Quadrature against tilted log-concave densities exp(lambda*u - V(u)).
// Everything downstream (tilt, expectations, samplers' mode search) runs through here.

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace glkpz {

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConvergenceError : NumericalError {
  using NumericalError::NumericalError;
};

namespace quad {

inline constexpr int kGaussOrder = 20;

struct Rule {
  std::array<double, kGaussOrder> x{};
  std::array<double, kGaussOrder> w{};
};

// Full 20-point Gauss-Legendre rule on [-1, 1] (boost stores the nonnegative half).
inline const Rule& gauss_rule() {
  static const Rule rule = [] {
    using G = boost::math::quadrature::gauss<double, kGaussOrder>;
    const auto& a = G::abscissa();
    const auto& w = G::weights();
    Rule r;
    const int half = kGaussOrder / 2;
    for (int i = 0; i < half; ++i) {
      r.x[half - 1 - i] = -a[i];
      r.w[half - 1 - i] = w[i];
      r.x[half + i] = a[i];
      r.w[half + i] = w[i];
    }
    return r;
  }();
  return rule;
}

// Composite Gauss-Legendre on [a, b] with `panels` equal panels.
template <class F>
double integrate(F&& f, double a, double b, int panels) {
  const Rule& r = gauss_rule();
  const double h = (b - a) / panels;
  double sum = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    double ps = 0.0;
    for (int i = 0; i < kGaussOrder; ++i) ps += r.w[i] * f(mid + 0.5 * h * r.x[i]);
    sum += 0.5 * h * ps;
  }
  return sum;
}

struct Options {
  double half_width_sd = 13.0;  // in units of the sub-Gaussian scale 1/sqrt(c_lo)
  int min_panels = 16;
  int max_panels = 1024;
  double rel_tol = 1e-13;
};

// Node table of a normalized tilted density; E F = sum_i w_i F(x_i).
struct Table {
  std::vector<double> x;
  std::vector<double> w;
  double lambda = 0.0;
  double mode = 0.0;
  double log_norm = 0.0;  // log of int exp(lambda u - V(u)) du
  double lo = 0.0, hi = 0.0;
  int panels = 0;

  template <class F>
  double expect(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * f(x[i]);
    return s;
  }
  double mean() const {
    return expect([](double u) { return u; });
  }
  double variance() const {
    const double m = mean();
    return expect([m](double u) { return (u - m) * (u - m); });
  }
};

// A one-dimensional strictly convex potential slice: needs V, dV, d2V and curvature bounds.
template <class S>
concept Slice = requires(const S& s, double u) {
  { s.V(u) } -> std::convertible_to<double>;
  { s.dV(u) } -> std::convertible_to<double>;
  { s.d2V(u) } -> std::convertible_to<double>;
  { s.c_lo() } -> std::convertible_to<double>;
  { s.c_hi() } -> std::convertible_to<double>;
};

// Root of the increasing function g(u) = dV(u) - rhs; dV has slope in [c_lo, c_hi].
template <Slice S>
double solve_gradient(const S& s, double rhs, double guess = 0.0) {
  double u = guess;
  double r = s.dV(u) - rhs;
  if (r == 0.0) return u;
  double lo, hi;
  const double d = std::abs(r) / s.c_lo() * 1.0000001 + 1e-300;
  if (r > 0) {
    lo = u - d;
    hi = u;
  } else {
    lo = u;
    hi = u + d;
  }
  for (int it = 0; it < 200; ++it) {
    const double slope = s.d2V(u);
    double un = u - r / slope;
    if (!(un > lo && un < hi)) un = 0.5 * (lo + hi);
    u = un;
    r = s.dV(u) - rhs;
    if (r > 0) hi = u; else lo = u;
    if (std::abs(r) <= 1e-15 * (1.0 + std::abs(rhs)) || hi - lo <= 1e-15 * (1.0 + std::abs(u)))
      return u;
  }
  return u;
}

template <Slice S>
Table build_fixed(const S& s, double lambda, int panels, const Options& opt = {}) {
  Table t;
  t.lambda = lambda;
  t.mode = solve_gradient(s, lambda, 0.0);
  const double scale = 1.0 / std::sqrt(s.c_lo());
  t.lo = t.mode - opt.half_width_sd * scale;
  t.hi = t.mode + opt.half_width_sd * scale;
  t.panels = panels;
  const Rule& r = gauss_rule();
  const double h = (t.hi - t.lo) / panels;
  const double g0 = lambda * t.mode - s.V(t.mode);
  t.x.resize(static_cast<std::size_t>(panels) * kGaussOrder);
  t.w.resize(t.x.size());
  double z = 0.0;
  std::size_t k = 0;
  for (int p = 0; p < panels; ++p) {
    const double mid = t.lo + (p + 0.5) * h;
    for (int i = 0; i < kGaussOrder; ++i, ++k) {
      const double u = mid + 0.5 * h * r.x[i];
      const double wt = 0.5 * h * r.w[i] * std::exp(lambda * u - s.V(u) - g0);
      t.x[k] = u;
      t.w[k] = wt;
      z += wt;
    }
  }
  for (double& wk : t.w) wk /= z;
  t.log_norm = g0 + std::log(z);
  return t;
}

// Panel doubling until normalizer, mean and variance agree between levels.
template <Slice S>
Table build(const S& s, double lambda, const Options& opt = {}) {
  Table prev = build_fixed(s, lambda, opt.min_panels, opt);
  for (int p = 2 * opt.min_panels; p <= opt.max_panels; p *= 2) {
    Table cur = build_fixed(s, lambda, p, opt);
    const double dz = std::abs(cur.log_norm - prev.log_norm);
    const double sd = std::sqrt(cur.variance());
    const double dm = std::abs(cur.mean() - prev.mean()) / sd;
    const double dv = std::abs(cur.variance() / prev.variance() - 1.0);
    if (dz < opt.rel_tol && dm < opt.rel_tol && dv < 10 * opt.rel_tol) return cur;
    prev = std::move(cur);
  }
  throw ConvergenceError("quadrature did not converge up to " + std::to_string(opt.max_panels) +
                         " panels");
}

struct TiltResult {
  double lambda = 0.0;
  Table table;
  int iterations = 0;
};

// Tilt lambda with E[u] = sigma under exp(lambda u - V(u)). d mean / d lambda = variance
// lies in [1/c_hi, 1/c_lo], which gives a guaranteed bracket from any starting point.
template <Slice S>
TiltResult solve_tilt(const S& s, double sigma, double tol, const Options& opt = {},
                      int max_expand = 60) {
  double lam = s.dV(sigma);
  Table t = build(s, lam, opt);
  double r = t.mean() - sigma;
  if (std::abs(r) <= tol) return {lam, std::move(t), 0};
  double lo, hi;
  {
    const double d = s.c_hi() * std::abs(r) * 1.5 + 1e-14;
    if (r > 0) {
      hi = lam;
      lo = lam - d;
    } else {
      lo = lam;
      hi = lam + d;
    }
    int k = 0;
    while (true) {
      const double edge = (r > 0) ? lo : hi;
      const double re = build(s, edge, opt).mean() - sigma;
      if ((r > 0 && re < 0) || (r < 0 && re > 0)) break;
      if (++k > max_expand) throw ConvergenceError("tilt bracket expansion exceeded bound");
      if (r > 0) lo -= (hi - lo); else hi += (hi - lo);
    }
  }
  for (int it = 1; it <= 200; ++it) {
    double ln = lam - r / t.variance();
    if (!(ln > lo && ln < hi)) ln = 0.5 * (lo + hi);
    lam = ln;
    t = build(s, lam, opt);
    r = t.mean() - sigma;
    if (r > 0) hi = lam; else lo = lam;
    if (std::abs(r) <= tol) return {lam, std::move(t), it};
    if (hi - lo < 1e-15 * (1.0 + std::abs(lam))) return {lam, std::move(t), it};
  }
  throw ConvergenceError("tilt iteration did not converge");
}

}  // namespace quad
}  // namespace glkpz
