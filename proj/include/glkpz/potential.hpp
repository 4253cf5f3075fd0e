#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadrature.hpp"
#include "spline.hpp"

namespace glkpz {

struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class PotentialKind {
  gaussian,       // a^2/2
  perturbed,      // a^2/2 + eps c(t) s(a) - lambda0(t) a, asymmetric (non-degenerate KPZ)
  perturbed_cos,  // a^2/2 + eps sin(omega t) cos(a) - lambda0(t) a, even in a (lambda == 0)
};

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::gaussian: return "gaussian";
    case PotentialKind::perturbed: return "perturbed";
    case PotentialKind::perturbed_cos: return "perturbed_cos";
  }
  return "?";
}

struct PotentialOptions {
  double delta = 0.3;              // smoothing scale of the asymmetric profile s
  bool shifted = true;             // false gives the mis-shifted control (lambda(0,t) != 0)
  double shift_grid_step = 1.0 / 256;
  double a_domain = 16.0;          // |a| range on which d_max is declared
  double shift_tol = 1e-14;
};

// Time-dependent convex potential, immutable once built.
class Potential {
 public:
  // Fixed-time view with the time factors precomputed.
  class Slice {
   public:
    double V(double a) const { return p_->base_U(ct_, a) - shift_ * a; }
    double dV(double a) const { return p_->base_dU(ct_, a) - shift_; }
    double d2V(double a) const { return p_->base_d2U(ct_, a); }
    double c_lo() const { return p_->c_lo_; }
    double c_hi() const { return p_->c_hi_; }
    double t() const { return t_; }

   private:
    friend class Potential;
    const Potential* p_ = nullptr;
    double t_ = 0.0, ct_ = 0.0, shift_ = 0.0;
  };

  Slice at(double t) const {
    Slice s;
    s.p_ = this;
    s.t_ = t;
    s.ct_ = time_factor(t);
    s.shift_ = shift(t);
    return s;
  }

  double U(double t, double a) const { return at(t).V(a); }
  double dU(double t, double a) const { return at(t).dV(a); }
  double d2U(double t, double a) const { return at(t).d2V(a); }
  double dtU(double t, double a) const { return eps_ * dtime_factor(t) * prof(a) - dshift(t) * a; }
  double dtdU(double t, double a) const { return eps_ * dtime_factor(t) * dprof(a) - dshift(t); }

  double c_lo() const { return c_lo_; }
  double c_hi() const { return c_hi_; }
  double d_max() const { return d_max_; }
  double a_domain() const { return opt_.a_domain; }
  double eps() const { return eps_; }
  double omega() const { return omega_; }
  PotentialKind kind() const { return kind_; }
  bool shifted() const { return opt_.shifted; }
  bool time_independent() const { return kind_ == PotentialKind::gaussian || omega_ == 0.0 || eps_ == 0.0; }

  // lambda0(t): the affine shift making lambda(0,t) = 0
  double shift(double t) const {
    if (!opt_.shifted) return 0.0;
    return spline_ ? (*spline_)(t) : shift_const_;
  }
  double dshift(double t) const {
    if (!opt_.shifted) return 0.0;
    return spline_ ? spline_->prime(t) : 0.0;
  }

  std::string describe() const;

  friend Potential gaussian_potential();
  friend Potential make_potential(PotentialKind, double, double, const PotentialOptions&, bool);

 private:
  // unshifted pieces; ct is the time factor multiplying eps
  double prof(double a) const {
    if (kind_ == PotentialKind::perturbed) {
      const double d = opt_.delta, r = std::sqrt(d * d + a * a);
      return 0.5 * (a * r + d * d * std::asinh(a / d));
    }
    if (kind_ == PotentialKind::perturbed_cos) return std::cos(a);
    return 0.0;
  }
  double dprof(double a) const {
    if (kind_ == PotentialKind::perturbed) return std::sqrt(opt_.delta * opt_.delta + a * a);
    if (kind_ == PotentialKind::perturbed_cos) return -std::sin(a);
    return 0.0;
  }
  double d2prof(double a) const {
    if (kind_ == PotentialKind::perturbed) return a / std::sqrt(opt_.delta * opt_.delta + a * a);
    if (kind_ == PotentialKind::perturbed_cos) return -std::cos(a);
    return 0.0;
  }
  double time_factor(double t) const {
    if (kind_ == PotentialKind::perturbed) return 0.25 * (3.0 + std::cos(omega_ * t));
    if (kind_ == PotentialKind::perturbed_cos) return std::sin(omega_ * t);
    return 0.0;
  }
  double dtime_factor(double t) const {
    if (kind_ == PotentialKind::perturbed) return -0.25 * omega_ * std::sin(omega_ * t);
    if (kind_ == PotentialKind::perturbed_cos) return omega_ * std::cos(omega_ * t);
    return 0.0;
  }
  double base_U(double ct, double a) const { return 0.5 * a * a + eps_ * ct * prof(a); }
  double base_dU(double ct, double a) const { return a + eps_ * ct * dprof(a); }
  double base_d2U(double ct, double a) const { return 1.0 + eps_ * ct * d2prof(a); }

  // unshifted slice, used to solve for lambda0
  struct Raw {
    const Potential* p;
    double ct;
    double V(double a) const { return p->base_U(ct, a); }
    double dV(double a) const { return p->base_dU(ct, a); }
    double d2V(double a) const { return p->base_d2U(ct, a); }
    double c_lo() const { return p->c_lo_; }
    double c_hi() const { return p->c_hi_; }
  };

  void build_shift();
  void compute_d_max();

  PotentialKind kind_ = PotentialKind::gaussian;
  double eps_ = 0.0, omega_ = 0.0;
  double c_lo_ = 1.0, c_hi_ = 1.0, d_max_ = 0.0;
  PotentialOptions opt_{};
  double shift_const_ = 0.0;
  std::shared_ptr<const GridSpline> spline_;
};

inline void Potential::build_shift() {
  if (!opt_.shifted || kind_ == PotentialKind::gaussian || eps_ == 0.0) return;
  auto solve = [this](double t) {
    Raw r{this, time_factor(t)};
    return quad::solve_tilt(r, 0.0, opt_.shift_tol).lambda;
  };
  if (omega_ == 0.0) {
    shift_const_ = solve(0.0);
    return;
  }
  const double period = 2.0 * M_PI / std::abs(omega_);
  const int n = std::max(8, static_cast<int>(std::ceil(period / opt_.shift_grid_step)));
  spline_ = std::make_shared<GridSpline>(solve, 0.0, period / n, n, period);
}

inline void Potential::compute_d_max() {
  if (time_independent()) {
    d_max_ = 0.0;
    return;
  }
  const double A = opt_.a_domain;
  double prof_max = 0.0, dprof_max = 0.0;
  for (int i = 0; i <= 2000; ++i) {
    const double a = -A + 2.0 * A * i / 2000.0;
    prof_max = std::max(prof_max, std::abs(prof(a)));
    dprof_max = std::max(dprof_max, std::abs(dprof(a)));
  }
  double dshift_max = 0.0;
  if (spline_) {
    const double period = 2.0 * M_PI / std::abs(omega_);
    for (int i = 0; i <= 4096; ++i) dshift_max = std::max(dshift_max, std::abs(dshift(period * i / 4096.0)));
  }
  double dtf = std::abs(omega_);
  if (kind_ == PotentialKind::perturbed) dtf *= 0.25;
  d_max_ = 1.01 * (std::abs(eps_) * dtf * (prof_max + dprof_max) + dshift_max * (A + 1.0));
}

inline std::string Potential::describe() const {
  return to_string(kind_) + "(eps=" + std::to_string(eps_) + ", omega=" + std::to_string(omega_) +
         (opt_.shifted ? "" : ", unshifted") + ")";
}

inline Potential gaussian_potential() {
  Potential p;
  p.kind_ = PotentialKind::gaussian;
  return p;
}

// Builds a perturbed potential. `checked=false` skips the |eps| < 1/2 guard (used to
// construct deliberately invalid instances); declared bounds stay those of the admissible class.
inline Potential make_potential(PotentialKind kind, double eps, double omega,
                                const PotentialOptions& opt = {}, bool checked = true) {
  if (kind == PotentialKind::gaussian) return gaussian_potential();
  if (checked && !(std::abs(eps) < 0.5))
    throw DomainError("perturbed potential requires |eps| < 1/2 (convexity), got eps=" +
                      std::to_string(eps));
  if (!(opt.delta > 0)) throw DomainError("potential.delta must be positive");
  Potential p;
  p.kind_ = kind;
  p.eps_ = eps;
  p.omega_ = omega;
  p.opt_ = opt;
  const double e = std::min(std::abs(eps), 0.5);
  p.c_lo_ = 1.0 - e;
  p.c_hi_ = 1.0 + e;
  p.build_shift();
  p.compute_d_max();
  return p;
}

inline Potential perturbed_potential(double eps, double omega, const PotentialOptions& opt = {}) {
  return make_potential(PotentialKind::perturbed, eps, omega, opt);
}

inline Potential perturbed_cos_potential(double eps, double omega, const PotentialOptions& opt = {}) {
  return make_potential(PotentialKind::perturbed_cos, eps, omega, opt);
}

struct ValidationReport {
  double min_d2U = std::numeric_limits<double>::infinity();
  double max_d2U = -std::numeric_limits<double>::infinity();
  double max_time_derivative = 0.0;  // max |dtU| + |dtU'|
  bool convexity_ok = false;
  bool time_bound_ok = false;
  bool pass = false;
};

inline ValidationReport validate_assumptions(const Potential& pot, const std::vector<double>& t_grid,
                                             const std::vector<double>& a_grid) {
  if (t_grid.empty() || a_grid.empty()) throw std::invalid_argument("validation grids must be nonempty");
  ValidationReport r;
  for (double t : t_grid) {
    const auto s = pot.at(t);
    for (double a : a_grid) {
      const double c = s.d2V(a);
      r.min_d2U = std::min(r.min_d2U, c);
      r.max_d2U = std::max(r.max_d2U, c);
      r.max_time_derivative =
          std::max(r.max_time_derivative, std::abs(pot.dtU(t, a)) + std::abs(pot.dtdU(t, a)));
    }
  }
  const double tol = 1e-12;
  r.convexity_ok = r.min_d2U >= pot.c_lo() - tol && r.max_d2U <= pot.c_hi() + tol && r.min_d2U > 0;
  r.time_bound_ok = r.max_time_derivative <= pot.d_max() + tol;
  r.pass = r.convexity_ok && r.time_bound_ok;
  return r;
}

inline std::vector<double> uniform_grid(double a, double b, double step) {
  std::vector<double> g;
  const int n = static_cast<int>(std::floor((b - a) / step + 1e-9));
  g.reserve(n + 1);
  for (int i = 0; i <= n; ++i) g.push_back(a + i * step);
  return g;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = (n == 1) ? a : a + (b - a) * i / (n - 1);
  return g;
}

}  // namespace glkpz
