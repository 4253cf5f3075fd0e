#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "characteristic.hpp"
#include "ensemble.hpp"
#include "heat_kernel.hpp"
#include "lattice_sde.hpp"
#include "torus.hpp"

namespace glkpz {

struct OverflowError : NumericalError {
  using NumericalError::NumericalError;
};

struct HeightField {
  double t = 0.0;
  std::vector<double> h;
  double renorm_integral = 0.0;  // int_0^t R
  long offset = 0;               // floor D(t), as a jump count
};

// h(t,x) = J(t, x(t)) - int_0^t R. J is extended periodically (zero-charge convention); with
// nonzero total charge the wrap adds N^{-1/2} sum U per winding, which is ignored.
inline HeightField height_from_current(std::span<const double> J, double t, const Characteristic& ch,
                                       const CoefficientCache& cache) {
  HeightField f;
  f.t = t;
  f.offset = ch.offset(t);
  f.renorm_integral = (t == 0.0) ? 0.0 : cache.int_renorm(0.0, t);
  const std::size_t n = J.size();
  f.h.resize(n);
  for (std::size_t x = 0; x < n; ++x)
    f.h[x] = J[wrap_index(static_cast<long>(x) - f.offset, n)] - f.renorm_integral;
  return f;
}

inline HeightField height(const LatticeState& s, const Characteristic& ch, const CoefficientCache& cache) {
  const auto J = s.current();
  return height_from_current(J, s.t, ch, cache);
}

inline HeightField height(const LatticeTrajectory& traj, const Characteristic& ch,
                          const CoefficientCache& cache, double t) {
  const Snapshot& snap = traj.at_time(t);
  const LatticeState s = make_state(snap.U, snap.t, snap.J0);
  return height(s, ch, cache);
}

namespace detail {
inline double guarded_exp(double v) {
  if (!(std::abs(v) <= 700.0))
    throw OverflowError("|lambda h| = " + std::to_string(std::abs(v)) + " exceeds 700");
  return std::exp(v);
}
}  // namespace detail

// Z(t,x) = exp[lambda(t) h(t,x)]
inline std::vector<double> gartner(const HeightField& f, const CoefficientCache& cache) {
  const double lam = cache.lambda(f.t);
  std::vector<double> z(f.h.size());
  for (std::size_t x = 0; x < z.size(); ++x) z[x] = detail::guarded_exp(lam * f.h[x]);
  return z;
}

// G(t,x) = exp[lam J(t,x) - lam int_0^t R], unshifted; lam = lambda(t) unless frozen at lambda(s).
inline std::vector<double> gartner_unshifted(const LatticeState& s, const CoefficientCache& cache,
                                             double frozen_time = -1.0) {
  const double lam = cache.lambda(frozen_time < 0 ? s.t : frozen_time);
  const double ir = (s.t == 0.0) ? 0.0 : cache.int_renorm(0.0, s.t);
  const auto J = s.current();
  std::vector<double> g(J.size());
  for (std::size_t x = 0; x < g.size(); ++x) g[x] = detail::guarded_exp(lam * (J[x] - ir));
  return g;
}

struct MonitorResult {
  double value = 0.0;
  double threshold = 0.0;
  bool exceeded = false;
};

// sup_{x != y} |h(x) - h(y)| / (N^{1/2} |x - y|^{1/2}) over all pairs, geodesic distance.
inline MonitorResult hoelder_monitor(std::span<const double> h, double gamma_reg) {
  const int N = static_cast<int>(h.size());
  MonitorResult r;
  r.threshold = std::pow(static_cast<double>(N), gamma_reg);
  std::vector<double> inv(static_cast<std::size_t>(N / 2 + 1), 0.0);
  for (int d = 1; d <= N / 2; ++d) inv[d] = 1.0 / std::sqrt(static_cast<double>(N) * d);
  for (int x = 0; x < N; ++x)
    for (int y = x + 1; y < N; ++y) {
      const int d = std::min(y - x, N - (y - x));
      r.value = std::max(r.value, std::abs(h[x] - h[y]) * inv[d]);
    }
  r.exceeded = r.value >= r.threshold;
  return r;
}

struct ApResult {
  double max_val = 0.0;  // max(|Z|, |S|)
  double min_val = 0.0;  // min(Z, S)
  double threshold = 0.0;
  bool exceeded = false;
};

// Flags the a-priori stopping condition: max(||Z||, ||S||) or max(||1/Z||, ||1/S||) reaching
// N^{gamma_ap} log N.
inline ApResult ap_monitor(std::span<const double> Z, std::span<const double> S, double gamma_ap) {
  const double N = static_cast<double>(Z.size());
  ApResult r;
  r.threshold = std::pow(N, gamma_ap) * std::log(N);
  r.min_val = std::numeric_limits<double>::infinity();
  auto scan = [&r](std::span<const double> v) {
    for (double z : v) {
      r.max_val = std::max(r.max_val, std::abs(z));
      r.min_val = std::min(r.min_val, z);
    }
  };
  scan(Z);
  scan(S);
  const double inv = r.min_val > 0 ? 1.0 / r.min_val : std::numeric_limits<double>::infinity();
  r.exceeded = r.max_val >= r.threshold || inv >= r.threshold;
  return r;
}

// S(t,x) = H^N(t, t + span, x){Z}
inline std::vector<double> smoothed_gartner(std::span<const double> Z, const KernelEngine& e, double t,
                                            double span) {
  if (!(span >= 0)) throw std::invalid_argument("smoothing span must be nonnegative");
  if (span == 0.0) return {Z.begin(), Z.end()};
  return glkpz::apply(e.build(t, t + span), Z);
}

}  // namespace glkpz
