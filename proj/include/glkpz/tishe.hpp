#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "characteristic.hpp"
#include "cole_hopf.hpp"
#include "ensemble.hpp"
#include "heat_kernel.hpp"
#include "lattice_sde.hpp"
#include "torus.hpp"

namespace glkpz {

struct WState {
  double t = 0.0;
  std::vector<double> W;
  bool breached = false;
  std::uint64_t steps = 0;
  std::uint64_t breach_step = 0;
  double last_log_term = 0.0;  // sup |lambda'/lambda W log W| of the latest step
};

inline WState make_wstate(std::vector<double> W, double t = 0.0) {
  WState s;
  s.t = t;
  s.W = std::move(W);
  for (double w : s.W)
    if (!(w > 0)) throw std::invalid_argument("W must start strictly positive");
  return s;
}

// When the characteristic jumps are applied to W.
enum class JumpTiming {
  synchronized,  // at the jump times of Z; smoothing uses the jump-free kernel (W lives in Z's frame)
  span_ahead,    // at t + span, with the full kernel H^N(t, t+span) (W lives in the frame of S)
};

// One explicit step of
//   dW = T(t+span) W dt + H^N(t,t+span){ sqrt2 lambda N^{1/2} W dB(.(t)) + (lambda'/lambda) W log W dt }
// followed by the characteristic jumps. `dB` is the unshifted tape row.
// Returns false (and sets the breach flag) if W leaves (0, inf).
inline bool w_step(WState& s, const KernelEngine& e, double dt, std::span<const double> dB, double span,
                   JumpTiming timing = JumpTiming::synchronized) {
  if (s.breached) return false;
  const auto& cache = e.cache();
  const auto& ch = e.characteristic();
  const std::size_t n = s.W.size();
  if (dB.size() != n || static_cast<int>(n) != e.N()) throw std::invalid_argument("noise slice size mismatch");
  const double lam = cache.lambda(s.t);
  if (std::abs(lam) < 1e-8)
    throw DegenerateMeasureError("lambda(t) below 1e-8: the W equation is degenerate");
  const double N = static_cast<double>(n);
  const double lp = cache.lambda_prime(s.t);
  const double rate = lp / lam;
  const double gain = std::sqrt(2.0) * lam * std::sqrt(N);
  const long off = ch.offset(s.t);
  std::vector<double> inner(n);
  double logsup = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const double w = s.W[x];
    const double lt = (lp == 0.0) ? 0.0 : rate * w * std::log(w);
    logsup = std::max(logsup, std::abs(lt));
    inner[x] = gain * w * dB[wrap_index(static_cast<long>(x) - off, n)] + dt * lt;
  }
  s.last_log_term = logsup;
  const auto drift = e.generator(s.t + span, s.W);
  std::vector<double> smoothed;
  if (timing == JumpTiming::span_ahead || span == 0.0) {
    smoothed = smoothed_gartner(inner, e, s.t, span);
  } else {
    KernelSlice ks = e.build(s.t, s.t + span);
    ks.offset = 0;
    smoothed = glkpz::apply(ks, inner);
  }
  std::vector<double> next(n);
  for (std::size_t x = 0; x < n; ++x) next[x] = s.W[x] + dt * drift[x] + smoothed[x];
  const double lag = timing == JumpTiming::span_ahead ? span : 0.0;
  const long jumps = ch.offset(s.t + lag, s.t + dt + lag);
  for (std::size_t x = 0; x < n; ++x) s.W[x] = next[wrap_index(static_cast<long>(x) - jumps, n)];
  s.t += dt;
  ++s.steps;
  for (double w : s.W)
    if (!(w > 0) || !std::isfinite(w)) {
      s.breached = true;
      s.breach_step = s.steps;
      return false;
    }
  return true;
}

struct CouplingConfig {
  std::vector<int> N_list{16, 32, 64};
  int seeds = 30;
  std::uint64_t base_seed = 1;
  double T = 0.25;
  double span_factor = 0.1;  // smoothing span = span_factor * N^{-2}
  double dt_factor = 1.0;
  int dt_ref_N = 0;  // > 0: the time step fraction at N is dt_factor * min(1, dt_ref_N / N)
  double c_stab = 0.5;
  int record_every = 50;
  int burn_in = 50;
  JumpTiming timing = JumpTiming::synchronized;
};

struct GapPoint {
  int N = 0;
  std::uint64_t seed = 0;
  double t = 0.0;
  double sup_gap = 0.0;
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double sup_gap = 0.0;
  bool breached = false;
  bool overflow = false;
  double max_log_term = 0.0;
};

struct CouplingRow {
  int N = 0;
  std::vector<SeedOutcome> seeds;
  double median_gap = 0.0;
  int breaches = 0;
  int overflows = 0;
};

struct CouplingReport {
  std::vector<CouplingRow> rows;
  std::vector<GapPoint> curve;
  bool monotone = false;
  double breach_fraction = 0.0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return (v.size() % 2) ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// One seed at one N: SDE and W driven by the same tape, W(0) = Z(0).
inline SeedOutcome coupling_run(const Potential& pot, const CoefficientCache& cache, const CouplingConfig& c,
                                int N, std::uint64_t seed, std::vector<GapPoint>* curve = nullptr) {
  SeedOutcome out;
  out.seed = seed;
  const double span = c.span_factor / (static_cast<double>(N) * N);
  const Characteristic ch(cache, N, std::min(cache.t_max(), c.T + 2.0 * span + 1e-9));
  const KernelEngine eng(cache, ch);
  SdeConfig sc;
  sc.N = N;
  sc.dt_factor = c.dt_ref_N > 0 ? c.dt_factor * std::min(1.0, static_cast<double>(c.dt_ref_N) / N) : c.dt_factor;
  sc.c_stab = c.c_stab;
  sc.T_final = c.T;
  sc.burn_in = c.burn_in;
  validate(sc);
  const TimeGrid g = time_grid(pot, sc);
  const NoiseTape tape(seed, N, g.dt);
  LatticeState s = make_state(initial_field(pot, sc, seed));
  WState w = make_wstate(gartner(height(s, ch, cache), cache));
  auto gap = [&] {
    const auto Z = gartner(height(s, ch, cache), cache);
    double m = 0.0;
    for (std::size_t x = 0; x < Z.size(); ++x) m = std::max(m, std::abs(Z[x] - w.W[x]));
    return m;
  };
  if (curve) curve->push_back({N, seed, 0.0, 0.0});
  std::vector<double> dB(static_cast<std::size_t>(N));
  try {
    for (std::uint64_t k = 0; k < g.steps; ++k) {
      tape.row(k, dB);
      if (!w_step(w, eng, g.dt, dB, span, c.timing)) {
        out.breached = true;
        break;
      }
      step(s, pot, g.dt, dB, c.c_stab);
      if (k + 1 == g.steps) s.t = w.t = c.T;
      out.max_log_term = std::max(out.max_log_term, w.last_log_term);
      const double gp = gap();
      out.sup_gap = std::max(out.sup_gap, gp);
      if (curve && ((k + 1) % static_cast<std::uint64_t>(c.record_every) == 0 || k + 1 == g.steps))
        curve->push_back({N, seed, s.t, gp});
    }
  } catch (const OverflowError&) {
    out.overflow = true;
  }
  return out;
}

inline CouplingReport coupling_experiment(const Potential& pot, const CouplingConfig& c,
                                          const CoefficientCache* shared = nullptr) {
  if (c.N_list.empty()) throw std::invalid_argument("coupling experiment needs at least one N");
  if (c.seeds < 1) throw std::invalid_argument("coupling experiment needs at least one seed");
  double margin = 0.0;
  for (int N : c.N_list) margin = std::max(margin, 2.0 * c.span_factor / (static_cast<double>(N) * N));
  std::unique_ptr<CoefficientCache> own;
  if (!shared) {
    own = std::make_unique<CoefficientCache>(pot, c.T + margin + 1e-3);
    shared = own.get();
  }
  if (shared->degenerate())
    throw DegenerateMeasureError("alpha_bar_wedge vanishes (lambda = 0): no KPZ coupling to test");
  CouplingReport rep;
  int total = 0, breaches = 0;
  for (int N : c.N_list) {
    CouplingRow row;
    row.N = N;
    std::vector<double> gaps;
    for (int i = 0; i < c.seeds; ++i) {
      const std::uint64_t seed = derive_seed(c.base_seed, static_cast<std::uint64_t>(Stream::aux),
                                             static_cast<std::uint64_t>(i));
      auto o = coupling_run(pot, *shared, c, N, seed, &rep.curve);
      ++total;
      if (o.breached || o.overflow) {
        ++breaches;
        if (o.breached) ++row.breaches;
        if (o.overflow) ++row.overflows;
      } else {
        gaps.push_back(o.sup_gap);
      }
      row.seeds.push_back(o);
    }
    row.median_gap = median(gaps);
    rep.rows.push_back(std::move(row));
  }
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].median_gap < rep.rows[i - 1].median_gap)) rep.monotone = false;
  rep.breach_fraction = static_cast<double>(breaches) / total;
  return rep;
}

}  // namespace glkpz
