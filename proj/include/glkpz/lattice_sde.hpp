#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ensemble.hpp"
#include "potential.hpp"
#include "rng.hpp"
#include "torus.hpp"

namespace glkpz {

struct StabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Gradients {
  std::vector<double> plus, minus, asym, laplace;
};

// grad^l phi(x) = phi(x+l) - phi(x) on the torus; asym = plus - minus; laplace = plus + minus.
inline Gradients discrete_gradients(std::span<const double> phi) {
  const std::size_t n = phi.size();
  Gradients g;
  g.plus.resize(n);
  g.minus.resize(n);
  g.asym.resize(n);
  g.laplace.resize(n);
  for (std::size_t x = 0; x < n; ++x) {
    const double c = phi[x], r = phi[(x + 1) % n], l = phi[(x + n - 1) % n];
    g.plus[x] = r - c;
    g.minus[x] = l - c;
    g.asym[x] = g.plus[x] - g.minus[x];
    g.laplace[x] = g.plus[x] + g.minus[x];
  }
  return g;
}

// N^2 Laplace U'(t,U) + N^{3/2} grad^a U'(t,U)
inline std::vector<double> drift(const Potential& pot, double t, std::span<const double> u) {
  const std::size_t n = u.size();
  const double N = static_cast<double>(n);
  const auto sl = pot.at(t);
  std::vector<double> d(n);
  for (std::size_t x = 0; x < n; ++x) d[x] = sl.dV(u[x]);
  const auto g = discrete_gradients(d);
  std::vector<double> out(n);
  const double a = N * N, b = N * std::sqrt(N);
  for (std::size_t x = 0; x < n; ++x) out[x] = a * g.laplace[x] + b * g.asym[x];
  return out;
}

// Largest stable explicit step: c_stab / (4 c_hi N^2).
inline double dt_max(const Potential& pot, int N, double c_stab = 0.5) {
  return c_stab / (4.0 * pot.c_hi() * static_cast<double>(N) * N);
}

// Per-step, per-site Brownian increments; row k is generated from its own derived seed so
// any row can be replayed without storing the tape.
class NoiseTape {
 public:
  NoiseTape() = default;
  NoiseTape(std::uint64_t seed, int N, double dt) : seed_(seed), N_(N), dt_(dt) {}

  void row(std::uint64_t step, std::span<double> out) const {
    Rng r(derive_seed(seed_, static_cast<std::uint64_t>(Stream::noise), step));
    std::normal_distribution<double> nd(0.0, 1.0);
    const double s = std::sqrt(dt_);
    for (auto& v : out) v = s * nd(r);
  }
  std::vector<double> row(std::uint64_t step) const {
    std::vector<double> v(static_cast<std::size_t>(N_));
    row(step, v);
    return v;
  }

  std::uint64_t seed() const { return seed_; }
  int N() const { return N_; }
  double dt() const { return dt_; }

 private:
  std::uint64_t seed_ = 0;
  int N_ = 0;
  double dt_ = 0.0;
};

inline double compensated_sum(std::span<const double> v) {
  double s = 0.0, c = 0.0;
  for (double x : v) {
    const double t = s + x;
    if (std::abs(s) >= std::abs(x)) c += (s - t) + x; else c += (x - t) + s;
    s = t;
  }
  return s + c;
}

struct LatticeState {
  int N = 0;
  double t = 0.0;
  std::vector<double> U;
  double J0 = 0.0;
  double total_charge = 0.0;
  std::uint64_t steps = 0;

  double charge() const { return compensated_sum(U); }

  // J(t,x) = J(t,0) + N^{-1/2} sum_{y=1}^{x} U(y), x in [0, N)
  std::vector<double> current() const {
    std::vector<double> J(U.size());
    const double r = 1.0 / std::sqrt(static_cast<double>(N));
    J[0] = J0;
    for (std::size_t x = 1; x < U.size(); ++x) J[x] = J[x - 1] + r * U[x];
    return J;
  }
};

inline LatticeState make_state(std::vector<double> U, double t = 0.0, double J0 = 0.0) {
  LatticeState s;
  s.N = static_cast<int>(U.size());
  s.t = t;
  s.U = std::move(U);
  s.J0 = J0;
  s.total_charge = s.charge();
  return s;
}

namespace detail {
// Flux form: U(x) += F(x) - F(x-1) with F(x) = N^{1/2} dJ(x); sum over the torus telescopes.
inline void flux_update(std::span<double> u, std::span<const double> dU, std::span<const double> dB,
                        double N, double dt, double* flux0) {
  const std::size_t n = u.size();
  const double a = N * N * dt, b = N * std::sqrt(N) * dt, c = std::sqrt(2.0) * N;
  std::vector<double> F(n);
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t r = (x + 1 == n) ? 0 : x + 1;
    F[x] = a * (dU[r] - dU[x]) + b * (dU[r] + dU[x]) + c * dB[x];
  }
  if (flux0) *flux0 = F[0];
  const double Flast = F[n - 1];
  for (std::size_t x = n; x-- > 1;) u[x] += F[x] - F[x - 1];
  u[0] += F[0] - Flast;
}
}  // namespace detail

// One Euler-Maruyama step of the charge field and the reference current J(t,0).
inline void step(LatticeState& s, const Potential& pot, double dt, std::span<const double> dB,
                 double c_stab = 0.5) {
  if (dt > dt_max(pot, s.N, c_stab) * (1.0 + 1e-12))
    throw StabilityError("time step exceeds the explicit stability bound c_stab/(4 c_hi N^2)");
  if (dB.size() != s.U.size()) throw std::invalid_argument("noise slice size mismatch");
  const auto sl = pot.at(s.t);
  std::vector<double> dU(s.U.size());
  for (std::size_t x = 0; x < dU.size(); ++x) dU[x] = sl.dV(s.U[x]);
  double f0 = 0.0;
  detail::flux_update(s.U, dU, dB, s.N, dt, &f0);
  s.J0 += f0 / std::sqrt(static_cast<double>(s.N));
  s.t += dt;
  ++s.steps;
}

enum class InitialData { canonical, flat };

struct SdeConfig {
  int N = 64;
  double dt_factor = 1.0;   // multiplies dt_max
  double c_stab = 0.5;
  double T_final = 0.01;
  int record_every = 100;   // steps between snapshots
  InitialData initial = InitialData::canonical;
  int burn_in = 50;         // sweeps for canonical initial data
  double sigma = 0.0;       // initial charge density

  bool operator==(const SdeConfig&) const = default;
};

struct TimeGrid {
  std::uint64_t steps = 0;
  double dt = 0.0;
};

// Steps of equal size landing exactly on T, each no larger than dt_factor * dt_max.
inline TimeGrid time_grid(const Potential& pot, const SdeConfig& c) {
  TimeGrid g;
  const double h = c.dt_factor * dt_max(pot, c.N, c.c_stab);
  if (c.T_final <= 0) return g;
  g.steps = static_cast<std::uint64_t>(std::ceil(c.T_final / h - 1e-9));
  g.dt = c.T_final / static_cast<double>(g.steps);
  return g;
}

inline std::vector<double> initial_field(const Potential& pot, const SdeConfig& c, std::uint64_t seed) {
  if (c.initial == InitialData::flat) return std::vector<double>(static_cast<std::size_t>(c.N), c.sigma);
  CanonicalSampler s(pot, c.sigma, 0.0, c.N, make_rng(seed, Stream::initial_data));
  s.sweep(c.burn_in);
  return s.config();
}

struct Snapshot {
  double t = 0.0;
  std::uint64_t step = 0;
  std::vector<double> U;
  double J0 = 0.0;
};

struct LatticeTrajectory {
  int N = 0;
  double dt = 0.0;
  std::uint64_t steps = 0;
  std::uint64_t seed = 0;
  NoiseTape tape;
  double initial_charge = 0.0;
  double max_charge_drift = 0.0;
  std::vector<Snapshot> snapshots;

  const Snapshot& at_time(double t) const {
    for (const auto& s : snapshots)
      if (std::abs(s.t - t) <= 1e-12 * (1.0 + std::abs(t))) return s;
    throw std::out_of_range("time " + std::to_string(t) + " is not a recorded snapshot");
  }
};

inline void validate(const SdeConfig& c) {
  if (c.N < 4) throw ConfigError("sde.N must be ≥ 4");
  if (!(c.dt_factor > 0 && c.dt_factor <= 1)) throw ConfigError("sde.dt_factor must be in (0, 1]");
  if (!(c.T_final >= 0)) throw ConfigError("sde.T_final must be ≥ 0");
  if (c.record_every < 1) throw ConfigError("sde.record_every must be ≥ 1");
}

// Runs the SDE over [0, T_final]. `observer`, if given, sees the state after every step
// together with the noise row that produced it.
inline LatticeTrajectory simulate(
    const SdeConfig& c, const Potential& pot, std::uint64_t seed,
    const std::function<void(const LatticeState&, std::span<const double>)>& observer = {}) {
  validate(c);
  const TimeGrid g = time_grid(pot, c);
  LatticeTrajectory tr;
  tr.N = c.N;
  tr.dt = g.dt;
  tr.steps = g.steps;
  tr.seed = seed;
  tr.tape = NoiseTape(seed, c.N, g.dt);
  LatticeState s = make_state(initial_field(pot, c, seed));
  tr.initial_charge = s.total_charge;
  tr.snapshots.push_back({s.t, 0, s.U, s.J0});
  std::vector<double> dB(static_cast<std::size_t>(c.N));
  for (std::uint64_t k = 0; k < g.steps; ++k) {
    tr.tape.row(k, dB);
    step(s, pot, g.dt, dB, c.c_stab);
    if (k + 1 == g.steps) s.t = c.T_final;  // remove accumulated rounding in t
    tr.max_charge_drift = std::max(tr.max_charge_drift, std::abs(s.charge() - tr.initial_charge));
    if (observer) observer(s, dB);
    if ((k + 1) % static_cast<std::uint64_t>(c.record_every) == 0 || k + 1 == g.steps)
      tr.snapshots.push_back({s.t, k + 1, s.U, s.J0});
  }
  return tr;
}

// ---------------------------------------------------------------------------------------
// localized dynamics on a sub-interval K with its own periodic boundary

struct LocalizedState {
  long K0 = 0;  // global index of inf K
  int L = 0;    // |K|
  int N = 0;    // size of the ambient torus (sets the scaling)
  double t = 0.0;
  std::vector<double> U;
  double J = 0.0;
};

inline LocalizedState restrict_state(const LatticeState& s, long K0, int L) {
  LocalizedState l;
  l.K0 = K0;
  l.L = L;
  l.N = s.N;
  l.t = s.t;
  l.U.resize(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) l.U[k] = s.U[wrap_index(K0 + k, s.U.size())];
  const auto J = s.current();
  l.J = J[wrap_index(K0, s.U.size())];
  return l;
}

// Same scheme as step, with K-periodic gradients; noise taken from the full tape row at the
// global sites of K.
inline void step_localized(LocalizedState& s, const Potential& pot, double dt,
                           std::span<const double> dB_full, double c_stab = 0.5) {
  if (dt > dt_max(pot, s.N, c_stab) * (1.0 + 1e-12))
    throw StabilityError("time step exceeds the explicit stability bound c_stab/(4 c_hi N^2)");
  const auto sl = pot.at(s.t);
  std::vector<double> dU(s.U.size()), dB(s.U.size());
  for (std::size_t k = 0; k < dU.size(); ++k) {
    dU[k] = sl.dV(s.U[k]);
    dB[k] = dB_full[wrap_index(s.K0 + static_cast<long>(k), dB_full.size())];
  }
  double f0 = 0.0;
  detail::flux_update(s.U, dU, dB, s.N, dt, &f0);
  s.J += f0 / std::sqrt(static_cast<double>(s.N));
  s.t += dt;
}

struct LocalizationConfig {
  int N = 256;
  int inner_size = 8;
  double horizon = -1.0;   // frak t; negative means N^{-2}
  double gamma_ap = 0.1;
  int buffer_override = -1;  // >=0 replaces l(t,I) (0 gives the zero-buffer control)
  double dt_factor = 1.0;
  double c_stab = 0.5;
  int burn_in = 50;
};

struct LocalizationResult {
  int l = 0;            // buffer l(t,I)
  int K_size = 0;
  std::uint64_t steps = 0;
  double sup_diff = 0.0;
};

inline int localization_buffer(int N, double horizon, int inner, double gamma_ap) {
  const double n = N;
  return static_cast<int>(std::floor(std::pow(n, gamma_ap) *
                                     (n * std::sqrt(horizon) + n * std::sqrt(n) * horizon + inner)));
}

// Couples the full and localized dynamics on shared noise from identical data on K and
// returns sup over the horizon and x in I(+) = I widened by 10 (intersected with K).
inline LocalizationResult localization_run(const LocalizationConfig& c, const Potential& pot,
                                           std::uint64_t seed) {
  const double horizon = c.horizon < 0 ? 1.0 / (static_cast<double>(c.N) * c.N) : c.horizon;
  LocalizationResult r;
  r.l = c.buffer_override >= 0 ? c.buffer_override
                               : localization_buffer(c.N, horizon, c.inner_size, c.gamma_ap);
  r.K_size = c.inner_size + 2 * r.l;
  if (r.K_size > c.N) throw ConfigError("I(t) exceeds the torus: localization is meaningless");
  if (r.K_size < 2) throw ConfigError("localized interval too small");
  const long I0 = c.N / 2 - c.inner_size / 2;
  const long K0 = I0 - r.l;
  SdeConfig sc;
  sc.N = c.N;
  sc.burn_in = c.burn_in;
  LatticeState full = make_state(initial_field(pot, sc, seed));
  LocalizedState loc = restrict_state(full, K0, r.K_size);
  sc.dt_factor = c.dt_factor;
  sc.c_stab = c.c_stab;
  sc.T_final = horizon;
  const TimeGrid g = time_grid(pot, sc);
  r.steps = g.steps;
  const NoiseTape tape(seed, c.N, g.dt);
  const long lo = std::max(I0 - 10, K0), hi = std::min(I0 + c.inner_size - 1 + 10, K0 + r.K_size - 1);
  auto measure = [&] {
    double m = 0.0;
    for (long x = lo; x <= hi; ++x)
      m = std::max(m, std::abs(full.U[wrap_index(x, full.U.size())] - loc.U[static_cast<std::size_t>(x - K0)]));
    r.sup_diff = std::max(r.sup_diff, m);
  };
  measure();
  std::vector<double> dB(static_cast<std::size_t>(c.N));
  for (std::uint64_t k = 0; k < g.steps; ++k) {
    tape.row(k, dB);
    step(full, pot, g.dt, dB, c.c_stab);
    step_localized(loc, pot, g.dt, dB, c.c_stab);
    measure();
  }
  return r;
}

}  // namespace glkpz
