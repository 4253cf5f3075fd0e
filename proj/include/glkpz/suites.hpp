#pragma once

// Experiment building blocks shared by the harness and the acceptance checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bg_diagnostics.hpp"
#include "characteristic.hpp"
#include "cole_hopf.hpp"
#include "ensemble.hpp"
#include "heat_kernel.hpp"
#include "lattice_sde.hpp"
#include "potential.hpp"
#include "tishe.hpp"

namespace glkpz {

// ---------------------------------------------------------------------------------------
// ensemble identities

struct EnsembleSuite {
  std::vector<HomogenizedCoefficients> coefficients;
  double max_mass_err = 0.0;     // |E1 - 1|
  double max_mean_err = 0.0;     // |Eu - sigma|
  double max_alpha_u2_err = 0.0; // |alpha E^0 u^2 - 1|
  double max_ibp = 0.0;          // F in {1, u, u^2, u^3}
};

inline EnsembleSuite ensemble_suite(const Potential& pot, const std::vector<double>& t_grid,
                                    const std::vector<double>& sigma_grid) {
  EnsembleSuite r;
  for (double t : t_grid) {
    const auto c = homogenized(pot, t);
    r.coefficients.push_back(c);
    r.max_alpha_u2_err = std::max(r.max_alpha_u2_err, std::abs(c.alpha_bar * c.e0_u2 - 1.0));
    for (double s : sigma_grid) {
      const auto g = grand_canonical(pot, s, t);
      double mass = 0.0;
      for (double w : g.table.w) mass += w;
      r.max_mass_err = std::max(r.max_mass_err, std::abs(mass - 1.0));
      r.max_mean_err = std::max(r.max_mean_err, std::abs(g.expect([](double u) { return u; }) - s));
      for (int k = 0; k <= 3; ++k) {
        const ScalarFn f = [k](double u) { return std::pow(u, k); };
        const ScalarFn df = [k](double u) { return k == 0 ? 0.0 : k * std::pow(u, k - 1); };
        r.max_ibp = std::max(r.max_ibp, ibp_check(pot, s, t, f, df));
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------------------
// heat kernel

struct KernelSuite {
  int N = 0;
  double max_mass_err = 0.0;
  double min_entry = 0.0;        // before clamping
  double max_semigroup = 0.0;
  double ode_err = 0.0;
  double gradient_ratio = 0.0;   // gradient sum at dt/2 over gradient sum at dt
};

inline KernelSuite kernel_suite(const Potential& pot, const CoefficientCache& cache, int N, std::uint64_t seed,
                                int triples = 20) {
  KernelSuite r;
  r.N = N;
  const double horizon = std::min(cache.t_max(), 0.8);
  const Characteristic ch(cache, N, horizon);
  const KernelEngine e(cache, ch);
  const double n2 = static_cast<double>(N) * N;
  Rng rng = make_rng(seed, Stream::aux, static_cast<std::uint64_t>(N));
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  auto span = [&] { return std::exp(std::log(0.1 / n2) + ud(rng) * (std::log(0.05) - std::log(0.1 / n2))); };
  r.min_entry = 1.0;
  auto check_slice = [&](double s, double t) {
    const auto raw = e.jump_free(cache.int_alpha(s, t), cache.int_lambda2_alpha(s, t));
    r.min_entry = std::min(r.min_entry, *std::min_element(raw.begin(), raw.end()));
    r.max_mass_err = std::max(r.max_mass_err, std::abs(e.build(s, t).mass() - 1.0));
  };
  for (int i = 0; i < triples; ++i) {
    const double s = 0.5 * ud(rng) * horizon;
    const double r1 = std::min(s + span(), horizon);
    const double t = std::min(r1 + span(), horizon);
    check_slice(s, r1);
    check_slice(r1, t);
    check_slice(s, t);
    r.max_semigroup = std::max(r.max_semigroup, verify_semigroup(e, s, r1, t));
  }
  {
    const double s = 0.2, t = 0.2 + 1.0 / n2;
    const auto spec = e.jump_free(cache.int_alpha(s, t), cache.int_lambda2_alpha(s, t));
    const auto ode = kernel_ode(e, s, t, 2000);
    for (int z = 0; z < N; ++z) r.ode_err = std::max(r.ode_err, std::abs(spec[z] - ode[z]));
  }
  {
    const double s = 0.1, dt = 2.0 / n2;
    const auto a = verify_regularity(e, s, s + dt, {1});
    const auto b = verify_regularity(e, s, s + 0.5 * dt, {1});
    r.gradient_ratio = b.rows[0].measured / a.rows[0].measured;
  }
  return r;
}

struct GapPointN {
  int N = 0;
  double gap = 0.0;
};

struct GapSuite {
  std::vector<GapPointN> points;
  LinearFit fit;
  bool strictly_decreasing = false;
};

inline GapSuite gap_suite(const CoefficientCache& cache, const std::vector<int>& N_list, double s, double t) {
  GapSuite r;
  std::vector<double> x, y;
  for (int N : N_list) {
    const Characteristic ch(cache, N, t);
    const KernelEngine e(cache, ch);
    const double g = discrete_continuum_gap(e, s, t);
    r.points.push_back({N, g});
    x.push_back(N);
    y.push_back(g);
  }
  r.strictly_decreasing = true;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (!(y[i] < y[i - 1])) r.strictly_decreasing = false;
  r.fit = loglog_fit(x, y);
  return r;
}

// ---------------------------------------------------------------------------------------
// equivalence of ensembles

struct EquivalenceRow {
  int size = 0;
  double value = 0.0;      // |E^{can,|I|}[U'] - E^{gc}[U']|
  double std_error = 0.0;
};

struct EquivalenceSuite {
  double sigma = 0.0;
  std::vector<EquivalenceRow> rows;
  LinearFit fit;
};

inline EquivalenceSuite equivalence_suite(const Potential& pot, double sigma, double t, const std::vector<int>& sizes,
                                          const McParams& p) {
  EquivalenceSuite r;
  r.sigma = sigma;
  const auto sl = pot.at(t);
  const ScalarFn dU = [sl](double u) { return sl.dV(u); };
  const double gc = gc_expect(pot, sigma, t, dU);
  std::vector<double> x, y;
  for (int n : sizes) {
    EquivalenceRow row;
    row.size = n;
    if (p.method == CanonicalMethod::monte_carlo) {
      McParams q = p;
      q.seed = derive_seed(p.seed, static_cast<std::uint64_t>(n));
      const auto e = canonical_expect_mc(pot, sigma, t, n, [&](std::span<const double> u) {
            double a = 0.0;
            for (double v : u) a += dU(v);
            return a / static_cast<double>(u.size());
          }, q);
      row.value = std::abs(e.value - gc);
      row.std_error = e.std_error;
    } else {
      row.value = std::abs(canonical_marginal_expect(pot, sigma, t, n, dU) - gc);
    }
    r.rows.push_back(row);
    x.push_back(n);
    y.push_back(row.value);
  }
  if (x.size() > 1) r.fit = loglog_fit(x, y);
  return r;
}

// ---------------------------------------------------------------------------------------
// stationarity of the single-site second moment

struct StationaritySuite {
  double target = 0.0;    // 1 - 1/N under the zero-density canonical measure of U(t,a) = a^2/2
  double mean = 0.0;
  double std_error = 0.0;
  double initial_mean = 0.0;
  int seeds = 0;
};

// Empirical E[U(T,x)^2] (averaged over x) across seeds.
inline StationaritySuite stationarity_suite(const Potential& pot, const SdeConfig& c, std::uint64_t base, int seeds) {
  StationaritySuite r;
  r.seeds = seeds;
  r.target = 1.0 - 1.0 / c.N;
  std::vector<double> v, v0;
  for (int i = 0; i < seeds; ++i) {
    SdeConfig sc = c;
    sc.record_every = 1 << 30;
    const auto tr = simulate(sc, pot, base + static_cast<std::uint64_t>(i));
    auto m2 = [](const std::vector<double>& u) {
      double s = 0.0;
      for (double x : u) s += x * x;
      return s / static_cast<double>(u.size());
    };
    v.push_back(m2(tr.snapshots.back().U));
    v0.push_back(m2(tr.snapshots.front().U));
  }
  double m = 0.0, m0 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    m += v[i];
    m0 += v0[i];
  }
  m /= static_cast<double>(v.size());
  m0 /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  r.mean = m;
  r.initial_mean = m0;
  r.std_error = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------------------
// Hoelder monitor over canonical-start runs

struct HoelderSuite {
  int seeds = 0;
  int exceeded = 0;
  double max_seminorm = 0.0;
  double threshold = 0.0;
};

inline HoelderSuite hoelder_suite(const Potential& pot, const CoefficientCache& cache, const SdeConfig& c,
                                  double gamma_reg, std::uint64_t base, int seeds) {
  HoelderSuite r;
  r.seeds = seeds;
  const Characteristic ch(cache, c.N, c.T_final);
  for (int i = 0; i < seeds; ++i) {
    const auto tr = simulate(c, pot, base + static_cast<std::uint64_t>(i));
    bool hit = false;
    for (const auto& sn : tr.snapshots) {
      const auto h = height(tr, ch, cache, sn.t);
      const auto m = hoelder_monitor(h.h, gamma_reg);
      r.threshold = m.threshold;
      r.max_seminorm = std::max(r.max_seminorm, m.value);
      hit = hit || m.exceeded;
    }
    if (hit) ++r.exceeded;
  }
  return r;
}

}  // namespace glkpz
