#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "characteristic.hpp"
#include "cole_hopf.hpp"
#include "ensemble.hpp"
#include "heat_kernel.hpp"
#include "lattice_sde.hpp"
#include "rng.hpp"
#include "torus.hpp"

namespace glkpz {

enum class CenteringClass { none, CT, LCT, QCT };

inline std::string to_string(CenteringClass c) {
  switch (c) {
    case CenteringClass::CT: return "CT";
    case CenteringClass::LCT: return "LCT";
    case CenteringClass::QCT: return "QCT";
    default: return "none";
  }
}

// depth j of the class: expected block decay l^{-j/2}
inline int depth(CenteringClass c) {
  switch (c) {
    case CenteringClass::CT: return 1;
    case CenteringClass::LCT: return 2;
    case CenteringClass::QCT: return 3;
    default: return 0;
  }
}

// A single-site statistic f(t,u); `at(t)` bakes in the time-t coefficients.
struct CenteredStatistic {
  std::string name;
  std::function<ScalarFn(double)> at;
  CenteringClass declared = CenteringClass::none;
  int degree = 1;  // polynomial growth
  int support = 1;
};

inline CenteredStatistic make_statistic(std::string name, ScalarFn f, CenteringClass declared, int degree) {
  if (degree > 12) throw std::invalid_argument("statistic growth degree above 12");
  CenteredStatistic s;
  s.name = std::move(name);
  s.at = [f](double) { return f; };
  s.declared = declared;
  s.degree = degree;
  return s;
}

namespace detail {
// Memoised coefficients for the statistics below.
class CoefficientMemo {
 public:
  explicit CoefficientMemo(const Potential& pot) : pot_(pot) {}
  const HomogenizedCoefficients& operator()(double t) {
    for (const auto& c : memo_)
      if (c.t == t) return c;
    memo_.push_back(homogenized(pot_, t));
    return memo_.back();
  }

 private:
  Potential pot_;
  std::vector<HomogenizedCoefficients> memo_;
};
}  // namespace detail

// q, W', alpha u^2 - 1, the R-combination and the U'u^3 fluctuation.
inline std::vector<CenteredStatistic> lemma4_statistics(const Potential& pot) {
  auto memo = std::make_shared<detail::CoefficientMemo>(pot);
  const Potential p = pot;
  std::vector<CenteredStatistic> out;
  auto add = [&](std::string name, CenteringClass cls, int deg,
                 std::function<ScalarFn(const Potential::Slice&, const HomogenizedCoefficients&)> mk) {
    CenteredStatistic s;
    s.name = std::move(name);
    s.declared = cls;
    s.degree = deg;
    s.at = [memo, p, mk](double t) { return mk(p.at(t), (*memo)(t)); };
    out.push_back(std::move(s));
  };
  add("q", CenteringClass::QCT, 2, [](const Potential::Slice& sl, const HomogenizedCoefficients& c) {
    return ScalarFn([sl, c](double u) {
      const double d = sl.dV(u);
      return d - c.alpha_bar * u - 0.5 * c.lambda * (d * u - 1.0);
    });
  });
  add("W'", CenteringClass::LCT, 1, [](const Potential::Slice& sl, const HomogenizedCoefficients& c) {
    return ScalarFn([sl, c](double u) { return sl.dV(u) - c.alpha_bar * u; });
  });
  add("w1", CenteringClass::CT, 2, [](const Potential::Slice&, const HomogenizedCoefficients& c) {
    return ScalarFn([c](double u) { return c.alpha_bar * u * u - 1.0; });
  });
  add("w2", CenteringClass::CT, 3, [](const Potential::Slice&, const HomogenizedCoefficients& c) {
    const double l = c.lambda;
    return ScalarFn([c, l](double u) {
      return l * l * l * l / 12.0 * c.e0_dUu3 + l * l * l * c.alpha_bar * u * u * u / 6.0 - l * c.renorm;
    });
  });
  add("w3", CenteringClass::CT, 4, [](const Potential::Slice& sl, const HomogenizedCoefficients& c) {
    const double l4 = std::pow(c.lambda, 4) / 12.0;
    return ScalarFn([sl, c, l4](double u) { return l4 * (sl.dV(u) * u * u * u - c.e0_dUu3); });
  });
  return out;
}

inline const CenteredStatistic& find_statistic(const std::vector<CenteredStatistic>& v, const std::string& name) {
  for (const auto& s : v)
    if (s.name == name) return s;
  throw std::out_of_range("unknown statistic " + name);
}

struct Classification {
  CenteringClass cls = CenteringClass::none;
  std::array<double, 3> residuals{};   // E^0 f, d_sigma E f, d_sigma^2 E f at sigma = 0
  std::array<double, 3> normalized{};  // residuals / sqrt(E^0 f^2)
  double scale = 0.0;
};

// Deepest class whose vanishing conditions hold; residuals are compared relative to the
// L^2(P^0) size of f so the class does not depend on the normalisation of f.
inline Classification classify(const Potential& pot, const ScalarFn& f, double t, double tol) {
  Classification c;
  const auto g = grand_canonical(pot, 0.0, t);
  c.residuals[0] = g.expect(f);
  c.residuals[1] = sigma_derivative(pot, 0.0, t, f, 1);
  c.residuals[2] = sigma_derivative(pot, 0.0, t, f, 2);
  c.scale = std::sqrt(g.expect([&](double u) { const double v = f(u); return v * v; }));
  for (int i = 0; i < 3; ++i) c.normalized[i] = c.scale > 0 ? std::abs(c.residuals[i]) / c.scale : 0.0;
  if (c.normalized[0] < tol) {
    c.cls = CenteringClass::CT;
    if (c.normalized[1] < tol) {
      c.cls = CenteringClass::LCT;
      if (c.normalized[2] < tol) c.cls = CenteringClass::QCT;
    }
  }
  return c;
}

inline Classification classify(const Potential& pot, const CenteredStatistic& s, double t, double tol) {
  return classify(pot, s.at(t), t, tol);
}

// E^sigma q = lambda(sigma) - alpha sigma - lambda lambda(sigma) sigma / 2 and its two sigma
// derivatives at 0, from the cumulants of P^{0,t}: lambda' = 1/k2, lambda'' = -k3/k2^3.
inline std::array<double, 3> q_residuals_direct(const Potential& pot, double t) {
  const auto c = homogenized(pot, t);
  const auto g = grand_canonical(pot, 0.0, t);
  const double m = g.expect([](double u) { return u; });
  const double k2 = g.expect([m](double u) { return (u - m) * (u - m); });
  const double k3 = g.expect([m](double u) { return (u - m) * (u - m) * (u - m); });
  const double l0 = g.tilt, l1 = 1.0 / k2, l2 = -k3 / (k2 * k2 * k2);
  return {l0, l1 - c.alpha_bar - 0.5 * c.lambda * l0, l2 - c.lambda * l1};
}

struct Lemma4Row {
  double t = 0.0;
  std::string name;
  CenteringClass declared = CenteringClass::none;
  Classification got;
  bool pass = false;
};

struct Lemma4Report {
  std::vector<Lemma4Row> rows;
  bool pass = true;
};

// Each statistic must reach at least its declared class at every grid time.
inline Lemma4Report verify_lemma4(const Potential& pot, const std::vector<double>& t_grid, double tol) {
  Lemma4Report rep;
  const auto stats = lemma4_statistics(pot);
  for (double t : t_grid)
    for (const auto& s : stats) {
      Lemma4Row r;
      r.t = t;
      r.name = s.name;
      r.declared = s.declared;
      r.got = classify(pot, s, t, tol);
      r.pass = depth(r.got.cls) >= depth(s.declared);
      rep.pass = rep.pass && r.pass;
      rep.rows.push_back(std::move(r));
    }
  return rep;
}

// ---------------------------------------------------------------------------------------
// block decay of canonical expectations

struct BlockDecayParams {
  int draws = 400;          // sigma draws per block length
  int field_size = 1024;    // zero-density torus the block densities are read from
  int burn_in = 20;         // sweeps
  int thin = 2;             // sweeps between configurations
  std::uint64_t seed = 1;
  CanonicalMethod method = CanonicalMethod::exact_marginal;
  McParams mc{};            // used when method == monte_carlo
};

struct BlockDecayRow {
  int l = 0;
  double mean_abs = 0.0;
  double std_error = 0.0;
};

struct BlockDecayResult {
  std::string name;
  std::vector<BlockDecayRow> rows;
  LinearFit fit;
  double expected_slope = 0.0;
  bool inconclusive = false;
};

// Block densities sigma(y; l, +) of zero-density canonical configurations, `draws` per l.
inline std::vector<std::vector<double>> draw_block_densities(const Potential& pot, double t,
                                                             const std::vector<int>& l_list,
                                                             const BlockDecayParams& p) {
  int lmax = 1;
  for (int l : l_list) lmax = std::max(lmax, l);
  const int M = std::max(p.field_size, 2 * lmax);
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < l_list.size(); ++i) {
    const int l = l_list[i];
    CanonicalSampler s(pot, 0.0, t, M, make_rng(p.seed, Stream::sigma_draw, static_cast<std::uint64_t>(i)));
    s.sweep(p.burn_in);
    std::vector<double> sig;
    while (static_cast<int>(sig.size()) < p.draws) {
      s.sweep(p.thin);
      const auto& u = s.config();
      for (long y = 0; y + l <= M && static_cast<int>(sig.size()) < p.draws; y += l)
        sig.push_back(block_density(u, y - 1, l, +1));
    }
    out.push_back(std::move(sig));
  }
  return out;
}

inline std::vector<BlockDecayResult> block_decay(const Potential& pot, const std::vector<CenteredStatistic>& stats,
                                                 const std::vector<int>& l_list, double t,
                                                 const BlockDecayParams& p) {
  if (l_list.size() < 2) throw std::invalid_argument("block decay needs at least two block lengths");
  for (std::size_t i = 1; i < l_list.size(); ++i)
    if (l_list[i] <= l_list[i - 1]) throw std::invalid_argument("l_list must be increasing");
  const auto sigmas = draw_block_densities(pot, t, l_list, p);
  std::vector<ScalarFn> fs;
  for (const auto& s : stats) fs.push_back(s.at(t));
  std::vector<BlockDecayResult> res(stats.size());
  for (std::size_t k = 0; k < stats.size(); ++k) {
    res[k].name = stats[k].name;
    res[k].expected_slope = -0.5 * depth(stats[k].declared);
  }
  for (std::size_t i = 0; i < l_list.size(); ++i) {
    const int l = l_list[i];
    std::vector<std::vector<double>> vals(stats.size());
    for (std::size_t d = 0; d < sigmas[i].size(); ++d) {
      const double sg = sigmas[i][d];
      if (p.method == CanonicalMethod::exact_marginal || (p.method == CanonicalMethod::automatic && l > 4)) {
        const auto m = canonical_marginal(pot, sg, t, l);
        for (std::size_t k = 0; k < stats.size(); ++k) vals[k].push_back(std::abs(m.expect(fs[k])));
      } else {
        for (std::size_t k = 0; k < stats.size(); ++k) {
          double v = 0.0;
          if (p.method == CanonicalMethod::monte_carlo) {
            McParams mc = p.mc;
            mc.seed = derive_seed(p.seed, static_cast<std::uint64_t>(Stream::sampler), i * 1000003u + d);
            v = canonical_expect_mc(pot, sg, t, l, [&](std::span<const double> u) {
                  double a = 0.0;
                  for (double x : u) a += fs[k](x);
                  return a / static_cast<double>(u.size());
                }, mc).value;
          } else {
            v = canonical_expect_bruteforce(pot, sg, t, l, [&](std::span<const double> u) { return fs[k](u[0]); });
          }
          vals[k].push_back(std::abs(v));
        }
      }
    }
    for (std::size_t k = 0; k < stats.size(); ++k) {
      const auto& v = vals[k];
      double mean = 0.0, m2 = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double dlt = v[j] - mean;
        mean += dlt / static_cast<double>(j + 1);
        m2 += dlt * (v[j] - mean);
      }
      BlockDecayRow row;
      row.l = l;
      row.mean_abs = mean;
      row.std_error = v.size() > 1 ? std::sqrt(m2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
      if (row.std_error > 0.5 * row.mean_abs) res[k].inconclusive = true;
      res[k].rows.push_back(row);
    }
  }
  for (auto& r : res) {
    std::vector<double> x, y;
    for (const auto& row : r.rows) {
      x.push_back(row.l);
      y.push_back(row.mean_abs);
    }
    r.fit = loglog_fit(x, y);
  }
  return res;
}

inline BlockDecayResult block_decay(const Potential& pot, const CenteredStatistic& stat, const std::vector<int>& l_list,
                                    double t, const BlockDecayParams& p) {
  return block_decay(pot, std::vector<CenteredStatistic>{stat}, l_list, t, p).front();
}

// ---------------------------------------------------------------------------------------
// space-time averages along a recorded trajectory

// A^{m,tau,+/-}(F G^s; s, y(s)): average over r in [0,tau] (trapezoid on the snapshots in
// [s - tau, s]) and k < m of F(s-r, U(y(s-r) +/- 2kw)) G^s(s-r, y(s-r) +/- 2kw), with G^s the
// Gartner factor whose coupling constant is frozen at lambda(s).
inline double space_time_average(const LatticeTrajectory& traj, const Characteristic& ch, const CoefficientCache& cache,
                                 const CenteredStatistic& stat, int m, double tau, int sign, double s, long y) {
  if (m < 1) throw std::invalid_argument("m must be >= 1");
  if (tau < 0) throw std::invalid_argument("tau must be nonnegative");
  const int N = traj.N;
  const int w = std::max(1, stat.support);
  if (2L * m * w > N) throw std::invalid_argument("shifts 2 m w exceed the torus");
  const double lam = cache.lambda(s);
  auto slice = [&](const Snapshot& sn) {
    const LatticeState st = make_state(sn.U, sn.t, sn.J0);
    const auto J = st.current();
    const double ir = sn.t == 0.0 ? 0.0 : cache.int_renorm(0.0, sn.t);
    const ScalarFn f = stat.at(sn.t);
    const long ys = ch.shifted(y, sn.t);
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
      const std::size_t x = wrap_index(ys + sign * 2L * k * w, static_cast<std::size_t>(N));
      acc += f(sn.U[x]) * detail::guarded_exp(lam * (J[x] - ir));
    }
    return acc / m;
  };
  std::vector<const Snapshot*> win;
  for (const auto& sn : traj.snapshots)
    if (sn.t >= s - tau - 1e-12 * (1.0 + s) && sn.t <= s + 1e-12 * (1.0 + s)) win.push_back(&sn);
  if (win.empty() || std::abs(win.back()->t - s) > 1e-12 * (1.0 + s))
    throw std::out_of_range("time s is not a recorded snapshot");
  if (tau == 0.0 || win.size() == 1) return slice(*win.back());
  if (std::abs(win.front()->t - (s - tau)) > 1e-9 * (1.0 + s))
    throw std::out_of_range("window [s - tau, s] is not covered by snapshots");
  double acc = 0.0;
  for (std::size_t i = 1; i < win.size(); ++i)
    acc += 0.5 * (win[i]->t - win[i - 1]->t) * (slice(*win[i]) + slice(*win[i - 1]));
  return acc / (win.back()->t - win.front()->t);
}

}  // namespace glkpz
