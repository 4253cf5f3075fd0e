#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "potential.hpp"
#include "quadrature.hpp"
#include "rng.hpp"
#include "spline.hpp"

namespace glkpz {

struct DegenerateMeasureError : NumericalError {
  using NumericalError::NumericalError;
};

using ScalarFn = std::function<double(double)>;

struct EnsembleOptions {
  double tilt_tol = 1e-14;
  double expect_tol = 1e-10;  // gc_expect two-level agreement
  quad::Options quad{};
};

// Tilted single-site measure P^{sigma,t}.
struct GrandCanonical {
  double sigma = 0.0;
  double t = 0.0;
  double tilt = 0.0;
  double log_norm = 0.0;
  double half_width = 0.0;
  quad::Table table;

  template <class F>
  double expect(F&& f) const {
    return table.expect(std::forward<F>(f));
  }
};

inline GrandCanonical grand_canonical(const Potential& pot, double sigma, double t,
                                      const EnsembleOptions& opt = {}) {
  const auto sl = pot.at(t);
  auto r = quad::solve_tilt(sl, sigma, opt.tilt_tol, opt.quad);
  GrandCanonical g;
  g.sigma = sigma;
  g.t = t;
  g.tilt = r.lambda;
  g.log_norm = r.table.log_norm;
  g.half_width = 0.5 * (r.table.hi - r.table.lo);
  g.table = std::move(r.table);
  return g;
}

inline double solve_tilt(const Potential& pot, double sigma, double t, double tol = 1e-14) {
  if (!(tol > 0)) throw std::invalid_argument("tilt tolerance must be positive");
  EnsembleOptions o;
  o.tilt_tol = tol;
  return grand_canonical(pot, sigma, t, o).tilt;
}

// E^{sigma,t} F with a two-level consistency check.
inline double gc_expect(const Potential& pot, double sigma, double t, const ScalarFn& f,
                        const EnsembleOptions& opt = {}) {
  const GrandCanonical g = grand_canonical(pot, sigma, t, opt);
  const double v = g.expect(f);
  const auto fine = quad::build_fixed(pot.at(t), g.tilt, 2 * g.table.panels, opt.quad);
  const double vf = fine.expect(f);
  const double res = std::abs(vf - v);
  if (res > opt.expect_tol * (1.0 + std::abs(vf))) {
    std::ostringstream os;
    os << "gc_expect quadrature not converged, residual " << res;
    throw NumericalError(os.str());
  }
  return vf;
}

namespace detail {
inline double cov_over_var(const GrandCanonical& g, const ScalarFn& f) {
  const double m = g.expect([](double u) { return u; });
  const double var = g.expect([m](double u) { return (u - m) * (u - m); });
  if (var < 1e-12) throw DegenerateMeasureError("variance of u below 1e-12");
  const double ef = g.expect(f);
  const double cov = g.expect([&](double u) { return (f(u) - ef) * (u - m); });
  return cov / var;
}
}  // namespace detail

// order 1: Cov(F,u)/Var(u); order 2: Richardson-extrapolated central difference of order 1.
inline double sigma_derivative(const Potential& pot, double sigma, double t, const ScalarFn& f,
                               int order, const EnsembleOptions& opt = {}) {
  auto d1 = [&](double s) { return detail::cov_over_var(grand_canonical(pot, s, t, opt), f); };
  if (order == 1) return d1(sigma);
  if (order == 2) {
    const double h = 1e-2;
    auto D = [&](double hh) { return (d1(sigma + hh) - d1(sigma - hh)) / (2.0 * hh); };
    return (4.0 * D(0.5 * h) - D(h)) / 3.0;
  }
  throw std::invalid_argument("sigma_derivative order must be 1 or 2");
}

struct HomogenizedCoefficients {
  double t = 0.0;
  double alpha_bar = 1.0;
  double alpha_bar_wedge = 0.0;
  double lambda = 0.0;
  double renorm = 0.0;
  double e0_u2 = 1.0;
  double e0_u3 = 0.0;
  double e0_dUu3 = 3.0;
  bool degenerate = true;  // alpha_bar_wedge == 0 to 1e-10
};

inline HomogenizedCoefficients homogenized(const Potential& pot, double t,
                                           const EnsembleOptions& opt = {}) {
  const auto sl = pot.at(t);
  ScalarFn dU = [sl](double u) { return sl.dV(u); };
  HomogenizedCoefficients c;
  c.t = t;
  const GrandCanonical g0 = grand_canonical(pot, 0.0, t, opt);
  c.alpha_bar = detail::cov_over_var(g0, dU);
  c.alpha_bar_wedge = sigma_derivative(pot, 0.0, t, dU, 2, opt);
  c.lambda = c.alpha_bar_wedge / c.alpha_bar;
  c.e0_u2 = g0.expect([](double u) { return u * u; });
  c.e0_u3 = g0.expect([](double u) { return u * u * u; });
  c.e0_dUu3 = g0.expect([sl](double u) { return sl.dV(u) * u * u * u; });
  const double l = c.lambda;
  c.renorm = l * l * l / 12.0 * c.e0_dUu3 + l * l * c.alpha_bar / 6.0 * c.e0_u3;
  c.degenerate = std::abs(c.alpha_bar_wedge) < 1e-10;
  return c;
}

// Homogenized coefficients tabulated on a uniform time grid with spline interpolation and
// exact cumulative integrals of alpha_bar, lambda^2 alpha_bar and R.
class CoefficientCache {
 public:
  CoefficientCache() = default;
  CoefficientCache(const Potential& pot, double t_max, double step = 1.0 / 256,
                   const EnsembleOptions& opt = {})
      : pot_(pot) {
    if (!(t_max >= 0)) throw std::invalid_argument("t_max must be nonnegative");
    n_ = std::max(4, static_cast<int>(std::ceil(t_max / step - 1e-9)));
    h_ = step;
    const double span = n_ * h_;
    std::vector<double> grid;
    const int pad = 3;
    for (int i = -pad; i <= n_ + pad; ++i) grid.push_back(i * h_);
    constant_ = pot.time_independent();
    if (constant_) {
      const auto c = homogenized(pot, 0.0, opt);
      rows_.assign(grid.size(), c);
      for (std::size_t i = 0; i < grid.size(); ++i) rows_[i].t = grid[i];
    } else {
      for (double t : grid) rows_.push_back(homogenized(pot, t, opt));
    }
    auto col = [this, pad](auto getter) {
      return [this, pad, getter](double t) {
        const int i = static_cast<int>(std::lround(t / h_)) + pad;
        return getter(rows_.at(static_cast<std::size_t>(i)));
      };
    };
    using H = HomogenizedCoefficients;
    alpha_ = GridSpline(col([](const H& c) { return c.alpha_bar; }), 0.0, h_, n_);
    wedge_ = GridSpline(col([](const H& c) { return c.alpha_bar_wedge; }), 0.0, h_, n_);
    lambda_ = GridSpline(col([](const H& c) { return c.lambda; }), 0.0, h_, n_);
    renorm_ = GridSpline(col([](const H& c) { return c.renorm; }), 0.0, h_, n_);
    l2a_ = GridSpline(col([](const H& c) { return c.lambda * c.lambda * c.alpha_bar; }), 0.0, h_, n_);
    (void)span;
  }

  const Potential& potential() const { return pot_; }
  double t_max() const { return n_ * h_; }
  double step() const { return h_; }
  const std::vector<HomogenizedCoefficients>& rows() const { return rows_; }

  // constant potentials return the tabulated row exactly
  double alpha_bar(double t) const { return constant_ ? rows_[0].alpha_bar : alpha_(t); }
  double alpha_bar_wedge(double t) const { return constant_ ? rows_[0].alpha_bar_wedge : wedge_(t); }
  double lambda(double t) const { return constant_ ? rows_[0].lambda : lambda_(t); }
  double renorm(double t) const { return constant_ ? rows_[0].renorm : renorm_(t); }
  bool time_independent() const { return constant_; }
  // d lambda / dt by central difference at step 1e-4 (one-sided at the table edges)
  double lambda_prime(double t) const {
    if (constant_) return 0.0;
    const double h = 1e-4;
    const double a = std::max(0.0, t - h), b = std::min(t_max(), t + h);
    return (lambda_(b) - lambda_(a)) / (b - a);
  }
  double int_alpha(double s, double t) const {
    if (constant_) return (t - s) * rows_[0].alpha_bar;
    return alpha_.integral(t) - alpha_.integral(s);
  }
  double int_lambda2_alpha(double s, double t) const {
    if (constant_) return (t - s) * rows_[0].lambda * rows_[0].lambda * rows_[0].alpha_bar;
    return l2a_.integral(t) - l2a_.integral(s);
  }
  double int_renorm(double s, double t) const {
    if (constant_) return (t - s) * rows_[0].renorm;
    return renorm_.integral(t) - renorm_.integral(s);
  }
  bool degenerate() const {
    for (const auto& r : rows_)
      if (!r.degenerate) return false;
    return true;
  }

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "t,alpha_bar,alpha_bar_wedge,lambda,renorm\n";
    for (const auto& r : rows_) {
      if (r.t < -1e-12 || r.t > t_max() + 1e-12) continue;
      os << r.t << ',' << r.alpha_bar << ',' << r.alpha_bar_wedge << ',' << r.lambda << ','
         << r.renorm << '\n';
    }
    return os.str();
  }

 private:
  Potential pot_;
  int n_ = 0;
  double h_ = 1.0;
  bool constant_ = false;
  std::vector<HomogenizedCoefficients> rows_;
  GridSpline alpha_, wedge_, lambda_, renorm_, l2a_;
};

inline double ibp_check(const Potential& pot, double sigma, double t, const ScalarFn& f,
                        const ScalarFn& df, const EnsembleOptions& opt = {}) {
  const GrandCanonical g = grand_canonical(pot, sigma, t, opt);
  const auto sl = pot.at(t);
  const double lhs = g.expect([&](double u) { return f(u) * sl.dV(u); });
  const double rhs = g.tilt * g.expect(f) + g.expect(df);
  return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------------------
// exact samplers (Gaussian-envelope rejection for log-concave targets)

namespace detail {
// Draw from density proportional to exp(h(x)) with h concave, mode m, and -h'' >= c.
template <class H>
double rejection_draw(const H& h, double m, double c, Rng& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  const double hm = h(m);
  const double s = 1.0 / std::sqrt(c);
  for (;;) {
    const double x = m + s * nd(rng);
    const double d = x - m;
    const double la = h(x) - hm + 0.5 * c * d * d;
    const double u = ud(rng);
    if (u > 0.0 && std::log(u) <= la) return x;
  }
}
}  // namespace detail

inline std::vector<double> sample_gc(const Potential& pot, double sigma, double t, std::size_t n,
                                     Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_gc requires n >= 1");
  const auto sl = pot.at(t);
  const double lam = solve_tilt(pot, sigma, t);
  const double m = quad::solve_gradient(sl, lam, sigma);
  auto h = [&](double x) { return lam * x - sl.V(x); };
  std::vector<double> out(n);
  for (auto& x : out) x = detail::rejection_draw(h, m, sl.c_lo(), rng);
  return out;
}

// Pair-exchange Gibbs sampler for P^{sigma,t,I}; the block sum is preserved by every move.
class CanonicalSampler {
 public:
  CanonicalSampler(const Potential& pot, double sigma, double t, int size, Rng rng)
      : pot_(pot), sigma_(sigma), t_(t), u_(size, sigma), rng_(std::move(rng)) {
    if (size < 2) throw std::invalid_argument("canonical sampler requires |I| >= 2");
  }

  // Starts from a given configuration (its mean defines sigma).
  CanonicalSampler(const Potential& pot, double t, std::vector<double> init, Rng rng)
      : pot_(pot), t_(t), u_(std::move(init)), rng_(std::move(rng)) {
    if (u_.size() < 2) throw std::invalid_argument("canonical sampler requires |I| >= 2");
    sigma_ = sum() / static_cast<double>(u_.size());
  }

  void move() {
    const std::size_t n = u_.size();
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t i = pick(rng_);
    std::size_t j = pick(rng_);
    while (j == i) j = pick(rng_);
    const double s = u_[i] + u_[j];
    const auto sl = pot_.at(t_);
    // mode of -V(x) - V(s-x): V'(x) = V'(s-x)
    struct Pair {
      const Potential::Slice& sl;
      double s;
      double V(double x) const { return sl.V(x) + sl.V(s - x); }
      double dV(double x) const { return sl.dV(x) - sl.dV(s - x); }
      double d2V(double x) const { return sl.d2V(x) + sl.d2V(s - x); }
      double c_lo() const { return 2.0 * sl.c_lo(); }
      double c_hi() const { return 2.0 * sl.c_hi(); }
    } pr{sl, s};
    const double m = quad::solve_gradient(pr, 0.0, 0.5 * s);
    const double x = detail::rejection_draw([&](double y) { return -pr.V(y); }, m, pr.c_lo(), rng_);
    u_[i] = x;
    u_[j] = s - x;
    ++moves_;
  }

  void sweep(int count = 1) {
    for (int c = 0; c < count; ++c)
      for (std::size_t k = 0; k < u_.size(); ++k) move();
  }

  const std::vector<double>& config() const { return u_; }
  double sigma() const { return sigma_; }
  double t() const { return t_; }
  std::uint64_t moves() const { return moves_; }

  // Neumaier-compensated sum of the configuration
  double sum() const {
    double s = 0.0, c = 0.0;
    for (double v : u_) {
      const double tt = s + v;
      if (std::abs(s) >= std::abs(v)) c += (s - tt) + v; else c += (v - tt) + s;
      s = tt;
    }
    return s + c;
  }

 private:
  Potential pot_;
  double sigma_ = 0.0, t_ = 0.0;
  std::vector<double> u_;
  Rng rng_;
  std::uint64_t moves_ = 0;
};

inline std::vector<double> sample_canonical(const Potential& pot, double sigma, double t, int size,
                                            int sweeps, Rng& rng) {
  CanonicalSampler s(pot, sigma, t, size, Rng(rng()));
  s.sweep(sweeps);
  return s.config();
}

// ---------------------------------------------------------------------------------------
// canonical expectations

using BlockFn = std::function<double(std::span<const double>)>;

struct UnsupportedSizeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Tensor-grid quadrature over the hyperplane {sum U = |I| sigma}, |I| in {2,3,4}.
inline double canonical_expect_bruteforce(const Potential& pot, double sigma, double t, int size,
                                          const BlockFn& f, int panels = 0) {
  if (size < 2 || size > 4) throw UnsupportedSizeError("brute-force canonical expectation needs |I| in {2,3,4}");
  if (panels == 0) panels = (size == 4) ? 8 : 24;
  const auto sl = pot.at(t);
  const double lam = solve_tilt(pot, sigma, t);
  const auto tab = quad::build_fixed(sl, lam, panels);
  const double gm = lam * tab.mode - sl.V(tab.mode);
  auto rho = [&](double y) { return std::exp(lam * y - sl.V(y) - gm); };
  const double total = size * sigma;
  const std::size_t n = tab.x.size();
  double num = 0.0, den = 0.0;
  std::vector<double> u(size);
  if (size == 2) {
    for (std::size_t i = 0; i < n; ++i) {
      u[0] = tab.x[i];
      u[1] = total - u[0];
      const double w = tab.w[i] * rho(u[1]);
      num += w * f(u);
      den += w;
    }
  } else if (size == 3) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        u[0] = tab.x[i];
        u[1] = tab.x[j];
        u[2] = total - u[0] - u[1];
        const double w = tab.w[i] * tab.w[j] * rho(u[2]);
        if (w == 0.0) continue;
        num += w * f(u);
        den += w;
      }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double wij = tab.w[i] * tab.w[j];
        for (std::size_t k = 0; k < n; ++k) {
          u[0] = tab.x[i];
          u[1] = tab.x[j];
          u[2] = tab.x[k];
          u[3] = total - u[0] - u[1] - u[2];
          const double w = wij * tab.w[k] * rho(u[3]);
          if (w == 0.0) continue;
          num += w * f(u);
          den += w;
        }
      }
  }
  return num / den;
}

// Law of U_1 under P^{sigma,t,I}, by exact marginalisation: rho(u) times the density of the
// remaining (|I|-1)-fold sum at |I| sigma - u, the latter obtained by Fourier inversion of
// the centred characteristic function. Stored as weights on the grand-canonical nodes.
struct CanonicalMarginal {
  std::vector<double> x, p;

  template <class F>
  double expect(F&& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += p[i] * f(x[i]);
    return s;
  }
};

inline CanonicalMarginal canonical_marginal(const Potential& pot, double sigma, double t, int size) {
  if (size < 1) throw std::invalid_argument("block size must be >= 1");
  CanonicalMarginal out;
  if (size == 1) {
    out.x = {sigma};
    out.p = {1.0};
    return out;
  }
  const auto g = grand_canonical(pot, sigma, t);
  const auto& x = g.table.x;
  const auto& w = g.table.w;
  const std::size_t n = x.size();
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += w[i] * (x[i] - sigma) * (x[i] - sigma);
  const double sd = std::sqrt(var);
  const int m = size - 1;
  auto phi = [&](double k) {
    std::complex<double> s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w[i] * std::polar(1.0, k * (x[i] - sigma));
    return s;
  };
  // cutoff where |phi|^m is negligible
  double K = 8.0 / (sd * std::sqrt(static_cast<double>(m)));
  while (std::pow(std::abs(phi(K)), m) > 1e-17) K *= 1.25;
  // spacing resolves the support of the m-fold density over the node range
  const double reach = (x.back() - x.front()) + 14.0 * sd * std::sqrt(static_cast<double>(m));
  const double dk_max = 2.0 * M_PI / (2.0 * reach);
  const int nk = static_cast<int>(std::ceil(K / dk_max));
  const double dk = K / nk;
  std::vector<std::complex<double>> pm(nk + 1);
  for (int j = 0; j <= nk; ++j) pm[j] = std::pow(phi(j * dk), m);
  out.x = x;
  out.p.assign(n, 0.0);
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // density at (sigma - x_i), real part of the symmetric trapezoid sum
    const double d = sigma - x[i];
    const std::complex<double> step = std::polar(1.0, -dk * d);
    std::complex<double> rot = step;
    double dens = 0.5 * pm[0].real();
    for (int j = 1; j <= nk; ++j) {
      dens += pm[j].real() * rot.real() - pm[j].imag() * rot.imag();
      rot *= step;
      if ((j & 63) == 0) rot = std::polar(1.0, -j * dk * d - dk * d);
    }
    if (dens <= 0.0) continue;
    out.p[i] = w[i] * dens;
    den += out.p[i];
  }
  for (double& v : out.p) v /= den;
  return out;
}

inline double canonical_marginal_expect(const Potential& pot, double sigma, double t, int size,
                                        const ScalarFn& f) {
  if (size == 1) return f(sigma);
  return canonical_marginal(pot, sigma, t, size).expect(f);
}

enum class CanonicalMethod { automatic, exact_marginal, monte_carlo, bruteforce };

struct McParams {
  CanonicalMethod method = CanonicalMethod::automatic;
  int samples = 2000;
  int burn_in = 50;
  int thin = 5;
  std::uint64_t seed = 1;
};

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

// Monte Carlo estimate of E^{sigma,t,I}[F] with the pair-exchange sampler.
inline McEstimate canonical_expect_mc(const Potential& pot, double sigma, double t, int size,
                                      const BlockFn& f, const McParams& p) {
  CanonicalSampler s(pot, sigma, t, size, Rng(derive_seed(p.seed, static_cast<std::uint64_t>(Stream::sampler))));
  s.sweep(p.burn_in);
  double mean = 0.0, m2 = 0.0;
  for (int k = 0; k < p.samples; ++k) {
    s.sweep(p.thin);
    const double v = f(s.config());
    const double d = v - mean;
    mean += d / (k + 1);
    m2 += d * (v - mean);
  }
  McEstimate e;
  e.value = mean;
  e.samples = static_cast<std::size_t>(p.samples);
  e.std_error = p.samples > 1 ? std::sqrt(m2 / (p.samples - 1) / p.samples) : 0.0;
  return e;
}

// Block density sigma(s,y;l,+/-) over y + I(l,+/-), I(l,+) = [1,l], I(l,-) = [-l+1,0].
inline double block_density(std::span<const double> field, long y, int l, int sign) {
  const long n = static_cast<long>(field.size());
  double s = 0.0;
  for (int j = 0; j < l; ++j) {
    const long off = sign > 0 ? (j + 1) : (-j);
    long x = (y + off) % n;
    if (x < 0) x += n;
    s += field[static_cast<std::size_t>(x)];
  }
  return s / l;
}

// E^{l,+/-}[f(U(x^{+/-}))] for a single-site statistic.
inline McEstimate local_canonical_expect(std::span<const double> field, const Potential& pot, double s,
                                         long y, int l, int sign, const ScalarFn& f,
                                         const McParams& p = {}) {
  if (l < 1) throw std::invalid_argument("block length must be >= 1");
  const double sigma = block_density(field, y, l, sign);
  McEstimate e;
  if (l == 1) {
    e.value = f(sigma);
    return e;
  }
  auto method = p.method;
  if (method == CanonicalMethod::automatic)
    method = (l <= 4) ? CanonicalMethod::bruteforce : CanonicalMethod::exact_marginal;
  switch (method) {
    case CanonicalMethod::bruteforce:
      e.value = canonical_expect_bruteforce(pot, sigma, s, l,
                                            [&](std::span<const double> u) { return f(u[0]); });
      return e;
    case CanonicalMethod::exact_marginal:
      e.value = canonical_marginal_expect(pot, sigma, s, l, f);
      return e;
    default: {
      // exchangeability: average the statistic over every site of each sample
      return canonical_expect_mc(pot, sigma, s, l,
                                 [&](std::span<const double> u) {
                                   double a = 0.0;
                                   for (double v : u) a += f(v);
                                   return a / static_cast<double>(u.size());
                                 },
                                 p);
    }
  }
}

// General block functional F on y + I(l,+/-) (F sees the block in increasing site order).
inline McEstimate local_canonical_expect_block(std::span<const double> field, const Potential& pot,
                                               double s, long y, int l, int sign, const BlockFn& f,
                                               const McParams& p = {}) {
  const double sigma = block_density(field, y, l, sign);
  McEstimate e;
  if (l == 1) {
    const double v = sigma;
    e.value = f(std::span<const double>(&v, 1));
    return e;
  }
  if (l <= 4 && p.method != CanonicalMethod::monte_carlo) {
    e.value = canonical_expect_bruteforce(pot, sigma, s, l, f);
    return e;
  }
  return canonical_expect_mc(pot, sigma, s, l, f, p);
}

}  // namespace glkpz
