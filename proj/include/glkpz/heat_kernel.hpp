#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "characteristic.hpp"
#include "ensemble.hpp"
#include "quadrature.hpp"
#include "torus.hpp"

namespace glkpz {

// H^N(s,t,x,y) = k(x - offset - y), offset = number of characteristic jumps in (s,t].
struct KernelSlice {
  int N = 0;
  double s = 0.0, t = 0.0;
  long offset = 0;
  std::vector<double> k;

  double operator()(long x, long y) const {
    return k[wrap_index(x - offset - y, k.size())];
  }
  double mass() const {
    double m = 0.0;
    for (double v : k) m += v;
    return m;
  }
};

inline KernelSlice identity_slice(int N, double s) {
  KernelSlice ks;
  ks.N = N;
  ks.s = ks.t = s;
  ks.k.assign(static_cast<std::size_t>(N), 0.0);
  ks.k[0] = 1.0;
  return ks;
}

// circular convolution with offset: out(x) = sum_y k(x - offset - y) phi(y)
inline std::vector<double> apply(const KernelSlice& ks, std::span<const double> phi) {
  const std::size_t n = phi.size();
  if (n != ks.k.size()) throw std::invalid_argument("kernel/field size mismatch");
  // with kr[j] = k[n-1-j] and phi2 = phi repeated twice, out(x) = sum_j kr[j] phi2[b + 1 + j],
  // b = (x - offset) mod n
  std::vector<double> kr(ks.k.rbegin(), ks.k.rend());
  std::vector<double> phi2(2 * n);
  std::copy(phi.begin(), phi.end(), phi2.begin());
  std::copy(phi.begin(), phi.end(), phi2.begin() + static_cast<long>(n));
  std::vector<double> out(n, 0.0);
  for (std::size_t x = 0; x < n; ++x) {
    const std::size_t b = wrap_index(static_cast<long>(x) - ks.offset, n);
    const double* p = phi2.data() + b + 1;
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < n; ++j) s += kr[j] * p[j];
    // j = n - 1 reads phi2[b + n], i.e. phi[b]
    s += kr[n - 1] * phi2[b + n];
    out[x] = s;
  }
  return out;
}

struct KernelOptions {
  double clamp_tol = 1e-13;
};

// Builds H^N slices spectrally from the coefficient cache.
class KernelEngine {
 public:
  KernelEngine(const CoefficientCache& cache, const Characteristic& ch, KernelOptions opt = {})
      : cache_(&cache), ch_(&ch), N_(ch.N()), opt_(opt) {
    cos_.resize(static_cast<std::size_t>(N_));
    sin_.resize(static_cast<std::size_t>(N_));
    for (int j = 0; j < N_; ++j) {
      const double th = 2.0 * M_PI * j / N_;
      cos_[j] = std::cos(th);
      sin_[j] = std::sin(th);
    }
  }

  int N() const { return N_; }
  const CoefficientCache& cache() const { return *cache_; }
  const Characteristic& characteristic() const { return *ch_; }

  // jump-free kernel from the integrated coefficients dA = int alpha_bar, dB = int lambda^2 alpha_bar
  std::vector<double> jump_free(double dA, double dB) const {
    const double N = N_;
    const double a = N * N * dA + 0.25 * N * dB;
    const double b = 2.0 * N * std::sqrt(N) * dA;
    std::vector<std::complex<double>> mu(static_cast<std::size_t>(N_));
    for (int m = 0; m < N_; ++m)
      mu[m] = std::exp(a * (2.0 * cos_[m] - 2.0)) * std::polar(1.0, b * sin_[m]);
    std::vector<double> k(static_cast<std::size_t>(N_));
    for (int z = 0; z < N_; ++z) {
      double s = 0.0;
      int j = 0;  // m z mod N
      for (int m = 0; m < N_; ++m) {
        s += mu[m].real() * cos_[j] - mu[m].imag() * sin_[j];
        j += z;
        if (j >= N_) j -= N_;
      }
      k[z] = s / N;
    }
    return k;
  }

  KernelSlice build(double s, double t) const {
    if (!(s <= t)) throw std::invalid_argument("kernel requires s <= t");
    if (s == t) return identity_slice(N_, s);
    KernelSlice ks;
    ks.N = N_;
    ks.s = s;
    ks.t = t;
    ks.offset = ch_->offset(s, t);
    ks.k = jump_free(cache_->int_alpha(s, t), cache_->int_lambda2_alpha(s, t));
    double mass = 0.0;
    bool clamped = false;
    for (double& v : ks.k) {
      if (v < -opt_.clamp_tol)
        throw NumericalError("heat kernel entry " + std::to_string(v) + " below clamp tolerance");
      if (v < 0) {
        v = 0.0;
        clamped = true;
      }
      mass += v;
    }
    if (clamped)
      for (double& v : ks.k) v /= mass;
    return ks;
  }

  // (T^!(tau) phi)(x) = a (phi(x+1) + phi(x-1) - 2 phi(x)) + b (phi(x+1) - phi(x-1))
  std::vector<double> generator(double tau, std::span<const double> phi) const {
    const double N = N_;
    const double ab = cache_->alpha_bar(tau), lam = cache_->lambda(tau);
    const double a = (N * N + 0.25 * N * lam * lam) * ab;
    const double b = N * std::sqrt(N) * ab;
    const std::size_t n = phi.size();
    std::vector<double> out(n);
    for (std::size_t x = 0; x < n; ++x) {
      const double r = phi[(x + 1) % n], l = phi[(x + n - 1) % n];
      out[x] = a * (r + l - 2.0 * phi[x]) + b * (r - l);
    }
    return out;
  }

 private:
  const CoefficientCache* cache_;
  const Characteristic* ch_;
  int N_;
  KernelOptions opt_;
  std::vector<double> cos_, sin_;
};

// Direct RK4 integration of d/dt h = T^!(t) h from a delta at 0 (jump-free kernel oracle).
inline std::vector<double> kernel_ode(const KernelEngine& e, double s, double t, int steps) {
  std::vector<double> h(static_cast<std::size_t>(e.N()), 0.0);
  h[0] = 1.0;
  const double dt = (t - s) / steps;
  auto axpy = [](const std::vector<double>& a, double c, const std::vector<double>& b) {
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + c * b[i];
    return r;
  };
  for (int i = 0; i < steps; ++i) {
    const double tau = s + i * dt;
    const auto k1 = e.generator(tau, h);
    const auto k2 = e.generator(tau + 0.5 * dt, axpy(h, 0.5 * dt, k1));
    const auto k3 = e.generator(tau + 0.5 * dt, axpy(h, 0.5 * dt, k2));
    const auto k4 = e.generator(tau + dt, axpy(h, dt, k3));
    for (std::size_t x = 0; x < h.size(); ++x)
      h[x] += dt / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
  }
  return h;
}

// sup-norm of H(r,t) o H(s,r) - H(s,t), compared as full operator rows
inline double verify_semigroup(const KernelEngine& e, double s, double r, double t) {
  if (!(s <= r && r <= t)) throw std::invalid_argument("semigroup check needs s <= r <= t");
  const KernelSlice a = e.build(s, r), b = e.build(r, t), c = e.build(s, t);
  const int N = e.N();
  // row x = 0 of the composed operator: H_bc(0, z) H_ab(z, y)
  double res = 0.0;
  for (long y = 0; y < N; ++y) {
    double comp = 0.0;
    for (long z = 0; z < N; ++z) comp += b(0, z) * a(z, y);
    res = std::max(res, std::abs(comp - c(0, y)));
  }
  return res;
}

struct RegularityRow {
  std::string quantity;
  int l = 0;
  double measured = 0.0;
  double predicted = 0.0;
  double ratio = 0.0;
};

struct RegularityReport {
  int N = 0;
  double s = 0.0, t = 0.0;
  std::vector<RegularityRow> rows;
};

inline double torus_distance(long d, int N) {
  long r = d % N;
  if (r < 0) r += N;
  return static_cast<double>(std::min<long>(r, N - r));
}

// Measured kernel norms against their predicted scalings.
inline RegularityReport verify_regularity(const KernelEngine& e, double s, double t,
                                          const std::vector<int>& l_list) {
  if (!(s < t)) throw std::invalid_argument("regularity check needs s < t");
  const KernelSlice ks = e.build(s, t);
  const int N = e.N();
  const double dt = t - s;
  RegularityReport rep;
  rep.N = N;
  rep.s = s;
  rep.t = t;
  for (int l : l_list) {
    RegularityRow row;
    row.l = l;
    if (l == 0) {
      row.quantity = "mass";
      row.measured = ks.mass();
      row.predicted = 1.0;
    } else {
      row.quantity = "gradient_sum";
      double g = 0.0;
      for (int z = 0; z < N; ++z) g += std::abs(ks.k[wrap_index(z + l, N)] - ks.k[z]);
      row.measured = N * g;
      row.predicted = std::pow(dt, -0.5) * l;
    }
    row.ratio = row.measured / row.predicted;
    rep.rows.push_back(row);
  }
  {
    RegularityRow row;
    row.quantity = "pointwise_sup";
    row.measured = *std::max_element(ks.k.begin(), ks.k.end());
    row.predicted = 1.0 / (N * std::sqrt(dt));
    row.ratio = row.measured / row.predicted;
    rep.rows.push_back(row);
  }
  {
    // second moment about the characteristic: H(0,y) = k(-offset - y), x - y = z + offset
    RegularityRow row;
    row.quantity = "moment2";
    double m = 0.0;
    for (int z = 0; z < N; ++z) {
      const double d = torus_distance(z + ks.offset, N) / N;
      m += ks.k[z] * d * d;
    }
    row.measured = m;
    row.predicted = dt + 1.0 / (static_cast<double>(N) * N);
    row.ratio = row.measured / row.predicted;
    rep.rows.push_back(row);
  }
  return rep;
}

// Continuum kernel on the unit torus: images of a Gaussian with variance 2 int_s^t alpha_bar.
inline double continuum_kernel(const CoefficientCache& cache, double s, double t, double x, double y) {
  if (!(s < t)) throw std::invalid_argument("continuum kernel requires s < t");
  const double v = 2.0 * cache.int_alpha(s, t);
  const double c = 1.0 / std::sqrt(2.0 * M_PI * v);
  double d = std::fmod(x - y, 1.0);
  if (d > 0.5) d -= 1.0;
  if (d < -0.5) d += 1.0;
  const int K = 1 + static_cast<int>(std::ceil(std::sqrt(2.0 * v * 40.0)));
  double sum = 0.0;
  for (int k = -K; k <= K; ++k) {
    const double z = d + k;
    sum += std::exp(-z * z / (2.0 * v));
  }
  return c * sum;
}

// int_T |H(s,t,0,y) - N H^N(s,t,0,Ny)|^2 dy with H^N extended piecewise-constantly
// (site j owns the cell of width 1/N centred at j/N).
inline double discrete_continuum_gap(const KernelEngine& e, double s, double t) {
  const KernelSlice ks = e.build(s, t);
  const int N = e.N();
  double gap = 0.0;
  for (int j = 0; j < N; ++j) {
    const double hN = N * ks(0, j);
    const double a = (j - 0.5) / N, b = (j + 0.5) / N;
    gap += quad::integrate(
        [&](double y) {
          const double d = continuum_kernel(e.cache(), s, t, 0.0, y) - hN;
          return d * d;
        },
        a, b, 1);
  }
  return gap;
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

// ordinary least squares of y on x
inline LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("fit needs >= 2 matching points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

inline LinearFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  return fit_line(lx, ly);
}

}  // namespace glkpz
