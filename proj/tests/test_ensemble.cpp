#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "glkpz/ensemble.hpp"
#include "glkpz/potential.hpp"

using namespace glkpz;
using Catch::Approx;

namespace {
const ScalarFn one = [](double) { return 1.0; };
const ScalarFn id = [](double u) { return u; };
const ScalarFn sq = [](double u) { return u * u; };
const ScalarFn cube = [](double u) { return u * u * u; };

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }
double var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / (v.size() - 1);
}
}  // namespace

TEST_CASE("tilt: gaussian closed form and the shifted zero", "[ensemble]") {
  const auto g = gaussian_potential();
  for (double t : {0.0, 0.5, 3.0}) CHECK(solve_tilt(g, 1.3, t) == Approx(1.3).margin(1e-12));
  const auto p = perturbed_potential(0.3, 1.0);
  CHECK(std::abs(solve_tilt(p, 0.0, 0.2)) < 1e-12);
  CHECK(solve_tilt(p, 0.5, 0.7) == Approx(0.51848241253285064853).margin(1e-11));
}

TEST_CASE("tilt is strictly increasing in sigma", "[ensemble]") {
  const auto p = perturbed_potential(0.3, 1.0);
  for (double t : {0.0, 0.5, 1.0}) {
    double prev = -1e300;
    for (double s : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      const double l = solve_tilt(p, s, t);
      CHECK(l > prev);
      prev = l;
    }
  }
}

TEST_CASE("grand-canonical expectations", "[ensemble]") {
  const auto g = gaussian_potential();
  CHECK(gc_expect(g, 0.0, 0.0, one) == Approx(1.0).margin(1e-10));
  CHECK(gc_expect(g, 0.0, 0.0, sq) == Approx(1.0).margin(1e-10));
  const auto p = perturbed_potential(0.3, 1.0);
  const auto sl = p.at(0.4);
  CHECK(gc_expect(p, 0.0, 0.4, [sl](double u) { return sl.dV(u) * u; }) == Approx(1.0).margin(1e-10));
  CHECK(gc_expect(p, 0.0, 0.4, cube) == Approx(-0.23041677683555875528).margin(1e-10));
  CHECK(gc_expect(p, 0.2, 0.6, cube) == Approx(0.38908837627620893226).margin(1e-10));
}

TEST_CASE("normalization and mean over the (sigma, t) grid", "[ensemble]") {
  const auto p = perturbed_potential(0.3, 1.0);
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0})
    for (double s : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      const auto g = grand_canonical(p, s, t);
      CHECK(g.expect(one) == Approx(1.0).margin(1e-8));
      CHECK(g.expect(id) == Approx(s).margin(1e-8));
    }
}

TEST_CASE("sigma derivatives", "[ensemble]") {
  const auto g = gaussian_potential();
  CHECK(sigma_derivative(g, 0.3, 0.0, id, 1) == Approx(1.0).margin(1e-12));
  CHECK(sigma_derivative(g, 0.0, 0.0, id, 1) == Approx(1.0).margin(1e-12));
  CHECK(std::abs(sigma_derivative(g, 0.0, 0.0, id, 2)) < 1e-8);
  const auto p = perturbed_potential(0.3, 1.0);
  CHECK(sigma_derivative(p, 0.2, 0.5, id, 1) == Approx(1.0).margin(1e-10));
  const auto sl = p.at(0.4);
  const ScalarFn dU = [sl](double u) { return sl.dV(u); };
  CHECK(sigma_derivative(p, 0.0, 0.4, dU, 2) == Approx(0.21817210116477572156).margin(1e-8));
  CHECK_THROWS(sigma_derivative(p, 0.0, 0.4, dU, 3));
}

TEST_CASE("homogenized coefficients", "[ensemble][oracle]") {
  const auto g = homogenized(gaussian_potential(), 0.5);
  CHECK(g.alpha_bar == Approx(1.0).margin(1e-12));
  CHECK(std::abs(g.alpha_bar_wedge) < 1e-8);
  CHECK(std::abs(g.lambda) < 1e-8);
  CHECK(std::abs(g.renorm) < 1e-8);
  CHECK(g.degenerate);

  const auto p = perturbed_potential(0.3, 1.0);
  const auto c0 = homogenized(p, 0.0);
  CHECK(c0.alpha_bar == Approx(0.98121382130634987326).margin(1e-10));
  CHECK(c0.alpha_bar_wedge == Approx(0.22254717558819568967).margin(1e-8));
  CHECK(c0.lambda == Approx(0.22680803180279813636).margin(1e-8));
  CHECK(c0.renorm == Approx(0.0009909012734994693336).margin(1e-10));
  CHECK_FALSE(c0.degenerate);
  CHECK(c0.lambda == c0.alpha_bar_wedge / c0.alpha_bar);

  const auto c4 = homogenized(p, 0.4);
  CHECK(c4.alpha_bar == Approx(0.98196280771733054893).margin(1e-10));
  CHECK(c4.renorm == Approx(0.00093075684901402144318).margin(1e-10));

  const auto q = homogenized(perturbed_potential(0.45, 1.0), 0.0);
  CHECK(q.alpha_bar == Approx(0.95655813659838216444).margin(1e-10));
  CHECK(q.alpha_bar_wedge == Approx(0.33303148599671351398).margin(1e-8));
  CHECK(q.renorm == Approx(0.0036764541886669391931).margin(1e-10));
}

TEST_CASE("alpha_bar times the zero-density second moment is one", "[ensemble]") {
  for (auto pot : {gaussian_potential(), perturbed_potential(0.3, 1.0), perturbed_cos_potential(0.4, 2.0)})
    for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      const auto c = homogenized(pot, t);
      CHECK(c.alpha_bar * c.e0_u2 == Approx(1.0).margin(1e-6));
      CHECK(c.alpha_bar > 0);
    }
}

TEST_CASE("integration by parts identities", "[ensemble]") {
  const auto g = gaussian_potential();
  CHECK(ibp_check(g, 0.0, 0.0, id, one) < 1e-10);
  const auto p = perturbed_potential(0.3, 1.0);
  CHECK(ibp_check(p, 0.2, 0.6, cube, [](double u) { return 3 * u * u; }) < 1e-7);
  for (double t : {0.0, 0.5, 1.0})
    for (double s : {-1.0, 0.0, 1.0}) {
      CHECK(ibp_check(p, s, t, one, [](double) { return 0.0; }) < 1e-8);
      CHECK(ibp_check(p, s, t, sq, [](double u) { return 2 * u; }) < 1e-7);
    }
}

TEST_CASE("coefficient cache interpolates the pointwise coefficients", "[ensemble]") {
  const auto p = perturbed_potential(0.3, 1.0);
  const CoefficientCache cache(p, 1.2);
  CHECK(cache.alpha_bar(0.4) == Approx(0.98196280771733054893).margin(1e-9));
  CHECK(cache.lambda(0.4) == Approx(0.22217959728224157586).margin(1e-8));
  CHECK(cache.int_alpha(0.0, 1.0) == Approx(0.9826768562107638482).margin(1e-9));
  CHECK(cache.int_alpha(0.3, 0.3) == 0.0);
  CHECK_FALSE(cache.degenerate());
  const CoefficientCache gc(gaussian_potential(), 1.0);
  CHECK(gc.degenerate());
  CHECK(gc.time_independent());
  CHECK(gc.lambda_prime(0.5) == 0.0);
  CHECK(gc.int_alpha(0.2, 0.7) == Approx(0.5).margin(1e-14));
  const auto csv = cache.to_csv();
  CHECK(csv.rfind("t,alpha_bar,alpha_bar_wedge,lambda,renorm", 0) == 0);
}

TEST_CASE("grand-canonical sampler", "[ensemble][mc]") {
  Rng rng = make_rng(7, Stream::aux);
  const auto g = gaussian_potential();
  const auto v = sample_gc(g, 0.0, 0.0, 1000000, rng);
  CHECK(std::abs(mean(v)) < 4e-3);
  CHECK(var(v) == Approx(1.0).epsilon(0.01));

  const auto p = perturbed_potential(0.3, 1.0);
  const auto w = sample_gc(p, 0.2, 0.6, 1000000, rng);
  std::vector<double> c(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) c[i] = w[i] * w[i] * w[i];
  const double se = std::sqrt(var(c) / c.size());
  CHECK(std::abs(mean(c) - gc_expect(p, 0.2, 0.6, cube)) < 5 * se);
}

TEST_CASE("canonical sampler preserves the block sum", "[ensemble]") {
  const auto p = perturbed_potential(0.3, 1.0);
  CanonicalSampler s(p, 0.37, 0.5, 12, make_rng(3, Stream::sampler));
  const double before = s.sum();
  s.sweep(200);
  CHECK(std::abs(s.sum() - before) <= 12 * 200 * 12 * std::numeric_limits<double>::epsilon() * 12);
  CHECK(s.sum() / 12 == Approx(0.37).margin(1e-12));
}

TEST_CASE("gaussian bridge marginal variance", "[ensemble][mc]") {
  const auto g = gaussian_potential();
  CanonicalSampler s(g, 0.0, 0.0, 16, make_rng(11, Stream::sampler));
  s.sweep(50);
  std::vector<double> m;
  for (int k = 0; k < 20000; ++k) {
    s.sweep(5);
    double a = 0.0;
    for (double u : s.config()) a += u * u;
    m.push_back(a / 16);
  }
  CHECK(mean(m) == Approx(15.0 / 16.0).epsilon(0.02));
}

TEST_CASE("brute-force hyperplane quadrature", "[ensemble]") {
  const auto g = gaussian_potential();
  const BlockFn unit = [](std::span<const double>) { return 1.0; };
  CHECK(canonical_expect_bruteforce(g, 0.3, 0.0, 3, unit) == Approx(1.0).margin(1e-8));
  // two sites at zero density: U2 = -U1 and U1 ~ N(0, 1/2)
  const double e12 = canonical_expect_bruteforce(g, 0.0, 0.0, 2, [](std::span<const double> u) { return u[0] * u[1]; });
  CHECK(e12 == Approx(-0.5).margin(1e-8));
  CHECK_THROWS_AS(canonical_expect_bruteforce(g, 0.0, 0.0, 5, unit), UnsupportedSizeError);

  const auto p = perturbed_potential(0.3, 1.0);
  const BlockFn u1sq = [](std::span<const double> u) { return u[0] * u[0]; };
  CHECK(canonical_expect_bruteforce(p, 0.1, 0.0, 3, u1sq) == Approx(0.664831114905464).margin(1e-8));
}

TEST_CASE("exact canonical marginal agrees with the hyperplane quadrature", "[ensemble]") {
  const auto p = perturbed_potential(0.3, 1.0);
  CHECK(canonical_marginal_expect(p, 0.1, 0.0, 3, sq) == Approx(0.664831114905464).margin(1e-9));
  const BlockFn u1 = [](std::span<const double> u) { return std::sin(u[0]) + u[0] * u[0] * u[0]; };
  const ScalarFn f = [](double u) { return std::sin(u) + u * u * u; };
  CHECK(canonical_marginal_expect(p, -0.2, 0.3, 4, f) ==
        Approx(canonical_expect_bruteforce(p, -0.2, 0.3, 4, u1, 16)).margin(1e-7));
  const auto m = canonical_marginal(p, 0.25, 0.1, 20);
  CHECK(m.expect(one) == Approx(1.0).margin(1e-12));
  CHECK(m.expect(id) == Approx(0.25).margin(1e-9));
}

TEST_CASE("canonical Monte Carlo matches the quadrature oracle", "[ensemble][mc]") {
  const auto p = perturbed_potential(0.3, 1.0);
  McParams mp;
  mp.samples = 20000;
  mp.thin = 2;
  mp.seed = 5;
  const auto e = canonical_expect_mc(p, 0.1, 0.0, 3, [](std::span<const double> u) { return u[0] * u[0]; }, mp);
  CHECK(std::abs(e.value - 0.664831114905464) < 5 * e.std_error);
}

TEST_CASE("local canonical expectation", "[ensemble]") {
  const auto p = perturbed_potential(0.3, 1.0);
  std::vector<double> field(64);
  Rng rng = make_rng(2, Stream::aux);
  std::normal_distribution<double> nd;
  for (auto& v : field) v = nd(rng);
  for (int l : {3, 8, 16}) {
    const double sigma = block_density(field, 10, l, +1);
    CHECK(local_canonical_expect(field, p, 0.0, 10, l, +1, one).value == Approx(1.0).margin(1e-10));
    CHECK(local_canonical_expect(field, p, 0.0, 10, l, -1, id).value ==
          Approx(block_density(field, 10, l, -1)).margin(1e-8));
    CHECK(local_canonical_expect(field, p, 0.0, 10, l, +1, id).value == Approx(sigma).margin(1e-8));
  }
  McParams mc;
  mc.method = CanonicalMethod::monte_carlo;
  mc.samples = 4000;
  const auto e = local_canonical_expect(field, p, 0.0, 5, 8, +1, id, mc);
  CHECK(e.value == Approx(block_density(field, 5, 8, +1)).margin(1e-12));
}
