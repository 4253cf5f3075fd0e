#include <catch_amalgamated.hpp>

#include <cmath>

#include "glkpz/characteristic.hpp"
#include "glkpz/cole_hopf.hpp"
#include "glkpz/heat_kernel.hpp"

using namespace glkpz;
using Catch::Approx;

TEST_CASE("characteristic with unit alpha_bar", "[cole_hopf]") {
  const CoefficientCache cache(gaussian_potential(), 1.0);
  const Characteristic ch(cache, 4, 1.0);
  // D(t) = 2 * 4^{3/2} t = 16 t
  REQUIRE(ch.jumps().size() == 16);
  for (int k = 1; k <= 16; ++k) CHECK(ch.jumps()[k - 1] == Approx(k / 16.0).margin(1e-12));
  CHECK(ch.offset(0.5 - 1e-9) == 7);
  CHECK(ch.offset(0.5 + 1e-9) == 8);
  CHECK(ch.offset(0.2, 0.45) == 4);
  const Characteristic empty(cache, 4, 0.0);
  CHECK(empty.jumps().empty());
}

TEST_CASE("jump count matches the quadrature oracle", "[cole_hopf][oracle]") {
  const auto p = perturbed_potential(0.3, 1.0);
  const CoefficientCache cache(p, 1.0);
  const Characteristic ch(cache, 32, 1.0);
  CHECK(ch.D(1.0) == Approx(355.76702399575504105).margin(1e-6));
  CHECK(ch.jumps().size() == 355);
  CHECK(static_cast<long>(ch.jumps().size()) == static_cast<long>(std::floor(ch.D(1.0))));
  for (std::size_t i = 1; i < ch.jumps().size(); ++i) CHECK(ch.jumps()[i] > ch.jumps()[i - 1]);
}

namespace {
struct Run {
  Potential pot = perturbed_potential(0.3, 1.0);
  CoefficientCache cache{pot, 0.2};
  Characteristic ch{cache, 32, 0.1};
  LatticeTrajectory tr;
  Run() {
    SdeConfig c;
    c.N = 32;
    c.T_final = 0.01;
    c.record_every = 50;
    tr = simulate(c, pot, 12);
  }
};
}  // namespace

TEST_CASE("height function", "[cole_hopf]") {
  Run r;
  const auto h0 = height(r.tr, r.ch, r.cache, 0.0);
  const auto s0 = make_state(r.tr.snapshots[0].U, 0.0, r.tr.snapshots[0].J0);
  CHECK(h0.h == s0.current());
  CHECK(h0.renorm_integral == 0.0);

  const auto& sn = r.tr.snapshots.back();
  const auto h = height(r.tr, r.ch, r.cache, sn.t);
  CHECK(h.offset == r.ch.offset(sn.t));
  CHECK(h.offset > 0);
  CHECK(h.renorm_integral == Approx(r.cache.int_renorm(0.0, sn.t)).margin(1e-15));
  // increments of h are the shifted charge field, away from the wrap point
  const double sq = std::sqrt(32.0);
  for (long x = 1; x < 32; ++x) {
    const long y = wrap_index(x - h.offset, 32);
    if (y == 0) continue;
    CHECK(sq * (h.h[x] - h.h[x - 1]) == Approx(sn.U[y]).margin(1e-11));
  }
  CHECK_THROWS_AS(height(r.tr, r.ch, r.cache, 0.123), std::out_of_range);
}

TEST_CASE("gaussian heights are not renormalized and Z is one", "[cole_hopf]") {
  const auto g = gaussian_potential();
  const CoefficientCache cache(g, 0.1);
  const Characteristic ch(cache, 16, 0.05);
  SdeConfig c;
  c.N = 16;
  c.T_final = 0.05;
  const auto tr = simulate(c, g, 2);
  const auto& sn = tr.snapshots.back();
  const auto h = height(tr, ch, cache, sn.t);
  const auto J = make_state(sn.U, sn.t, sn.J0).current();
  for (long x = 0; x < 16; ++x) CHECK(h.h[x] == J[wrap_index(x - h.offset, 16)]);
  for (double z : gartner(h, cache)) CHECK(z == 1.0);
}

TEST_CASE("Gartner transform", "[cole_hopf]") {
  Run r;
  HeightField flat;
  flat.t = 0.05;
  flat.h.assign(32, 0.0);
  for (double z : gartner(flat, r.cache)) CHECK(z == 1.0);

  const auto& sn = r.tr.snapshots.back();
  const auto h = height(r.tr, r.ch, r.cache, sn.t);
  const auto Z = gartner(h, r.cache);
  const double lam = r.cache.lambda(sn.t);
  for (std::size_t x = 0; x < Z.size(); ++x) {
    CHECK(Z[x] > 0);
    CHECK(std::log(Z[x]) / lam == Approx(h.h[x]).margin(1e-12));
  }

  HeightField big = flat;
  big.h[3] = 1e5;
  CHECK_THROWS_AS(gartner(big, r.cache), OverflowError);

  const auto s = make_state(sn.U, sn.t, sn.J0);
  const auto G = gartner_unshifted(s, r.cache);
  const auto J = s.current();
  CHECK(std::log(G[5]) == Approx(lam * (J[5] - r.cache.int_renorm(0, sn.t))).margin(1e-12));
  const auto Gf = gartner_unshifted(s, r.cache, 0.0);
  CHECK(std::log(Gf[5]) == Approx(r.cache.lambda(0.0) * (J[5] - r.cache.int_renorm(0, sn.t))).margin(1e-12));
}

TEST_CASE("Hoelder monitor", "[cole_hopf]") {
  CHECK(hoelder_monitor(std::vector<double>(10, 3.0), 0.1).value == 0.0);
  const auto m = hoelder_monitor(std::vector<double>{0, 1, 1, 1}, 0.5);
  // the unit step is seen at distance 1 (twice, through the wrap)
  CHECK(m.value == Approx(0.5).margin(1e-15));
  CHECK(m.threshold == Approx(2.0));
  CHECK_FALSE(m.exceeded);

  Rng rng = make_rng(1, Stream::aux);
  std::normal_distribution<double> nd;
  std::vector<double> h(40);
  for (auto& v : h) v = nd(rng);
  const double v0 = hoelder_monitor(h, 0.1).value;
  auto shifted = h;
  for (auto& v : shifted) v += 17.0;
  CHECK(hoelder_monitor(shifted, 0.1).value == Approx(v0).margin(1e-13));
  std::vector<double> rev(h.rbegin(), h.rend());
  CHECK(hoelder_monitor(rev, 0.1).value == Approx(v0).margin(1e-15));
}

TEST_CASE("a-priori monitor", "[cole_hopf]") {
  for (int N : {3, 16, 256}) {
    const std::vector<double> one(N, 1.0);
    CHECK_FALSE(ap_monitor(one, one, 0.05).exceeded);
  }
  std::vector<double> z(64, 1.0);
  z[7] = std::exp(2 * std::log(64.0));
  CHECK(ap_monitor(z, std::vector<double>(64, 1.0), 0.05).exceeded);
  std::vector<double> small(64, 1.0);
  small[2] = 1.0 / 100.0;
  CHECK(ap_monitor(small, small, 0.05).exceeded);
}

TEST_CASE("smoothed transform", "[cole_hopf]") {
  Run r;
  const KernelEngine e(r.cache, r.ch);
  for (double v : smoothed_gartner(std::vector<double>(32, 2.5), e, 0.01, 0.1 / 1024))
    CHECK(v == Approx(2.5).margin(1e-12));
  const auto& sn = r.tr.snapshots.back();
  const auto Z = gartner(height(r.tr, r.ch, r.cache, sn.t), r.cache);
  CHECK(smoothed_gartner(Z, e, sn.t, 0.0) == Z);
  double prev = 1e300;
  for (double f : {1e-2, 1e-3, 1e-4}) {
    const auto S = smoothed_gartner(Z, e, sn.t, f / 1024);
    double d = 0.0;
    for (std::size_t x = 0; x < Z.size(); ++x) d = std::max(d, std::abs(S[x] - Z[x]));
    CHECK(d < prev);
    prev = d;
  }
  const auto S = smoothed_gartner(Z, e, sn.t, 0.1 / 1024);
  double d = 0.0, zmax = 0.0;
  for (std::size_t x = 0; x < Z.size(); ++x) {
    d = std::max(d, std::abs(S[x] - Z[x]));
    zmax = std::max(zmax, Z[x]);
  }
  CHECK(d <= 0.1 * zmax);
  CHECK_THROWS(smoothed_gartner(Z, e, sn.t, -1.0));
}
