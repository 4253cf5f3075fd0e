#pragma once

#include <boost/crc.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "suites.hpp"

namespace glkpz {

using Json = nlohmann::ordered_json;

// Tabular artifact; cells are integers, reals or strings.
struct Table {
  using Cell = std::variant<long long, std::uint64_t, double, std::string>;
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> r) { rows.push_back(std::move(r)); }

  std::string csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        if (i) os << ',';
        std::visit([&os](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, double>) {
            std::ostringstream d;
            d << std::setprecision(17) << v;
            os << d.str();
          } else {
            os << v;
          }
        }, r[i]);
      }
      os << '\n';
    }
    return os.str();
  }

  Json json() const {
    Json arr = Json::array();
    for (const auto& r : rows) {
      Json o;
      for (std::size_t i = 0; i < r.size() && i < columns.size(); ++i)
        std::visit([&](const auto& v) { o[columns[i]] = v; }, r[i]);
      arr.push_back(std::move(o));
    }
    return arr;
  }
};

struct RunResult {
  int exit_code = 0;
  std::vector<std::string> failures;
  std::vector<std::string> files;
  Json report;
};

namespace detail {

inline std::uint32_t crc32_of(const std::string& bytes) {
  boost::crc_32_type c;
  c.process_bytes(bytes.data(), bytes.size());
  return c.checksum();
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    f << bytes;
    entries_.push_back({name, bytes.size(), crc32_of(bytes)});
  }

  void table(const Table& t, OutputFormat fmt) {
    if (fmt == OutputFormat::csv) write(t.name + ".csv", t.csv());
    else write(t.name + ".json", Json{{"schema", 1}, {"columns", t.columns}, {"rows", t.json()}}.dump(1) + "\n");
  }

  Json manifest_files() const {
    Json a = Json::array();
    for (const auto& e : entries_) {
      std::ostringstream h;
      h << std::hex << std::setw(8) << std::setfill('0') << e.crc;
      a.push_back({{"name", e.name}, {"bytes", e.bytes}, {"crc32", h.str()}});
    }
    return a;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& e : entries_) n.push_back(e.name);
    return n;
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  struct Entry {
    std::string name;
    std::size_t bytes;
    std::uint32_t crc;
  };
  std::filesystem::path dir_;
  std::vector<Entry> entries_;
};

inline std::vector<std::uint64_t> seed_list(const RunConfig& c) {
  std::vector<std::uint64_t> s;
  for (int i = 0; i < c.seed_count; ++i) s.push_back(c.seed_base + static_cast<std::uint64_t>(i));
  return s;
}

inline void check(RunResult& r, bool ok, const std::string& what) {
  if (!ok) r.failures.push_back(what);
}

// ----- simulate

inline void run_simulate(const RunConfig& c, const Potential& pot, ArtifactWriter& w, RunResult& r) {
  const double N = c.sde.N;
  const double span = c.smoothing_span / (N * N);
  const CoefficientCache cache(pot, c.sde.T_final + span + 1e-3);
  const Characteristic ch(cache, c.sde.N, c.sde.T_final + span);
  const KernelEngine eng(cache, ch);
  Table snaps{"snapshots", {"seed", "t", "step", "x", "U", "J", "h", "Z"}, {}};
  Table mons{"monitors", {"seed", "t", "monitor", "value", "threshold", "exceeded"}, {}};
  double drift = 0.0;
  for (auto seed : seed_list(c)) {
    const auto tr = simulate(c.sde, pot, seed);
    drift = std::max(drift, tr.max_charge_drift);
    for (const auto& sn : tr.snapshots) {
      const LatticeState st = make_state(sn.U, sn.t, sn.J0);
      const auto J = st.current();
      const auto h = height(st, ch, cache);
      std::vector<double> Z;
      try {
        Z = gartner(h, cache);
      } catch (const OverflowError& e) {
        check(r, false, "seed " + std::to_string(seed) + ": " + e.what());
        break;
      }
      for (int x = 0; x < c.sde.N; ++x)
        snaps.add({seed, sn.t, static_cast<std::uint64_t>(sn.step), static_cast<long long>(x), sn.U[x], J[x], h.h[x], Z[x]});
      const auto hm = hoelder_monitor(h.h, c.gamma_reg);
      mons.add({seed, sn.t, std::string("hoelder"), hm.value, hm.threshold, static_cast<long long>(hm.exceeded)});
      const auto S = smoothed_gartner(Z, eng, sn.t, span);
      const auto ap = ap_monitor(Z, S, c.gamma_ap);
      mons.add({seed, sn.t, std::string("ap_max"), ap.max_val, ap.threshold, static_cast<long long>(ap.exceeded)});
      mons.add({seed, sn.t, std::string("ap_min"), ap.min_val, ap.threshold, static_cast<long long>(ap.exceeded)});
    }
  }
  w.table(snaps, c.format);
  w.table(mons, c.format);
  check(r, drift <= 1e-9, "charge drift " + std::to_string(drift) + " exceeds 1e-9");
  r.report["max_charge_drift"] = drift;
}

// ----- ensemble-tests

inline void run_ensemble(const RunConfig& c, const Potential& pot, ArtifactWriter& w, RunResult& r) {
  const auto s = ensemble_suite(pot, {0.0, 0.25, 0.5, 0.75, 1.0}, {-1.0, -0.5, 0.0, 0.5, 1.0});
  Table t{"coefficients", {"t", "alpha_bar", "alpha_bar_wedge", "lambda", "renorm"}, {}};
  Json rows = Json::array();
  for (const auto& k : s.coefficients) {
    t.add({k.t, k.alpha_bar, k.alpha_bar_wedge, k.lambda, k.renorm});
    rows.push_back({{"t", k.t}, {"alpha_bar", k.alpha_bar}, {"alpha_bar_wedge", k.alpha_bar_wedge},
                    {"lambda", k.lambda}, {"renorm", k.renorm}});
  }
  w.table(t, c.format);
  r.report["coefficients"] = rows;
  r.report["max_mass_err"] = s.max_mass_err;
  r.report["max_mean_err"] = s.max_mean_err;
  r.report["max_alpha_u2_err"] = s.max_alpha_u2_err;
  r.report["max_ibp_residual"] = s.max_ibp;
  check(r, s.max_mass_err < 1e-8, "E1 = 1 violated");
  check(r, s.max_mean_err < 1e-8, "Eu = sigma violated");
  check(r, s.max_alpha_u2_err < 1e-6, "alpha_bar E^0 u^2 = 1 violated");
  check(r, s.max_ibp < 1e-7, "integration by parts residual above 1e-7");
}

// ----- heat-kernel-tests

inline void run_heat_kernel(const RunConfig& c, const Potential& pot, ArtifactWriter& w, RunResult& r) {
  const CoefficientCache cache(pot, 1.0);
  Table t{"heat_kernel", {"N", "max_mass_err", "min_entry", "max_semigroup", "ode_err", "gradient_ratio"}, {}};
  Json rows = Json::array();
  for (int N : c.kernel_N) {
    const auto k = kernel_suite(pot, cache, N, c.seed_base);
    t.add({static_cast<long long>(N), k.max_mass_err, k.min_entry, k.max_semigroup, k.ode_err, k.gradient_ratio});
    rows.push_back({{"N", N}, {"max_mass_err", k.max_mass_err}, {"min_entry", k.min_entry},
                    {"max_semigroup", k.max_semigroup}, {"ode_err", k.ode_err}, {"gradient_ratio", k.gradient_ratio}});
    const std::string tag = "N=" + std::to_string(N) + ": ";
    check(r, k.max_mass_err < 1e-12, tag + "kernel mass differs from 1");
    check(r, k.min_entry > -1e-13, tag + "negative kernel entry");
    check(r, k.max_semigroup < 1e-9, tag + "semigroup residual above 1e-9");
    check(r, k.ode_err < 1e-8, tag + "spectral kernel differs from the ODE oracle");
  }
  w.table(t, c.format);
  r.report["kernels"] = rows;
}

// ----- bg-diagnostics

inline void run_bg(const RunConfig& c, const Potential& pot, ArtifactWriter& w, RunResult& r) {
  const std::vector<double> tg{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto rep = verify_lemma4(pot, tg, c.bg_tol);
  Table lt{"lemma4", {"t", "statistic", "declared", "class", "r0", "r1", "r2", "pass"}, {}};
  for (const auto& row : rep.rows)
    lt.add({row.t, row.name, to_string(row.declared), to_string(row.got.cls), row.got.residuals[0],
            row.got.residuals[1], row.got.residuals[2], static_cast<long long>(row.pass)});
  w.table(lt, c.format);
  r.report["lemma4_pass"] = rep.pass;
  check(r, rep.pass, "centering taxonomy not reproduced");

  if (pot.kind() != PotentialKind::gaussian) {
    PotentialOptions o;
    o.delta = c.delta;
    o.shifted = false;
    const auto mis = make_potential(pot.kind(), pot.eps(), pot.omega(), o, true);
    const auto q = find_statistic(lemma4_statistics(mis), "q");
    const auto cl = classify(mis, q, c.bg_t, c.bg_tol);
    r.report["misshifted_q_class"] = to_string(cl.cls);
    check(r, cl.cls != CenteringClass::QCT, "mis-shifted control unexpectedly passes");
  }

  const auto sel = lemma4_statistics(pot);
  BlockDecayParams p;
  p.draws = c.bg_draws;
  p.seed = c.seed_base;
  const auto res = block_decay(pot, sel, c.bg_l, c.bg_t, p);
  Table bt{"block_decay", {"statistic", "l", "mean_abs", "std_error"}, {}};
  Json fits = Json::array();
  for (const auto& b : res) {
    for (const auto& row : b.rows) bt.add({b.name, static_cast<long long>(row.l), row.mean_abs, row.std_error});
    fits.push_back({{"statistic", b.name}, {"slope", b.fit.slope}, {"slope_stderr", b.fit.slope_stderr},
                    {"expected", b.expected_slope}, {"inconclusive", b.inconclusive}});
  }
  w.table(bt, c.format);
  r.report["block_decay"] = fits;
}

// ----- kpz-convergence

inline void run_kpz(const RunConfig& c, const Potential& pot, ArtifactWriter& w, RunResult& r) {
  CouplingConfig cc;
  cc.N_list = c.kpz_N;
  cc.seeds = c.seed_count;
  cc.base_seed = c.seed_base;
  cc.T = c.kpz_T;
  cc.span_factor = c.smoothing_span;
  cc.dt_factor = c.kpz_dt_factor;
  cc.dt_ref_N = c.kpz_dt_ref_N;
  cc.c_stab = c.sde.c_stab;
  cc.burn_in = c.sde.burn_in;
  const auto rep = coupling_experiment(pot, cc);
  Table t{"gap_curves", {"N", "seed", "t", "sup_gap"}, {}};
  for (const auto& g : rep.curve) t.add({static_cast<long long>(g.N), g.seed, g.t, g.sup_gap});
  w.table(t, c.format);
  Json rows = Json::array();
  for (const auto& row : rep.rows)
    rows.push_back({{"N", row.N}, {"median_sup_gap", row.median_gap}, {"breaches", row.breaches},
                    {"overflows", row.overflows}, {"seeds", row.seeds.size()}});
  r.report["medians"] = rows;
  r.report["monotone"] = rep.monotone;
  r.report["breach_fraction"] = rep.breach_fraction;
  check(r, rep.monotone, "median sup gap not strictly decreasing in N");
  check(r, rep.breach_fraction < 0.05, "positivity breaches in 5% of seeds or more");
}

// ----- localization

inline void run_localization(const RunConfig& c, const Potential& pot, ArtifactWriter& w, RunResult& r) {
  LocalizationConfig lc;
  lc.N = c.loc_N;
  lc.inner_size = c.loc_inner;
  lc.gamma_ap = c.loc_gamma_ap;
  lc.buffer_override = c.loc_buffer;
  lc.dt_factor = c.sde.dt_factor;
  lc.c_stab = c.sde.c_stab;
  lc.burn_in = c.sde.burn_in;
  Table t{"localization", {"seed", "buffer", "K_size", "steps", "sup_diff", "control_sup_diff"}, {}};
  double worst = 0.0;
  for (auto seed : seed_list(c)) {
    const auto a = localization_run(lc, pot, seed);
    LocalizationConfig z = lc;
    z.buffer_override = 0;
    const auto b = localization_run(z, pot, seed);
    worst = std::max(worst, a.sup_diff);
    t.add({seed, static_cast<long long>(a.l), static_cast<long long>(a.K_size), static_cast<std::uint64_t>(a.steps),
           a.sup_diff, b.sup_diff});
  }
  w.table(t, c.format);
  r.report["max_sup_diff"] = worst;
  check(r, worst < 1e-6, "localized and full dynamics differ by 1e-6 or more");
}

}  // namespace detail

// Runs the configured experiment, writing artifacts, report.json and manifest.json into the
// output directory. Exit code 0 iff every asserted invariant held.
inline RunResult run(const RunConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  r.report = Json{{"schema", 1}, {"experiment", to_string(cfg.experiment)}};
  detail::ArtifactWriter w(cfg.out_dir);
  try {
    const Potential pot = build_potential(cfg);
    r.report["potential"] = pot.describe();
    switch (cfg.experiment) {
      case Experiment::simulate: detail::run_simulate(cfg, pot, w, r); break;
      case Experiment::ensemble_tests: detail::run_ensemble(cfg, pot, w, r); break;
      case Experiment::heat_kernel_tests: detail::run_heat_kernel(cfg, pot, w, r); break;
      case Experiment::bg_diagnostics: detail::run_bg(cfg, pot, w, r); break;
      case Experiment::kpz_convergence: detail::run_kpz(cfg, pot, w, r); break;
      case Experiment::localization: detail::run_localization(cfg, pot, w, r); break;
    }
  } catch (const std::exception& e) {
    r.failures.push_back(e.what());
  }
  r.report["failures"] = r.failures;
  r.report["passed"] = r.failures.empty();
  w.write("report.json", r.report.dump(1) + "\n");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Json m{{"schema", 1},
         {"experiment", to_string(cfg.experiment)},
         {"config", emit_config(cfg)},
         {"seeds", detail::seed_list(cfg)},
         {"wall_time_s", wall},
         {"passed", r.failures.empty()},
         {"failures", r.failures},
         {"files", w.manifest_files()}};
  r.files = w.names();
  std::ofstream(w.dir() / "manifest.json", std::ios::binary) << m.dump(1) << "\n";
  r.files.push_back("manifest.json");
  r.exit_code = r.failures.empty() ? 0 : 1;
  return r;
}

}  // namespace glkpz
