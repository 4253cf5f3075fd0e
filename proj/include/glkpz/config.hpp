#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice_sde.hpp"
#include "potential.hpp"

namespace glkpz {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Experiment { simulate, ensemble_tests, heat_kernel_tests, bg_diagnostics, kpz_convergence, localization };
enum class OutputFormat { csv, json };

inline const std::vector<std::pair<Experiment, std::string>>& experiment_names() {
  static const std::vector<std::pair<Experiment, std::string>> v{
      {Experiment::simulate, "simulate"},
      {Experiment::ensemble_tests, "ensemble-tests"},
      {Experiment::heat_kernel_tests, "heat-kernel-tests"},
      {Experiment::bg_diagnostics, "bg-diagnostics"},
      {Experiment::kpz_convergence, "kpz-convergence"},
      {Experiment::localization, "localization"}};
  return v;
}

inline std::string to_string(Experiment e) {
  for (const auto& [k, n] : experiment_names())
    if (k == e) return n;
  return "?";
}

inline Experiment parse_experiment(const std::string& s) {
  for (const auto& [k, n] : experiment_names())
    if (n == s) return k;
  throw ParseError("unknown experiment '" + s + "'");
}

struct RunConfig {
  Experiment experiment = Experiment::simulate;

  PotentialKind potential_kind = PotentialKind::perturbed;
  double eps = 0.3;
  double omega = 1.0;
  double delta = 0.3;
  bool shifted = true;

  SdeConfig sde{};

  std::uint64_t seed_base = 1;
  int seed_count = 1;

  double gamma_reg = 0.1;
  double gamma_ap = 0.05;
  double smoothing_span = 0.1;  // in units of N^{-2}

  std::string out_dir = "out";
  OutputFormat format = OutputFormat::csv;

  std::vector<int> kernel_N{16, 32, 64};
  std::vector<int> kpz_N{16, 32, 64};
  double kpz_T = 0.25;
  double kpz_dt_factor = 0.1;
  int kpz_dt_ref_N = 16;
  std::vector<int> bg_l{4, 8, 16, 32, 64};
  int bg_draws = 400;
  double bg_t = 0.0;
  double bg_tol = 1e-5;
  int loc_N = 256;
  int loc_inner = 8;
  int loc_buffer = -1;
  double loc_gamma_ap = 0.1;

  bool operator==(const RunConfig&) const = default;
};

struct KeyDoc {
  std::string key, def, doc;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), d);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(d))
    throw ParseError(key + " expects a real number, got '" + v + "'");
  return d;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long i = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), i);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ParseError(key + " expects an integer, got '" + v + "'");
  return i;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(key + " expects true or false, got '" + v + "'");
}

inline std::vector<int> to_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_int(key, trim(item))));
  if (out.empty()) throw ParseError(key + " expects a comma-separated list");
  return out;
}

struct Field {
  KeyDoc doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::vector<Field>& fields() {
  using C = RunConfig;
  static const std::vector<Field> f{
      {{"experiment", "simulate", "simulate | ensemble-tests | heat-kernel-tests | bg-diagnostics | kpz-convergence | localization"},
       [](C& c, const std::string& v) { c.experiment = parse_experiment(v); },
       [](const C& c) { return to_string(c.experiment); }},
      {{"potential.kind", "perturbed", "gaussian | perturbed | perturbed_cos"},
       [](C& c, const std::string& v) {
         if (v == "gaussian") c.potential_kind = PotentialKind::gaussian;
         else if (v == "perturbed") c.potential_kind = PotentialKind::perturbed;
         else if (v == "perturbed_cos") c.potential_kind = PotentialKind::perturbed_cos;
         else throw ParseError("potential.kind must be gaussian, perturbed or perturbed_cos");
       },
       [](const C& c) { return to_string(c.potential_kind); }},
      {{"potential.eps", "0.3", "perturbation size, |eps| < 1/2"},
       [](C& c, const std::string& v) { c.eps = to_double("potential.eps", v); },
       [](const C& c) { return fmt_double(c.eps); }},
      {{"potential.omega", "1", "angular frequency of the time modulation"},
       [](C& c, const std::string& v) { c.omega = to_double("potential.omega", v); },
       [](const C& c) { return fmt_double(c.omega); }},
      {{"potential.delta", "0.3", "smoothing scale of the asymmetric profile (> 0)"},
       [](C& c, const std::string& v) { c.delta = to_double("potential.delta", v); },
       [](const C& c) { return fmt_double(c.delta); }},
      {{"potential.shifted", "true", "subtract the tilt so that lambda(0,t) = 0"},
       [](C& c, const std::string& v) { c.shifted = to_bool("potential.shifted", v); },
       [](const C& c) { return std::string(c.shifted ? "true" : "false"); }},
      {{"sde.N", "64", "torus size (>= 4)"},
       [](C& c, const std::string& v) { c.sde.N = static_cast<int>(to_int("sde.N", v)); },
       [](const C& c) { return std::to_string(c.sde.N); }},
      {{"sde.dt_factor", "1", "time step as a fraction of the stability bound, in (0, 1]"},
       [](C& c, const std::string& v) { c.sde.dt_factor = to_double("sde.dt_factor", v); },
       [](const C& c) { return fmt_double(c.sde.dt_factor); }},
      {{"sde.c_stab", "0.5", "stability constant in dt_max = c_stab / (4 c_hi N^2)"},
       [](C& c, const std::string& v) { c.sde.c_stab = to_double("sde.c_stab", v); },
       [](const C& c) { return fmt_double(c.sde.c_stab); }},
      {{"sde.T_final", "0.01", "macroscopic horizon (>= 0)"},
       [](C& c, const std::string& v) { c.sde.T_final = to_double("sde.T_final", v); },
       [](const C& c) { return fmt_double(c.sde.T_final); }},
      {{"sde.record_every", "100", "steps between snapshots (>= 1)"},
       [](C& c, const std::string& v) { c.sde.record_every = static_cast<int>(to_int("sde.record_every", v)); },
       [](const C& c) { return std::to_string(c.sde.record_every); }},
      {{"sde.initial", "canonical", "canonical | flat"},
       [](C& c, const std::string& v) {
         if (v == "canonical") c.sde.initial = InitialData::canonical;
         else if (v == "flat") c.sde.initial = InitialData::flat;
         else throw ParseError("sde.initial must be canonical or flat");
       },
       [](const C& c) { return std::string(c.sde.initial == InitialData::canonical ? "canonical" : "flat"); }},
      {{"sde.burn_in", "50", "sampler sweeps for canonical initial data"},
       [](C& c, const std::string& v) { c.sde.burn_in = static_cast<int>(to_int("sde.burn_in", v)); },
       [](const C& c) { return std::to_string(c.sde.burn_in); }},
      {{"sde.sigma", "0", "initial charge density"},
       [](C& c, const std::string& v) { c.sde.sigma = to_double("sde.sigma", v); },
       [](const C& c) { return fmt_double(c.sde.sigma); }},
      {{"seeds.base", "1", "base seed"},
       [](C& c, const std::string& v) { c.seed_base = static_cast<std::uint64_t>(to_int("seeds.base", v)); },
       [](const C& c) { return std::to_string(c.seed_base); }},
      {{"seeds.count", "1", "number of seeds (>= 1)"},
       [](C& c, const std::string& v) { c.seed_count = static_cast<int>(to_int("seeds.count", v)); },
       [](const C& c) { return std::to_string(c.seed_count); }},
      {{"proof.gamma_reg", "0.1", "Hoelder monitor exponent"},
       [](C& c, const std::string& v) { c.gamma_reg = to_double("proof.gamma_reg", v); },
       [](const C& c) { return fmt_double(c.gamma_reg); }},
      {{"proof.gamma_ap", "0.05", "a-priori monitor exponent"},
       [](C& c, const std::string& v) { c.gamma_ap = to_double("proof.gamma_ap", v); },
       [](const C& c) { return fmt_double(c.gamma_ap); }},
      {{"proof.smoothing_span", "0.1", "smoothing span in units of N^-2"},
       [](C& c, const std::string& v) { c.smoothing_span = to_double("proof.smoothing_span", v); },
       [](const C& c) { return fmt_double(c.smoothing_span); }},
      {{"output.dir", "out", "output directory"},
       [](C& c, const std::string& v) { c.out_dir = v; },
       [](const C& c) { return c.out_dir; }},
      {{"output.format", "csv", "csv | json (tabular artifacts; reports are always json)"},
       [](C& c, const std::string& v) {
         if (v == "csv") c.format = OutputFormat::csv;
         else if (v == "json") c.format = OutputFormat::json;
         else throw ParseError("output.format must be csv or json");
       },
       [](const C& c) { return std::string(c.format == OutputFormat::csv ? "csv" : "json"); }},
      {{"kernel.N_list", "16,32,64", "torus sizes for heat-kernel-tests"},
       [](C& c, const std::string& v) { c.kernel_N = to_list("kernel.N_list", v); },
       [](const C& c) { return fmt_list(c.kernel_N); }},
      {{"kpz.N_list", "16,32,64", "torus sizes for kpz-convergence"},
       [](C& c, const std::string& v) { c.kpz_N = to_list("kpz.N_list", v); },
       [](const C& c) { return fmt_list(c.kpz_N); }},
      {{"kpz.T", "0.25", "horizon of the coupling experiment"},
       [](C& c, const std::string& v) { c.kpz_T = to_double("kpz.T", v); },
       [](const C& c) { return fmt_double(c.kpz_T); }},
      {{"kpz.dt_factor", "0.1", "time step fraction for the coupled Z and W runs at N = kpz.dt_ref_N"},
       [](C& c, const std::string& v) { c.kpz_dt_factor = to_double("kpz.dt_factor", v); },
       [](const C& c) { return fmt_double(c.kpz_dt_factor); }},
      {{"kpz.dt_ref_N", "16", "above this N the fraction shrinks like 1/N; 0 keeps it fixed"},
       [](C& c, const std::string& v) { c.kpz_dt_ref_N = static_cast<int>(to_int("kpz.dt_ref_N", v)); },
       [](const C& c) { return std::to_string(c.kpz_dt_ref_N); }},
      {{"bg.l_list", "4,8,16,32,64", "block lengths for the decay fits"},
       [](C& c, const std::string& v) { c.bg_l = to_list("bg.l_list", v); },
       [](const C& c) { return fmt_list(c.bg_l); }},
      {{"bg.draws", "400", "block-density draws per block length"},
       [](C& c, const std::string& v) { c.bg_draws = static_cast<int>(to_int("bg.draws", v)); },
       [](const C& c) { return std::to_string(c.bg_draws); }},
      {{"bg.t", "0", "time at which the decay laws are tested"},
       [](C& c, const std::string& v) { c.bg_t = to_double("bg.t", v); },
       [](const C& c) { return fmt_double(c.bg_t); }},
      {{"bg.tol", "1e-05", "residual tolerance of the centering taxonomy"},
       [](C& c, const std::string& v) { c.bg_tol = to_double("bg.tol", v); },
       [](const C& c) { return fmt_double(c.bg_tol); }},
      {{"localization.N", "256", "torus size for the localization coupling"},
       [](C& c, const std::string& v) { c.loc_N = static_cast<int>(to_int("localization.N", v)); },
       [](const C& c) { return std::to_string(c.loc_N); }},
      {{"localization.inner", "8", "|I|"},
       [](C& c, const std::string& v) { c.loc_inner = static_cast<int>(to_int("localization.inner", v)); },
       [](const C& c) { return std::to_string(c.loc_inner); }},
      {{"localization.buffer", "-1", "buffer override (-1 uses the default l(t,I))"},
       [](C& c, const std::string& v) { c.loc_buffer = static_cast<int>(to_int("localization.buffer", v)); },
       [](const C& c) { return std::to_string(c.loc_buffer); }},
      {{"localization.gamma_ap", "0.1", "exponent in the buffer length l(t, I)"},
       [](C& c, const std::string& v) { c.loc_gamma_ap = to_double("localization.gamma_ap", v); },
       [](const C& c) { return fmt_double(c.loc_gamma_ap); }},
  };
  return f;
}

}  // namespace detail

inline std::vector<KeyDoc> config_keys() {
  std::vector<KeyDoc> out;
  for (const auto& f : detail::fields()) out.push_back(f.doc);
  return out;
}

// Range checks; the message names the offending key.
inline void validate(const RunConfig& c) {
  auto fail = [](const std::string& m) { throw ParseError(m); };
  if (c.sde.N < 4) fail("sde.N must be ≥ 4");
  if (!(c.sde.dt_factor > 0 && c.sde.dt_factor <= 1)) fail("sde.dt_factor must be in (0, 1]");
  if (!(c.sde.c_stab > 0 && c.sde.c_stab <= 1)) fail("sde.c_stab must be in (0, 1]");
  if (!(c.sde.T_final >= 0)) fail("sde.T_final must be ≥ 0");
  if (c.sde.record_every < 1) fail("sde.record_every must be ≥ 1");
  if (c.sde.burn_in < 0) fail("sde.burn_in must be ≥ 0");
  if (c.potential_kind != PotentialKind::gaussian && !(std::abs(c.eps) < 0.5))
    fail("potential.eps must satisfy |eps| < 1/2");
  if (!(c.delta > 0)) fail("potential.delta must be > 0");
  if (c.seed_count < 1) fail("seeds.count must be ≥ 1");
  if (!(c.gamma_reg >= 0)) fail("proof.gamma_reg must be ≥ 0");
  if (!(c.gamma_ap >= 0)) fail("proof.gamma_ap must be ≥ 0");
  if (!(c.smoothing_span >= 0)) fail("proof.smoothing_span must be ≥ 0");
  if (c.out_dir.empty()) fail("output.dir must be nonempty");
  for (int n : c.kernel_N)
    if (n < 4) fail("kernel.N_list entries must be ≥ 4");
  for (int n : c.kpz_N)
    if (n < 4) fail("kpz.N_list entries must be ≥ 4");
  if (!(c.kpz_T >= 0)) fail("kpz.T must be ≥ 0");
  if (!(c.kpz_dt_factor > 0 && c.kpz_dt_factor <= 1)) fail("kpz.dt_factor must be in (0, 1]");
  if (c.kpz_dt_ref_N < 0) fail("kpz.dt_ref_N must be ≥ 0");
  for (int l : c.bg_l)
    if (l < 1) fail("bg.l_list entries must be ≥ 1");
  if (c.bg_draws < 2) fail("bg.draws must be ≥ 2");
  if (!(c.bg_t >= 0)) fail("bg.t must be ≥ 0");
  if (!(c.bg_tol > 0)) fail("bg.tol must be > 0");
  if (c.loc_N < 4) fail("localization.N must be ≥ 4");
  if (c.loc_inner < 1) fail("localization.inner must be ≥ 1");
  if (c.loc_buffer < -1) fail("localization.buffer must be ≥ -1");
  if (!(c.loc_gamma_ap >= 0)) fail("localization.gamma_ap must be ≥ 0");
}

inline RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>") {
  RunConfig c;
  std::map<std::string, int> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    const detail::Field* f = nullptr;
    for (const auto& cand : detail::fields())
      if (cand.doc.key == key) f = &cand;
    if (!f) throw ParseError(where + "unknown key '" + key + "'");
    if (seen.count(key)) throw ParseError(where + "duplicate key '" + key + "' (first on line " + std::to_string(seen[key]) + ")");
    seen[key] = lineno;
    if (val.empty()) throw ParseError(where + "missing value for key '" + key + "'");
    try {
      f->set(c, val);
    } catch (const ParseError& e) {
      throw ParseError(where + e.what());
    }
  }
  try {
    validate(c);
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    const auto key = msg.substr(0, msg.find(' '));
    const std::string at = seen.count(key) ? origin + ":" + std::to_string(seen[key]) + ": " : origin + ": ";
    throw ParseError(at + msg);
  }
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

// Every key, in canonical order; parse_config_text(emit_config(c)) == c.
inline std::string emit_config(const RunConfig& c) {
  std::string s;
  for (const auto& f : detail::fields()) s += f.doc.key + " = " + f.get(c) + "\n";
  return s;
}

inline Potential build_potential(const RunConfig& c) {
  PotentialOptions o;
  o.delta = c.delta;
  o.shifted = c.shifted;
  return make_potential(c.potential_kind, c.eps, c.omega, o, true);
}

}  // namespace glkpz
