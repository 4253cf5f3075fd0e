// glkpz <subcommand> --config <path> [--seed S] [--out DIR]

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "glkpz/config.hpp"
#include "glkpz/harness.hpp"

namespace {

std::string keys_footer() {
  std::ostringstream os;
  os << "\nConfig file: one 'key = value' per line, '#' starts a comment.\nKeys (default):\n";
  for (const auto& k : glkpz::config_keys()) os << "  " << k.key << " (" << k.def << ")  " << k.doc << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ginzburg-Landau / KPZ numerical laboratory"};
  app.footer(keys_footer());
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<glkpz::Experiment> chosen;

  for (const auto& [kind, name] : glkpz::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "path to the config file")->required();
    sub->add_option("--seed", seed, "override seeds.base");
    sub->add_option("--out", out, "override output.dir");
    const auto k = kind;
    sub->callback([&chosen, k] { chosen = k; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    glkpz::RunConfig cfg = glkpz::parse_config(config_path);
    cfg.experiment = *chosen;
    if (seed) cfg.seed_base = *seed;
    if (out) cfg.out_dir = *out;
    const auto r = glkpz::run(cfg);
    for (const auto& f : r.failures) std::cerr << "FAIL: " << f << "\n";
    std::cout << glkpz::to_string(cfg.experiment) << ": " << (r.exit_code == 0 ? "passed" : "failed") << ", "
              << r.files.size() << " files in " << cfg.out_dir << "\n";
    return r.exit_code;
  } catch (const glkpz::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
