#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "sps/commands.hpp"
#include "sps/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Single-photon source simulator: emission, tomography, spectroscopy, stability, Rabi"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  long shots = 0;
  sps::RunOptions run;
  app.add_option("--config", config_path, "JSON experiment configuration");
  auto* seed_opt = app.add_option("--seed", seed, "global seed (overrides the config)");
  auto* shots_opt = app.add_option("--shots", shots, "shots per tomography case")->check(CLI::PositiveNumber);
  app.add_option("--out", run.out_dir, "output directory")->capture_default_str();
  app.add_option("--parallel", run.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  using Command = std::function<sps::CommandResult(const sps::ExperimentConfig&, const sps::RunOptions&)>;
  const std::map<std::string, std::pair<Command, std::string>> commands{
      {"emit", {sps::cmd_emit, "pi pulse, cancellation and photon accounting"}},
      {"tomography", {sps::cmd_tomography, "field moments, g2, maximum likelihood state, Wigner grid"}},
      {"spectroscopy", {sps::cmd_spectroscopy, "reflection sweep with mismatch fit and compensation"}},
      {"stability", {sps::cmd_stability, "interleaved decay timeline"}},
      {"rabi", {sps::cmd_rabi, "Rabi sweep with joint I/P fit"}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.second)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sps::kExitConfig;
  }

  sps::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = sps::load_config(config_path);
    if (*seed_opt) cfg.seed = seed;
    cfg.measurement.seed = cfg.seed;
    if (*shots_opt) cfg.measurement.n_shots = shots;
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sps::kExitConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const sps::CommandResult result = commands.at(name).first(cfg, run);
    for (const auto& f : result.files) std::cout << f << "\n";
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return result.exit_code();
  } catch (const std::exception& e) {
    std::cerr << name << ": " << e.what() << "\n";
    return 1;
  }
}
