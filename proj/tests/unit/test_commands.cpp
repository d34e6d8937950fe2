#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "sps/commands.hpp"
#include "sps/config.hpp"

using namespace sps;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sps_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

ExperimentConfig small_tomography() {
  ExperimentConfig c = parse_config("{}");
  c.measurement.n_shots = 20000;
  c.tomography.bootstrap = 8;
  c.tomography.wigner_points = 5;
  return c;
}

}  // namespace

TEST(config, empty_object_gives_defaults) {
  const ExperimentConfig c = parse_config("{}");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_DOUBLE_EQ(c.device.f01_max, 5.510e9);
  EXPECT_EQ(c.tomography.route, "state");
  EXPECT_EQ(c.stability.tls.size(), 2u);
}

TEST(config, unknown_keys_name_the_field) {
  EXPECT_NE(config_error(R"({"pulse": {"duraton": 5e-8}})").find("pulse.duraton"), std::string::npos);
  EXPECT_NE(config_error(R"({"bogus": 1})").find("bogus"), std::string::npos);
}

TEST(config, type_and_range_errors) {
  EXPECT_NE(config_error(R"({"pulse": {"dt": "fast"}})").find("pulse.dt"), std::string::npos);
  EXPECT_NE(config_error(R"({"tomography": {"route": "psychic"}})").find("route"), std::string::npos);
  EXPECT_FALSE(config_error(R"({"device": {"anharm": -1}})").empty());
  EXPECT_FALSE(config_error("[1, 2").empty());
}

TEST(config, overrides_are_applied) {
  const ExperimentConfig c = parse_config(R"({"seed": 9, "measurement": {"n_shots": 1234},
      "stability": {"tls": [{"gamma_switch": 1e-4, "chi": 40e3, "flux_point": 1}]}})");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.measurement.n_shots, 1234);
  ASSERT_EQ(c.stability.tls.size(), 1u);
  EXPECT_EQ(c.stability.tls[0].flux_point, 1);
  EXPECT_DOUBLE_EQ(c.stability.tls[0].tls.gamma_switch, 1e-4);
}

TEST(commands, emit_reports_photon_accounting) {
  const fs::path dir = scratch("emit");
  const CommandResult r = cmd_emit(parse_config("{}"), {dir.string(), 1});
  const auto& ph = r.report["photons"];
  EXPECT_NEAR(ph["n_q"].get<double>(), 0.1795, 0.005 * 0.1795);
  EXPECT_NEAR(r.report["pulse"]["rho11_pi"].get<double>(), 0.93, 0.02);
  EXPECT_LT(r.report["suppression"]["exact_db"].get<double>(), -200.0);
  EXPECT_NEAR(r.report["suppression"]["amp_error_db"].get<double>(), -33.5, 0.1);
  EXPECT_TRUE(fs::exists(dir / "report.json"));
  EXPECT_TRUE(fs::exists(dir / "cancelled.csv"));
  EXPECT_EQ(r.report["schema"], "sps report v1");
  fs::remove_all(dir);
}

TEST(commands, tomography_is_reproducible_across_thread_counts) {
  const fs::path a = scratch("tomo_a"), b = scratch("tomo_b");
  const ExperimentConfig c = small_tomography();
  cmd_tomography(c, {a.string(), 1});
  cmd_tomography(c, {b.string(), 3});
  for (const char* f : {"report.json", "moments.csv", "wigner_pi.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(commands, vacuum_tomography_warns) {
  const fs::path dir = scratch("tomo_vac");
  ExperimentConfig c = small_tomography();
  c.tomography.areas = {0.0};
  c.tomography.bootstrap = 50;
  const CommandResult r = cmd_tomography(c, {dir.string(), 1});
  EXPECT_TRUE(r.report["cases"][0]["g2_undefined"].get<bool>());
  EXPECT_EQ(r.exit_code(), kExitWarnings);
  EXPECT_EQ(r.report["cases"][0]["label"], "vacuum");
  fs::remove_all(dir);
}

TEST(commands, stability_smoke_run) {
  const fs::path dir = scratch("stab");
  ExperimentConfig c = parse_config("{}");
  c.stability.slots = 20;
  const CommandResult r = cmd_stability(c, {dir.string(), 1});
  EXPECT_EQ(r.report["slots"], 20);
  EXPECT_TRUE(fs::exists(dir / "timeline.csv"));
  fs::remove_all(dir);
}

TEST(commands, rabi_phase_sum_near_half_pi) {
  const fs::path dir = scratch("rabi");
  const CommandResult r = cmd_rabi(parse_config("{}"), {dir.string(), 1});
  EXPECT_NEAR(r.report["fit"]["theta_sum_over_pi"].get<double>(), 0.5, 0.01);
  EXPECT_TRUE(fs::exists(dir / "rabi.csv"));
  fs::remove_all(dir);
}

TEST(commands, spectroscopy_round_trip) {
  const fs::path dir = scratch("spec");
  ExperimentConfig c = parse_config("{}");
  c.spectroscopy.flux_points = 7;
  const CommandResult r = cmd_spectroscopy(c, {dir.string(), 1});
  EXPECT_EQ(r.report["fitted_points"], 7);
  EXPECT_LT(r.report["budget_identity_max_error"].get<double>(), 1e-12);
  fs::remove_all(dir);
}
