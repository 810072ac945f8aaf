#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wavedet/commands.hpp"
#include "wavedet/config.hpp"
#include "wavedet/error.hpp"
#include "wavedet/io.hpp"

using namespace wavedet;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("wavedet_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

// Runs the CLI inside `dir`; returns the exit status.
int run(const fs::path& dir, const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" WAVEDET_CLI "' " + args +
                          " > out.log 2> err.log";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Desk-sized experiment: a few hundred trials per partition.
void write_small_config(const fs::path& dir, const json& extra = json::object()) {
  json j = {
      {"counts",
       {{"pulse", {{"bank", 200}, {"integrator", 200}, {"calibration", 0}, {"test", 50}}},
        {"noise", {{"bank", 200}, {"integrator", 200}, {"calibration", 1000}, {"test", 50}}}}},
      {"pfa_targets", {0.1, 0.01}},
      {"eval",
       {{"n_noise", 1000}, {"n_pulse_per_snr", 20}, {"corr_observations", 300},
        {"rates_pulse", 100}, {"rates_noise", 300}}},
      {"output_dir", "out"}};
  j.merge_patch(extra);
  std::ofstream(dir / "small.json") << j.dump(1);
}

std::vector<std::string> csv_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream is(slurp(p));
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("config defaults and round trip") {
  const ExperimentConfig d;
  CHECK(d.shifts == std::vector<int>{0, 11, 23, 37, 53});
  CHECK(d.pulse.n_samples == 1024);
  CHECK(d.features.wavelet.order == 5);
  CHECK(d.features.scale == 4);
  CHECK(d.bank_svm.c_minus == 4.0 * d.bank_svm.c_plus);
  CHECK(d.integrator_kernel.kind == KernelKind::poly);
  CHECK(d.integrator_kernel.degree == 2);
  CHECK(d.snr_grid.size() == 16);
  CHECK_NOTHROW(d.validate());

  const ExperimentConfig r = config_from_json(to_json(d));
  CHECK(to_json(r) == to_json(d));
}

TEST_CASE("config overrides and rejection") {
  json doc = json::object();
  apply_override(doc, "svm.bank.c_plus=2.5");
  apply_override(doc, "shifts=[0,7]");
  apply_override(doc, "integrators=[[0,7]]");
  apply_override(doc, "output_dir=elsewhere");
  const ExperimentConfig c = config_from_json(doc);
  CHECK(c.bank_svm.c_plus == 2.5);
  CHECK(c.bank_svm.c_minus == 4.0);
  CHECK(c.shifts == std::vector<int>{0, 7});
  CHECK(c.output_dir == "elsewhere");

  CHECK_THROWS_AS(apply_override(doc, "novalue"), ConfigurationError);
  json bad = json::object();
  apply_override(bad, "svm.bank.c_pluss=1");
  CHECK_THROWS_AS(config_from_json(bad), ConfigurationError);

  CHECK_THROWS_AS(load_config(std::nullopt, {"shifts=[3,11]"}), ConfigurationError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"pfa_targets=[0]"}), ConfigurationError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"counts.pulse.bank=0", "counts.pulse.integrator=0",
                                             "counts.pulse.test=0", "counts.noise.bank=0",
                                             "counts.noise.integrator=0", "counts.noise.calibration=0",
                                             "counts.noise.test=0"}),
                  ConfigurationError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"wavelet.order=11"}), ConfigurationError);
  CHECK_THROWS_AS(load_config(std::nullopt, {"pulse.n_samples=1000"}), ConfigurationError);
  CHECK(load_config(std::nullopt, {}, "77").seed == 77);
  CHECK_THROWS_AS(load_config(std::nullopt, {}, "7x"), ConfigurationError);
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(ConfigurationError("x")) == 2);
  CHECK(exit_code_for(DataError("x")) == 3);
  CHECK(exit_code_for(CalibrationError("x")) == 3);
  CHECK(exit_code_for(InvariantError("x")) == 4);
}

TEST_CASE("invalid config fails before writing anything") {
  TempDir tmp("failfast");
  write_small_config(tmp.path, {{"wavelet", {{"levels", 3}}}});
  CHECK(run(tmp.path, "--config small.json gen") == 2);
  CHECK_FALSE(fs::exists(tmp.path / "out"));
  CHECK(run(tmp.path, "--config missing.json gen") == 2);
  CHECK(run(tmp.path, "--config small.json --set bogus=1 gen") == 2);
  CHECK(slurp(tmp.path / "err.log").find("bogus") != std::string::npos);
  write_small_config(tmp.path);
  CHECK(run(tmp.path, "--config small.json --set output_dir=/proc/wavedet gen") == 3);
  CHECK(run(tmp.path, "--config small.json train") == 3);  // no dataset yet
  CHECK(run(tmp.path, "frobnicate") == 2);
}

TEST_CASE("gen is deterministic and honours WAVEDET_SEED") {
  TempDir tmp("gen");
  write_small_config(tmp.path);
  REQUIRE(run(tmp.path, "--config small.json gen") == 0);
  const std::string bin = slurp(tmp.path / "out/dataset.bin");
  const std::string side = slurp(tmp.path / "out/dataset.json");
  CHECK(slurp(tmp.path / "out.log").find("calibration") != std::string::npos);
  REQUIRE(run(tmp.path, "--config small.json --workers 2 gen") == 0);
  CHECK(slurp(tmp.path / "out/dataset.bin") == bin);
  CHECK(slurp(tmp.path / "out/dataset.json") == side);

  REQUIRE(run(tmp.path, "--config small.json gen", "WAVEDET_SEED=99") == 0);
  CHECK(json::parse(slurp(tmp.path / "out/dataset.json"))["seed"] == 99);
  CHECK(slurp(tmp.path / "out/dataset.bin") != bin);
}

TEST_CASE("full pipeline through the CLI") {
  TempDir tmp("full");
  write_small_config(tmp.path);
  REQUIRE(run(tmp.path, "--config small.json gen") == 0);
  REQUIRE(run(tmp.path, "--config small.json train") == 0);

  const fs::path three = tmp.path / "out/pipeline/integrated_0_11_23";
  const fs::path five = tmp.path / "out/pipeline/integrated_0_11_23_37_53";
  CHECK(fs::exists(three / "manifest.json"));
  for (int d : {0, 11, 23, 37, 53})
    CHECK(fs::exists(five / ("bank_shift_" + std::to_string(d) + ".json")));
  const json th = json::parse(slurp(five / "thresholds.json"));
  CHECK(th["calibration"].size() == 2);
  CHECK(th["active"] == th["calibration"][1]["threshold"]);  // strictest target

  const std::string model = slurp(five / "integrator_0_11_23_37_53.json");
  CHECK(run(tmp.path, "--config small.json train") == 3);
  REQUIRE(run(tmp.path, "--config small.json train --force") == 0);
  CHECK(slurp(five / "integrator_0_11_23_37_53.json") == model);

  REQUIRE(run(tmp.path, "--config small.json eval") == 0);
  const auto curves = csv_lines(tmp.path / "out/report/curves.csv");
  REQUIRE(curves.size() == 1 + 7 * 2);
  CHECK(curves[0] == "scheme,pfa_target,neg_log10_pfa,mean_pd,n_noise,n_pulse_per_snr,seed");
  const auto corr = csv_lines(tmp.path / "out/report/corr.csv");
  REQUIRE(corr.size() == 6);
  CHECK(corr[0] == "0-shift,11-shift,23-shift,37-shift,53-shift");
  CHECK(corr[1].rfind("1.00000000,", 0) == 0);
  CHECK(corr[5].substr(corr[5].size() - 10) == "1.00000000");
  const json rates = json::parse(slurp(tmp.path / "out/report/rates.json"));
  CHECK(rates["schema"] == "wavedet-rates/1");
  CHECK(rates["estimates"].size() == 2);
  CHECK(slurp(tmp.path / "out/report/complexity.txt").find("19200") != std::string::npos);

  const std::string curves_text = slurp(tmp.path / "out/report/curves.csv");
  REQUIRE(run(tmp.path, "--config small.json eval") == 0);
  CHECK(slurp(tmp.path / "out/report/curves.csv") == curves_text);

  fs::remove(tmp.path / "out/report/corr.csv");
  REQUIRE(run(tmp.path, "--config small.json corr") == 0);
  CHECK(csv_lines(tmp.path / "out/report/corr.csv") == corr);
}

TEST_CASE("unit P_fa target detects everything") {
  TempDir tmp("unit");
  write_small_config(tmp.path, {{"pfa_targets", {1.0}}});
  REQUIRE(run(tmp.path, "--config small.json gen") == 0);
  REQUIRE(run(tmp.path, "--config small.json train") == 0);
  REQUIRE(run(tmp.path, "--config small.json eval") == 0);
  const auto curves = csv_lines(tmp.path / "out/report/curves.csv");
  REQUIRE(curves.size() == 8);
  for (std::size_t i = 1; i < curves.size(); ++i) {
    CAPTURE(curves[i]);
    CHECK(curves[i].find(",1,0,1,") != std::string::npos);
  }
}

TEST_CASE("single-shift configuration") {
  TempDir tmp("solo");
  write_small_config(tmp.path);
  const std::string set = "--config small.json --set shifts=[0] --set integrators=[[0]] ";
  REQUIRE(run(tmp.path, set + "gen") == 0);
  REQUIRE(run(tmp.path, set + "train") == 0);
  const fs::path bundle = tmp.path / "out/pipeline/integrated_0";
  CHECK(fs::exists(bundle / "bank_shift_0.json"));
  CHECK(json::parse(slurp(bundle / "manifest.json"))["shifts"] == json({0}));
  REQUIRE(run(tmp.path, set + "eval") == 0);
  CHECK(csv_lines(tmp.path / "out/report/corr.csv").size() == 2);
}
