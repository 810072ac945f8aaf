#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wavedet/commands.hpp"
#include "wavedet/config.hpp"
#include "wavedet/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-shift wavelet + SVM pulse detector"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  unsigned workers = 0;
  bool force = false;

  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--set", overrides, "Override a config value, e.g. --set svm.bank.c_plus=2")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--workers", workers, "Worker threads (overrides config)");

  auto* gen = app.add_subcommand("gen", "Generate the synthetic dataset");
  auto* train = app.add_subcommand("train", "Train shift detectors and integrators");
  train->add_flag("--force", force, "Overwrite existing bundles");
  auto* eval = app.add_subcommand("eval", "Write curves, correlation, rates and complexity reports");
  auto* corr = app.add_subcommand("corr", "Cross-correlation study of the shift detectors");
  for (auto* sub : {gen, train, eval, corr}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    std::optional<std::string> path;
    if (!config_path.empty()) path = config_path;
    wavedet::ExperimentConfig cfg =
        wavedet::load_config(path, overrides, std::getenv("WAVEDET_SEED"));
    if (workers > 0) cfg.workers = workers;

    if (gen->parsed()) wavedet::cmd_gen(cfg, std::cout);
    else if (train->parsed()) wavedet::cmd_train(cfg, force, std::cout);
    else if (eval->parsed()) wavedet::cmd_eval(cfg, std::cout);
    else if (corr->parsed()) wavedet::cmd_corr(cfg, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "wavedet: " << e.what() << '\n';
    return wavedet::exit_code_for(e);
  }
  return 0;
}
