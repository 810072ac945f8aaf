#pragma once

#include <filesystem>
#include <ostream>

#include "wavedet/config.hpp"

namespace wavedet {

/// Output locations derived from ExperimentConfig::output_dir.
struct OutputLayout {
  std::filesystem::path root;

  std::filesystem::path dataset_base() const { return root / "dataset"; }
  std::filesystem::path pipelines() const { return root / "pipeline"; }
  std::filesystem::path bundle(std::span<const int> inputs) const;
  std::filesystem::path reports() const { return root / "report"; }
};

// Each command validates the configuration before touching the filesystem
// and reports failures through the wavedet::Error hierarchy.
void cmd_gen(const ExperimentConfig& cfg, std::ostream& log);
void cmd_train(const ExperimentConfig& cfg, bool force, std::ostream& log);
void cmd_eval(const ExperimentConfig& cfg, std::ostream& log);
void cmd_corr(const ExperimentConfig& cfg, std::ostream& log);

/// Exit code for an exception escaping a command: 2 config, 3 data,
/// 4 invariant, 1 anything else.
int exit_code_for(const std::exception& e) noexcept;

}  // namespace wavedet
