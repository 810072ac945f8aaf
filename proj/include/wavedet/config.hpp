#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wavedet/detector.hpp"
#include "wavedet/signal.hpp"
#include "wavedet/svm.hpp"

namespace wavedet {

struct EvalSettings {
  long n_noise = 100000;
  long n_pulse_per_snr = 1000;
  long corr_observations = 10000;
  double corr_snr_db = 0.0;
  double rates_snr_db = 0.0;
  long rates_pulse = 10000;
  long rates_noise = 100000;
};

struct ExperimentConfig {
  PulseSpec pulse;
  double sigma = 1.0;
  std::vector<int> shifts{0, 11, 23, 37, 53};
  FeatureExtractor features;
  TrainConfig bank_svm{1.0, 4.0, 1e-3, 10000};
  TrainConfig integrator_svm{1.0, 4.0, 1e-3, 10000};
  KernelSpec integrator_kernel = KernelSpec::poly(2, 1.0);
  std::vector<std::vector<int>> integrators{{0, 11, 23}, {0, 11, 23, 37, 53}};
  std::vector<double> snr_grid{0,  -1,  -2,  -3,  -4,  -5,  -6,  -7,
                               -8, -9, -10, -11, -12, -13, -14, -15};
  std::vector<double> pfa_targets{1e-1, 1e-2, 1e-3};
  DatasetCounts counts{{1600, 1600, 0, 1000}, {1600, 1600, 10000, 1000}};
  std::uint64_t seed = 20040601;
  std::string output_dir = "wavedet-out";
  EvalSettings eval;
  unsigned workers = 1;

  /// Checks every nested invariant; throws ConfigurationError.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Applies a `dotted.path=value` override. The value is parsed as JSON when
/// possible and taken as a plain string otherwise.
void apply_override(nlohmann::json& doc, std::string_view assignment);

/// Defaults, then the optional config file, then overrides, then the
/// WAVEDET_SEED environment variable. The result is validated.
ExperimentConfig load_config(const std::optional<std::string>& path,
                             const std::vector<std::string>& overrides,
                             const char* env_seed = nullptr);

}  // namespace wavedet
