#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wavedet/detector.hpp"
#include "wavedet/eval.hpp"
#include "wavedet/signal.hpp"
#include "wavedet/svm.hpp"

namespace wavedet::io {

namespace fs = std::filesystem;

inline constexpr const char* kDatasetSchema = "wavedet-dataset/1";
inline constexpr const char* kSvmSchema = "wavedet-svm/1";
inline constexpr const char* kPipelineSchema = "wavedet-pipeline/1";
inline constexpr const char* kRatesSchema = "wavedet-rates/1";

nlohmann::json to_json(const PulseSpec& spec);
PulseSpec pulse_from_json(const nlohmann::json& j);

/// Writes `<base>.bin` (float64 little-endian, one trial segment per row)
/// and the `<base>.json` sidecar.
void write_dataset(const Dataset& ds, const fs::path& base);
Dataset read_dataset(const fs::path& base);

nlohmann::json model_to_json(const SvmModel& model);
SvmModel model_from_json(const nlohmann::json& j);
void save_model(const SvmModel& model, const fs::path& path);
SvmModel load_model(const fs::path& path);

nlohmann::json norm_to_json(const FeatureNorm& norm);
FeatureNorm norm_from_json(const nlohmann::json& j);

/// Provenance recorded in a pipeline manifest.
struct BundleInfo {
  std::uint64_t dataset_seed = 0;
  std::uint64_t train_seed = 0;
  std::string dataset_path;
};

/// Bundle directory: one model file per bank shift, the integrator model,
/// normalization.json, thresholds.json and manifest.json.
void save_pipeline(const IntegrationPipeline& pipe, const fs::path& dir, const BundleInfo& info);
IntegrationPipeline load_pipeline(const fs::path& dir);
nlohmann::json read_manifest(const fs::path& dir);

void write_curves_csv(const PerformanceCurve& curve, const fs::path& path);
void write_correlation_csv(const CorrelationMatrix& corr, const fs::path& path);
nlohmann::json rates_to_json(const RatesEstimate& r);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace wavedet::io
