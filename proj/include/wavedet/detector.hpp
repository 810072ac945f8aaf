#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "wavedet/signal.hpp"
#include "wavedet/svm.hpp"
#include "wavedet/wavelet.hpp"

namespace wavedet {

/// Per-dimension affine standardization x -> (x - mean) / scale.
struct FeatureNorm {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Column statistics of `rows`; zero-variance columns keep scale 1.
  static FeatureNorm fit(const Eigen::Ref<const RowMatrix>& rows);

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  RowMatrix apply_rows(const Eigen::Ref<const RowMatrix>& rows) const;
  Eigen::Index dim() const noexcept { return mean.size(); }
};

/// Wavelet front end: the d_k band of a periodic Daubechies DWT.
struct FeatureExtractor {
  WaveletConfig wavelet;
  int scale = 4;

  void validate(Eigen::Index window_len) const;
  Eigen::Index feature_dim(Eigen::Index window_len) const noexcept {
    return window_len >> scale;
  }
};

/// Raw (unstandardized) d_k coefficients of `window`.
Eigen::VectorXd extract_features(const Eigen::Ref<const Eigen::VectorXd>& window,
                                 const FeatureExtractor& fx);

/// Variant reusing prebuilt filters; adds the DWT multiply-adds to `ops`.
Eigen::VectorXd extract_features(const Eigen::Ref<const Eigen::VectorXd>& window,
                                 const FilterPair<double>& filters, int levels, int scale,
                                 std::uint64_t* ops = nullptr);

/// M linear detectors, one per time shift.
struct ShiftBank {
  std::vector<int> shifts;
  std::vector<SvmModel> models;
  std::vector<FeatureNorm> feature_norm;
  FeatureExtractor extractor;
  std::vector<std::size_t> trained_on;  // dataset trial indices, ascending

  std::size_t size() const noexcept { return shifts.size(); }
  int max_shift() const noexcept { return shifts.empty() ? 0 : shifts.back(); }

  /// Bank restricted to `subset` (which must be drawn from `shifts`).
  ShiftBank subset(std::span<const int> subset) const;

  void validate() const;
};

/// Trains one linear SVM per shift on standardized d_k features of the bank
/// partition: pulse windows at that shift against the shared noise pool.
ShiftBank train_bank(const Dataset& dataset, std::span<const int> shifts,
                     const TrainConfig& svm_cfg, const FeatureExtractor& fx,
                     std::uint64_t seed = 0, unsigned workers = 1);

/// Decision value of each detector on its standardized features.
Eigen::VectorXd bank_margins_from_features(const ShiftBank& bank,
                                           std::span<const Eigen::VectorXd> features);

/// Smooth outputs for a group of M aligned windows (group[i] at shifts[i]).
Eigen::VectorXd bank_margins(const ShiftBank& bank,
                             std::span<const Eigen::VectorXd> window_group);

struct IntegrationPipeline {
  ShiftBank bank;
  SvmModel integrator;
  FeatureNorm score_norm;
  double threshold = 0.0;
  /// (target P_fa, threshold) pairs from calibrate_threshold, in call order.
  std::vector<std::pair<double, double>> calibration;

  std::size_t inputs() const noexcept { return bank.size(); }

  void validate() const;

  double score_margins(const Eigen::Ref<const Eigen::VectorXd>& margins) const;
};

/// Fusion SVM over standardized bank margins of the integrator partition.
/// Throws ConfigurationError if those trials overlap the bank's training set.
IntegrationPipeline train_integrator(const ShiftBank& bank, const Dataset& dataset,
                                     std::span<const std::size_t> integrator_trials,
                                     const KernelSpec& kernel, const TrainConfig& svm_cfg,
                                     std::uint64_t seed = 0, unsigned workers = 1);

/// Smallest order statistic t (or -inf) with fraction(scores > t) <= target.
double threshold_for_pfa(std::span<const double> scores, double target_pfa);

/// Same threshold as threshold_for_pfa, assuming `sorted` ascending.
double threshold_for_pfa_sorted(std::span<const double> sorted, double target_pfa);

/// Minimum noise-sample count accepted by calibrate_threshold.
long required_calibration_count(double target_pfa);

/// Sets pipeline.threshold from noise-only scores. Needs at least
/// ceil(10 / target_pfa) scores.
double calibrate_threshold(IntegrationPipeline& pipeline, std::span<const double> noise_scores,
                           double target_pfa);

struct DetectionResult {
  double score = 0.0;
  bool detected = false;
  Eigen::VectorXd per_shift_margins;
};

DetectionResult detect(const IntegrationPipeline& pipeline,
                       std::span<const Eigen::VectorXd> window_group);

struct ScanHit {
  Eigen::Index position = 0;  // hypothesised pulse start in the stream
  DetectionResult result;
};

/// Slides over `stream` in steps of `step`. At position p the group holds the
/// windows starting at p - shifts[i], so p is where a pulse would begin.
/// Every DWT is computed once per window start.
std::vector<ScanHit> sliding_scan(const IntegrationPipeline& pipeline,
                                  const Eigen::Ref<const Eigen::VectorXd>& stream,
                                  Eigen::Index step = 1);

/// Per-trial d_k features for the requested shifts: result[t][m] is the
/// feature vector of trials[t] at shifts[m].
std::vector<std::vector<Eigen::VectorXd>> dataset_features(
    const Dataset& dataset, std::span<const std::size_t> trials, std::span<const int> shifts,
    const FeatureExtractor& fx, unsigned workers = 1);

}  // namespace wavedet
