#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wavedet/detector.hpp"

namespace wavedet {

struct Interval {
  double lower = 0.0;
  double upper = 1.0;

  bool contains(double v) const noexcept { return v >= lower && v <= upper; }
};

/// Exact two-sided binomial interval for `successes` out of `trials`.
Interval clopper_pearson(long successes, long trials, double level = 0.95);

struct RatesEstimate {
  double p_d = 0.0;
  double p_fa = 0.0;
  long trials_pulse = 0;
  long trials_noise = 0;
  long detections = 0;
  long false_alarms = 0;
  double snr_db = 0.0;
  double threshold = 0.0;
  Interval ci_pd;
  Interval ci_pfa;
};

/// Fresh pulse groups at `snr_db` and noise-only groups, run through detect().
RatesEstimate estimate_rates(const IntegrationPipeline& pipeline, const PulseSpec& pulse,
                             double sigma, double snr_db, long n_pulse, long n_noise,
                             std::uint64_t seed, unsigned workers = 1);

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd entries;

  /// Symmetric, unit diagonal, entries in [-1, 1], positive semidefinite.
  void check_invariants() const;

  /// Largest off-diagonal entry as (row, col) with row < col.
  std::pair<Eigen::Index, Eigen::Index> max_off_diagonal() const;
};

/// Pearson correlation of each column pair of an n x M table.
CorrelationMatrix correlation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& table,
                                     std::vector<std::string> labels);

/// Bank margins of `count` pulse groups at `snr_db`, one row per group.
Eigen::MatrixXd pulse_margin_table(const ShiftBank& bank, const PulseSpec& pulse, double sigma,
                                   double snr_db, long count, std::uint64_t seed,
                                   unsigned workers = 1);

std::string shift_label(int shift);

/// Scores of every scheme on one frozen Monte Carlo sample: each individual
/// shift detector plus each integration pipeline.
struct FrozenScores {
  std::vector<std::string> schemes;
  std::vector<double> snr_grid;
  std::vector<std::vector<double>> noise;               // [scheme][trial], ascending
  std::vector<std::vector<std::vector<double>>> pulse;  // [scheme][snr][trial]
  long n_noise = 0;
  long n_pulse_per_snr = 0;
  std::uint64_t seed = 0;

  std::size_t scheme_index(const std::string& name) const;

  /// Unweighted mean over the SNR grid of P(pulse score > threshold).
  double mean_pd(std::size_t scheme, double threshold) const;

  /// Fraction of noise scores above `threshold`.
  double pfa(std::size_t scheme, double threshold) const;

  /// Smallest empirical P_fa at which `scheme` still reaches `goal` mean P_d.
  double pfa_at_mean_pd(std::size_t scheme, double goal) const;
};

std::string integrator_label(std::span<const int> shifts);

FrozenScores freeze_scores(const ShiftBank& bank,
                           std::span<const IntegrationPipeline> integrators,
                           const PulseSpec& pulse, double sigma,
                           std::span<const double> snr_grid, long n_noise,
                           long n_pulse_per_snr, std::uint64_t seed, unsigned workers = 1);

struct CurvePoint {
  std::string scheme;
  double pfa_target = 0.0;
  double neg_log10_pfa = 0.0;
  double threshold = 0.0;
  double mean_pd = 0.0;
};

struct PerformanceCurve {
  std::vector<CurvePoint> points;
  std::vector<double> snr_grid;
  long n_noise = 0;
  long n_pulse_per_snr = 0;
  std::uint64_t seed = 0;

  /// mean_pd non-increasing in neg_log10_pfa within each scheme.
  void check_monotone() const;

  double mean_pd(const std::string& scheme, double pfa_target) const;
};

/// Re-thresholds the frozen scores at each target P_fa.
PerformanceCurve curve_from_scores(const FrozenScores& scores,
                                   std::span<const double> pfa_targets);

PerformanceCurve performance_curve(const ShiftBank& bank,
                                   std::span<const IntegrationPipeline> integrators,
                                   const PulseSpec& pulse, double sigma,
                                   std::span<const double> snr_grid,
                                   std::span<const double> pfa_targets, long n_noise,
                                   long n_pulse_per_snr, std::uint64_t seed,
                                   unsigned workers = 1);

struct WaveletCountRow {
  Eigen::Index length = 0;
  std::uint64_t measured = 0;
  std::uint64_t closed_form = 0;
  double per_sample = 0.0;
};

/// Multiply-add accounting for one detection group of the pipeline.
struct ComplexityReport {
  int filter_width = 0;
  int levels = 0;
  std::vector<WaveletCountRow> wavelet_rows;
  Eigen::Index window_len = 0;
  std::size_t bank_size = 0;
  Eigen::Index feature_dim = 0;
  std::uint64_t wavelet_per_window = 0;
  std::uint64_t wavelet_per_group = 0;     // M windows through the DWT
  std::uint64_t bank_per_group = 0;        // M * S
  Eigen::Index integrator_support = 0;
  std::uint64_t integrator_per_group = 0;  // support vectors * M
  std::uint64_t integrator_quadratic = 0;  // M^2 + M, explicit quadratic form

  /// wavelet_per_group / (bank_per_group + integrator_per_group).
  double dominance() const;
  /// One fresh DWT per step when a sliding scan reuses windows.
  double sliding_dominance() const;
  bool wavelet_constant_per_sample(double tol = 1e-12) const;

  std::string to_text() const;
};

ComplexityReport complexity_report(const WaveletConfig& wavelet,
                                   std::span<const Eigen::Index> lengths,
                                   const IntegrationPipeline& pipeline);

}  // namespace wavedet
