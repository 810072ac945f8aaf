#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "wavedet/rng.hpp"

namespace wavedet {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Linear chirp of unit amplitude. Frequencies are in cycles/sample.
struct PulseSpec {
  int n_samples = 1024;
  double f_start = 0.02;
  double f_end = 0.12;
  double initial_phase = 0.0;

  void validate() const;
};

struct NoiseSpec {
  double sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class WindowLabel : std::uint8_t { pulse, noise_only };

std::string_view to_string(WindowLabel label);

/// Geometry of one processing window: `shift` leading noise samples, then the
/// first window_len - shift samples of the pulse.
struct WindowSpec {
  int window_len = 1024;
  int shift = 0;
  double snr_db = 0.0;
  WindowLabel label = WindowLabel::pulse;
};

struct WindowObservation {
  Eigen::VectorXd samples;
  WindowSpec spec;
};

Eigen::VectorXd generate_chirp(const PulseSpec& spec);

/// i.i.d. N(0, sigma^2) samples drawn from `rng`.
Eigen::VectorXd generate_awgn(Eigen::Index count, double sigma, Rng& rng);

/// Seeded variant; the same NoiseSpec always yields the same sequence.
Eigen::VectorXd generate_awgn(Eigen::Index count, const NoiseSpec& noise);

/// Amplitude A with 10 log10(A^2 meansq(pulse) / sigma^2) == snr_db.
double snr_amplitude(double snr_db, const Eigen::Ref<const Eigen::VectorXd>& pulse,
                     double sigma);

WindowObservation assemble_window(const Eigen::Ref<const Eigen::VectorXd>& pulse,
                                  const WindowSpec& spec, const NoiseSpec& noise,
                                  Rng& rng);

/// A stream segment of window_len + max_shift samples. Noise everywhere, plus
/// amplitude * pulse starting at offset max_shift. The window for shift D is
/// segment[max_shift - D, max_shift - D + window_len), which reproduces the
/// assemble_window geometry for every D while sharing one noise realization.
Eigen::VectorXd make_trial_segment(const Eigen::Ref<const Eigen::VectorXd>& pulse,
                                   double amplitude, int max_shift, double sigma,
                                   Rng& rng);

/// Offset of the shift-D window inside a trial segment.
constexpr Eigen::Index window_offset(int max_shift, int shift) noexcept {
  return static_cast<Eigen::Index>(max_shift - shift);
}

// ---------------------------------------------------------------------------
// Datasets

enum class Partition : std::uint8_t { bank, integrator, calibration, test };

inline constexpr Partition kAllPartitions[] = {
    Partition::bank, Partition::integrator, Partition::calibration,
    Partition::test};

std::string_view to_string(Partition partition);
Partition partition_from_string(std::string_view name);

struct PartitionCounts {
  long bank = 0;
  long integrator = 0;
  long calibration = 0;
  long test = 0;

  long of(Partition p) const noexcept;
  long total() const noexcept { return bank + integrator + calibration + test; }
};

struct DatasetCounts {
  PartitionCounts pulse;
  PartitionCounts noise;

  long total() const noexcept { return pulse.total() + noise.total(); }
};

struct TrialInfo {
  WindowLabel label = WindowLabel::noise_only;
  Partition partition = Partition::bank;
  double snr_db = 0.0;  // meaningful for pulse trials only
};

/// Trials laid out row-major: one trial segment per row. Every trial yields
/// one aligned window per shift.
struct Dataset {
  PulseSpec pulse;
  double sigma = 1.0;
  std::vector<int> shifts;
  std::vector<double> snr_grid;
  std::uint64_t seed = 0;
  RowMatrix segments;
  std::vector<TrialInfo> trials;

  int window_len() const noexcept { return pulse.n_samples; }
  int max_shift() const noexcept;
  Eigen::Index size() const noexcept { return segments.rows(); }

  /// Position of `shift` in `shifts`; throws ParameterError if absent.
  std::size_t shift_index(int shift) const;

  /// Window of trial `trial` at shift `shift` (a view into `segments`).
  Eigen::Map<const Eigen::VectorXd> window(std::size_t trial, int shift) const;

  WindowObservation observation(std::size_t trial, int shift) const;

  /// Trial indices with the given label and partition, ascending.
  std::vector<std::size_t> select(WindowLabel label, Partition partition) const;
};

/// Deterministic dataset build. Pulse trials draw their SNR uniformly from
/// `snr_grid`. Trial i is generated from Rng::substream(seed, ·, i) alone, so
/// the result does not depend on `workers`.
Dataset build_dataset(const PulseSpec& pulse, double sigma,
                      std::span<const int> shifts, std::span<const double> snr_grid,
                      const DatasetCounts& counts, std::uint64_t seed,
                      unsigned workers = 1);

/// Throws ConfigurationError if any trial index appears in more than one of
/// the given partition lists.
void assert_disjoint(std::span<const std::vector<std::size_t>> partitions);

}  // namespace wavedet
