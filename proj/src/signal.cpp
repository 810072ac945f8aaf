#include "wavedet/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "wavedet/error.hpp"
#include "wavedet/parallel.hpp"

namespace wavedet {

void PulseSpec::validate() const {
  if (n_samples <= 0 || (n_samples & (n_samples - 1)) != 0)
    throw ParameterError("pulse n_samples must be a positive power of two, got " +
                         std::to_string(n_samples));
  if (!(f_start > 0.0 && f_start < f_end && f_end < 0.5))
    throw ParameterError("pulse frequencies must satisfy 0 < f_start < f_end < 0.5");
  if (!std::isfinite(initial_phase))
    throw ParameterError("pulse initial_phase must be finite");
}

void NoiseSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw ParameterError("noise sigma must be positive");
}

std::string_view to_string(WindowLabel label) {
  return label == WindowLabel::pulse ? "pulse" : "noise_only";
}

Eigen::VectorXd generate_chirp(const PulseSpec& spec) {
  spec.validate();
  const double n_total = spec.n_samples;
  const double sweep = spec.f_end - spec.f_start;
  Eigen::VectorXd s(spec.n_samples);
  for (int n = 0; n < spec.n_samples; ++n) {
    const double t = n;
    const double cycles = spec.f_start * t + sweep * t * t / (2.0 * n_total);
    s[n] = std::sin(spec.initial_phase + 2.0 * std::numbers::pi * cycles);
  }
  return s;
}

Eigen::VectorXd generate_awgn(Eigen::Index count, double sigma, Rng& rng) {
  if (count <= 0) throw ParameterError("noise count must be positive");
  if (!(sigma > 0.0)) throw ParameterError("noise sigma must be positive");
  std::normal_distribution<double> gauss(0.0, sigma);
  Eigen::VectorXd out(count);
  for (auto& v : out) v = gauss(rng);
  return out;
}

Eigen::VectorXd generate_awgn(Eigen::Index count, const NoiseSpec& noise) {
  noise.validate();
  Rng rng(noise.seed);
  return generate_awgn(count, noise.sigma, rng);
}

double snr_amplitude(double snr_db, const Eigen::Ref<const Eigen::VectorXd>& pulse,
                     double sigma) {
  if (pulse.size() == 0) throw DegenerateInputError("empty pulse");
  const double meansq = pulse.squaredNorm() / static_cast<double>(pulse.size());
  if (!(meansq > 0.0)) throw DegenerateInputError("pulse has zero power");
  if (!(sigma > 0.0)) throw ParameterError("noise sigma must be positive");
  if (std::isnan(snr_db)) throw ParameterError("snr_db is NaN");
  if (snr_db == -std::numeric_limits<double>::infinity()) return 0.0;
  return sigma * std::sqrt(std::pow(10.0, snr_db / 10.0) / meansq);
}

WindowObservation assemble_window(const Eigen::Ref<const Eigen::VectorXd>& pulse,
                                  const WindowSpec& spec, const NoiseSpec& noise,
                                  Rng& rng) {
  noise.validate();
  const int h = spec.window_len;
  if (h != pulse.size())
    throw ParameterError("window_len must equal the pulse length");
  if (spec.shift < 0 || spec.shift >= h)
    throw ParameterError("shift must lie in [0, window_len), got " +
                         std::to_string(spec.shift));
  WindowObservation obs{generate_awgn(h, noise.sigma, rng), spec};
  if (spec.label == WindowLabel::pulse) {
    const double amp = snr_amplitude(spec.snr_db, pulse, noise.sigma);
    obs.samples.tail(h - spec.shift) += amp * pulse.head(h - spec.shift);
  }
  return obs;
}

Eigen::VectorXd make_trial_segment(const Eigen::Ref<const Eigen::VectorXd>& pulse,
                                   double amplitude, int max_shift, double sigma,
                                   Rng& rng) {
  if (max_shift < 0 || max_shift >= pulse.size())
    throw ParameterError("max shift must lie in [0, window_len)");
  Eigen::VectorXd seg = generate_awgn(pulse.size() + max_shift, sigma, rng);
  if (amplitude != 0.0) seg.tail(pulse.size()) += amplitude * pulse;
  return seg;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Partition partition) {
  switch (partition) {
    case Partition::bank: return "bank";
    case Partition::integrator: return "integrator";
    case Partition::calibration: return "calibration";
    case Partition::test: return "test";
  }
  return "?";
}

Partition partition_from_string(std::string_view name) {
  for (Partition p : kAllPartitions)
    if (to_string(p) == name) return p;
  throw DataError("unknown partition '" + std::string(name) + "'");
}

long PartitionCounts::of(Partition p) const noexcept {
  switch (p) {
    case Partition::bank: return bank;
    case Partition::integrator: return integrator;
    case Partition::calibration: return calibration;
    case Partition::test: return test;
  }
  return 0;
}

int Dataset::max_shift() const noexcept {
  return shifts.empty() ? 0 : *std::max_element(shifts.begin(), shifts.end());
}

std::size_t Dataset::shift_index(int shift) const {
  auto it = std::find(shifts.begin(), shifts.end(), shift);
  if (it == shifts.end())
    throw ParameterError("shift " + std::to_string(shift) + " not present in dataset");
  return static_cast<std::size_t>(it - shifts.begin());
}

Eigen::Map<const Eigen::VectorXd> Dataset::window(std::size_t trial, int shift) const {
  shift_index(shift);
  if (trial >= trials.size()) throw ParameterError("trial index out of range");
  const double* row = segments.data() + trial * segments.cols();
  return {row + window_offset(max_shift(), shift), window_len()};
}

WindowObservation Dataset::observation(std::size_t trial, int shift) const {
  const TrialInfo& info = trials.at(trial);
  return {window(trial, shift),
          WindowSpec{window_len(), shift, info.snr_db, info.label}};
}

std::vector<std::size_t> Dataset::select(WindowLabel label, Partition partition) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trials.size(); ++i)
    if (trials[i].label == label && trials[i].partition == partition) out.push_back(i);
  return out;
}

Dataset build_dataset(const PulseSpec& pulse, double sigma,
                      std::span<const int> shifts, std::span<const double> snr_grid,
                      const DatasetCounts& counts, std::uint64_t seed,
                      unsigned workers) {
  pulse.validate();
  NoiseSpec{sigma, seed}.validate();
  if (shifts.empty()) throw ParameterError("shift list is empty");
  for (int d : shifts)
    if (d < 0 || d >= pulse.n_samples)
      throw ParameterError("shift " + std::to_string(d) + " outside [0, window_len)");
  for (Partition p : kAllPartitions)
    if (counts.pulse.of(p) < 0 || counts.noise.of(p) < 0)
      throw ParameterError("dataset counts must be non-negative");
  if (counts.total() <= 0) throw ParameterError("dataset counts are all zero");
  if (counts.pulse.total() > 0 && snr_grid.empty())
    throw ParameterError("pulse trials requested with an empty SNR grid");

  Dataset ds;
  ds.pulse = pulse;
  ds.sigma = sigma;
  ds.shifts.assign(shifts.begin(), shifts.end());
  ds.snr_grid.assign(snr_grid.begin(), snr_grid.end());
  ds.seed = seed;

  for (WindowLabel label : {WindowLabel::pulse, WindowLabel::noise_only}) {
    const PartitionCounts& pc = label == WindowLabel::pulse ? counts.pulse : counts.noise;
    for (Partition p : kAllPartitions)
      for (long k = 0; k < pc.of(p); ++k) ds.trials.push_back({label, p, 0.0});
  }

  const Eigen::VectorXd chirp = generate_chirp(pulse);
  const int max_shift = ds.max_shift();
  ds.segments.resize(static_cast<Eigen::Index>(ds.trials.size()),
                     pulse.n_samples + max_shift);

  parallel_for(ds.trials.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::substream(seed, stream::kDatasetTrial, i);
      TrialInfo& info = ds.trials[i];
      double amp = 0.0;
      if (info.label == WindowLabel::pulse) {
        const auto pick = static_cast<std::size_t>(rng.uniform() * snr_grid.size());
        info.snr_db = snr_grid[std::min(pick, snr_grid.size() - 1)];
        amp = snr_amplitude(info.snr_db, chirp, sigma);
      }
      ds.segments.row(static_cast<Eigen::Index>(i)) =
          make_trial_segment(chirp, amp, max_shift, sigma, rng).transpose();
    }
  });
  return ds;
}

void assert_disjoint(std::span<const std::vector<std::size_t>> partitions) {
  std::vector<std::size_t> all;
  for (const auto& p : partitions) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  auto dup = std::adjacent_find(all.begin(), all.end());
  if (dup != all.end())
    throw ConfigurationError("observation " + std::to_string(*dup) +
                             " appears in more than one partition");
}

}  // namespace wavedet
