#include "wavedet/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "wavedet/error.hpp"
#include "wavedet/parallel.hpp"

namespace wavedet {

FeatureNorm FeatureNorm::fit(const Eigen::Ref<const RowMatrix>& rows) {
  if (rows.rows() < 1) throw ParameterError("cannot fit a normalization on zero rows");
  FeatureNorm norm;
  norm.mean = rows.colwise().mean().transpose();
  const RowMatrix centered = rows.rowwise() - norm.mean.transpose();
  const double denom = std::max<double>(1.0, static_cast<double>(rows.rows() - 1));
  norm.scale = (centered.colwise().squaredNorm().transpose() / denom).cwiseSqrt();
  for (auto& s : norm.scale)
    if (!(s > 0.0)) s = 1.0;
  return norm;
}

Eigen::VectorXd FeatureNorm::apply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != dim()) throw ParameterError("normalization dimension mismatch");
  return (x - mean).cwiseQuotient(scale);
}

RowMatrix FeatureNorm::apply_rows(const Eigen::Ref<const RowMatrix>& rows) const {
  if (rows.cols() != dim()) throw ParameterError("normalization dimension mismatch");
  return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

void FeatureExtractor::validate(Eigen::Index window_len) const {
  wavelet.validate(window_len);
  if (scale < 1 || scale > wavelet.levels)
    throw ParameterError("feature scale " + std::to_string(scale) + " outside [1, " +
                         std::to_string(wavelet.levels) + "]");
}

Eigen::VectorXd extract_features(const Eigen::Ref<const Eigen::VectorXd>& window,
                                 const FilterPair<double>& filters, int levels, int scale,
                                 std::uint64_t* ops) {
  // Levels above `scale` do not contribute to d_scale.
  auto pyr = dwt(window, filters, levels);
  if (ops) *ops += pyr.op_count;
  return extract_scale(pyr, scale);
}

Eigen::VectorXd extract_features(const Eigen::Ref<const Eigen::VectorXd>& window,
                                 const FeatureExtractor& fx) {
  fx.validate(window.size());
  return extract_features(window, daubechies_filters(fx.wavelet.order), fx.wavelet.levels,
                          fx.scale);
}

// ---------------------------------------------------------------------------

void ShiftBank::validate() const {
  if (shifts.empty()) throw ConfigurationError("shift bank is empty");
  if (shifts.front() != 0)
    throw ConfigurationError("shift bank must start with the complete-pulse shift 0");
  for (std::size_t i = 1; i < shifts.size(); ++i)
    if (shifts[i] <= shifts[i - 1])
      throw ConfigurationError("bank shifts must be strictly increasing");
  if (models.size() != shifts.size() || feature_norm.size() != shifts.size())
    throw ConfigurationError("bank needs one model and one normalization per shift");
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (models[i].feature_dim != models.front().feature_dim)
      throw ConfigurationError("bank models disagree on feature dimension");
    if (models[i].kernel.kind != KernelKind::linear)
      throw ConfigurationError("bank detectors must use the linear kernel");
    if (feature_norm[i].dim() != models[i].feature_dim)
      throw ConfigurationError("feature normalization does not match model dimension");
  }
}

ShiftBank ShiftBank::subset(std::span<const int> wanted) const {
  ShiftBank out;
  out.extractor = extractor;
  out.trained_on = trained_on;
  for (int d : wanted) {
    auto it = std::find(shifts.begin(), shifts.end(), d);
    if (it == shifts.end())
      throw ConfigurationError("shift " + std::to_string(d) + " is not in the bank");
    const auto k = static_cast<std::size_t>(it - shifts.begin());
    out.shifts.push_back(d);
    out.models.push_back(models[k]);
    out.feature_norm.push_back(feature_norm[k]);
  }
  out.validate();
  return out;
}

std::vector<std::vector<Eigen::VectorXd>> dataset_features(
    const Dataset& dataset, std::span<const std::size_t> trials, std::span<const int> shifts,
    const FeatureExtractor& fx, unsigned workers) {
  fx.validate(dataset.window_len());
  const auto filters = daubechies_filters(fx.wavelet.order);
  for (int d : shifts) dataset.shift_index(d);
  std::vector<std::vector<Eigen::VectorXd>> out(trials.size());
  parallel_for(trials.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      out[t].reserve(shifts.size());
      for (int d : shifts)
        out[t].push_back(extract_features(dataset.window(trials[t], d), filters,
                                          fx.wavelet.levels, fx.scale));
    }
  });
  return out;
}

ShiftBank train_bank(const Dataset& dataset, std::span<const int> shifts,
                     const TrainConfig& svm_cfg, const FeatureExtractor& fx,
                     std::uint64_t seed, unsigned workers) {
  svm_cfg.validate();
  const auto pulse = dataset.select(WindowLabel::pulse, Partition::bank);
  const auto noise = dataset.select(WindowLabel::noise_only, Partition::bank);
  if (pulse.empty() || noise.empty())
    throw ConfigurationError("bank partition needs both pulse and noise trials");

  ShiftBank bank;
  bank.shifts.assign(shifts.begin(), shifts.end());
  bank.extractor = fx;
  bank.trained_on = pulse;
  bank.trained_on.insert(bank.trained_on.end(), noise.begin(), noise.end());
  std::sort(bank.trained_on.begin(), bank.trained_on.end());

  const auto feats = dataset_features(dataset, bank.trained_on, shifts, fx, workers);
  std::vector<int> labels(bank.trained_on.size());
  for (std::size_t t = 0; t < labels.size(); ++t)
    labels[t] = dataset.trials[bank.trained_on[t]].label == WindowLabel::pulse ? 1 : -1;

  const Eigen::Index dim = fx.feature_dim(dataset.window_len());
  bank.models.resize(shifts.size());
  bank.feature_norm.resize(shifts.size());
  parallel_for(shifts.size(), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      RowMatrix x(static_cast<Eigen::Index>(feats.size()), dim);
      for (std::size_t t = 0; t < feats.size(); ++t)
        x.row(static_cast<Eigen::Index>(t)) = feats[t][m].transpose();
      bank.feature_norm[m] = FeatureNorm::fit(x);
      bank.models[m] = train(bank.feature_norm[m].apply_rows(x), labels, svm_cfg,
                             KernelSpec::linear(), seed + m);
    }
  });
  bank.validate();
  return bank;
}

Eigen::VectorXd bank_margins_from_features(const ShiftBank& bank,
                                           std::span<const Eigen::VectorXd> features) {
  if (features.size() != bank.size())
    throw ParameterError("group has " + std::to_string(features.size()) +
                         " windows, bank expects " + std::to_string(bank.size()));
  Eigen::VectorXd margins(static_cast<Eigen::Index>(bank.size()));
  for (std::size_t m = 0; m < bank.size(); ++m)
    margins[static_cast<Eigen::Index>(m)] =
        decision_value(bank.models[m], bank.feature_norm[m].apply(features[m]));
  return margins;
}

Eigen::VectorXd bank_margins(const ShiftBank& bank,
                             std::span<const Eigen::VectorXd> window_group) {
  if (window_group.size() != bank.size())
    throw ParameterError("group has " + std::to_string(window_group.size()) +
                         " windows, bank expects " + std::to_string(bank.size()));
  const auto filters = daubechies_filters(bank.extractor.wavelet.order);
  std::vector<Eigen::VectorXd> feats;
  feats.reserve(window_group.size());
  for (const auto& w : window_group) {
    bank.extractor.validate(w.size());
    feats.push_back(extract_features(w, filters, bank.extractor.wavelet.levels,
                                     bank.extractor.scale));
  }
  return bank_margins_from_features(bank, feats);
}

// ---------------------------------------------------------------------------

void IntegrationPipeline::validate() const {
  bank.validate();
  if (integrator.feature_dim != static_cast<int>(bank.size()))
    throw ConfigurationError("integrator input dimension must equal the bank size");
  if (score_norm.dim() != static_cast<Eigen::Index>(bank.size()))
    throw ConfigurationError("score normalization must match the bank size");
}

double IntegrationPipeline::score_margins(const Eigen::Ref<const Eigen::VectorXd>& margins) const {
  return decision_value(integrator, score_norm.apply(margins));
}

IntegrationPipeline train_integrator(const ShiftBank& bank, const Dataset& dataset,
                                     std::span<const std::size_t> integrator_trials,
                                     const KernelSpec& kernel, const TrainConfig& svm_cfg,
                                     std::uint64_t seed, unsigned workers) {
  bank.validate();
  kernel.validate();
  {
    std::vector<std::vector<std::size_t>> parts{
        bank.trained_on,
        std::vector<std::size_t>(integrator_trials.begin(), integrator_trials.end())};
    assert_disjoint(parts);
  }
  const auto feats =
      dataset_features(dataset, integrator_trials, bank.shifts, bank.extractor, workers);
  const auto m = static_cast<Eigen::Index>(bank.size());
  RowMatrix margins(static_cast<Eigen::Index>(feats.size()), m);
  std::vector<int> labels(feats.size());
  for (std::size_t t = 0; t < feats.size(); ++t) {
    margins.row(static_cast<Eigen::Index>(t)) =
        bank_margins_from_features(bank, feats[t]).transpose();
    labels[t] =
        dataset.trials.at(integrator_trials[t]).label == WindowLabel::pulse ? 1 : -1;
  }

  IntegrationPipeline pipe;
  pipe.bank = bank;
  pipe.score_norm = FeatureNorm::fit(margins);
  pipe.integrator = train(pipe.score_norm.apply_rows(margins), labels, svm_cfg, kernel, seed);
  pipe.threshold = 0.0;
  pipe.validate();
  return pipe;
}

// ---------------------------------------------------------------------------

double threshold_for_pfa_sorted(std::span<const double> sorted, double target_pfa) {
  if (!(target_pfa >= 0.0 && target_pfa <= 1.0))
    throw ParameterError("target P_fa must lie in [0, 1]");
  if (sorted.empty()) throw CalibrationError("no noise scores to calibrate on");
  const auto n = sorted.size();
  // Number of scores allowed strictly above the threshold.
  const auto allowed =
      static_cast<std::size_t>(std::floor(target_pfa * static_cast<double>(n) + 1e-9));
  if (allowed >= n) return -std::numeric_limits<double>::infinity();
  return sorted[n - 1 - allowed];
}

double threshold_for_pfa(std::span<const double> scores, double target_pfa) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  return threshold_for_pfa_sorted(sorted, target_pfa);
}

long required_calibration_count(double target_pfa) {
  if (!(target_pfa > 0.0 && target_pfa <= 1.0))
    throw ParameterError("target P_fa must lie in (0, 1]");
  return static_cast<long>(std::ceil(10.0 / target_pfa - 1e-9));
}

double calibrate_threshold(IntegrationPipeline& pipeline, std::span<const double> noise_scores,
                           double target_pfa) {
  const long need = required_calibration_count(target_pfa);
  if (static_cast<long>(noise_scores.size()) < need)
    throw CalibrationError("calibrating P_fa=" + std::to_string(target_pfa) + " needs at least " +
                           std::to_string(need) + " noise scores, got " +
                           std::to_string(noise_scores.size()));
  const double t = threshold_for_pfa(noise_scores, target_pfa);
  pipeline.threshold = t;
  pipeline.calibration.emplace_back(target_pfa, t);
  return t;
}

DetectionResult detect(const IntegrationPipeline& pipeline,
                       std::span<const Eigen::VectorXd> window_group) {
  DetectionResult r;
  r.per_shift_margins = bank_margins(pipeline.bank, window_group);
  r.score = pipeline.score_margins(r.per_shift_margins);
  r.detected = r.score > pipeline.threshold;
  return r;
}

std::vector<ScanHit> sliding_scan(const IntegrationPipeline& pipeline,
                                  const Eigen::Ref<const Eigen::VectorXd>& stream,
                                  Eigen::Index step) {
  const ShiftBank& bank = pipeline.bank;
  if (step < 1) throw ParameterError("scan step must be >= 1");
  const Eigen::Index h =
      bank.models.empty() ? 0 : Eigen::Index{bank.models.front().feature_dim} << bank.extractor.scale;
  const Eigen::Index max_shift = bank.max_shift();
  if (stream.size() < h + max_shift)
    throw ParameterError("stream of " + std::to_string(stream.size()) +
                         " samples is shorter than window + max shift (" +
                         std::to_string(h + max_shift) + ")");
  const auto filters = daubechies_filters(bank.extractor.wavelet.order);
  std::vector<std::optional<Eigen::VectorXd>> cache(
      static_cast<std::size_t>(stream.size() - h + 1));
  auto features_at = [&](Eigen::Index start) -> const Eigen::VectorXd& {
    auto& slot = cache[static_cast<std::size_t>(start)];
    if (!slot)
      slot = extract_features(stream.segment(start, h), filters, bank.extractor.wavelet.levels,
                              bank.extractor.scale);
    return *slot;
  };

  std::vector<ScanHit> hits;
  std::vector<Eigen::VectorXd> group(bank.size());
  for (Eigen::Index p = max_shift; p + h <= stream.size(); p += step) {
    for (std::size_t m = 0; m < bank.size(); ++m) group[m] = features_at(p - bank.shifts[m]);
    ScanHit hit;
    hit.position = p;
    hit.result.per_shift_margins = bank_margins_from_features(bank, group);
    hit.result.score = pipeline.score_margins(hit.result.per_shift_margins);
    hit.result.detected = hit.result.score > pipeline.threshold;
    hits.push_back(std::move(hit));
  }
  return hits;
}

}  // namespace wavedet
