#include "wavedet/eval.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wavedet/error.hpp"
#include "wavedet/parallel.hpp"

namespace wavedet {

Interval clopper_pearson(long successes, long trials, double level) {
  if (trials <= 0 || successes < 0 || successes > trials)
    throw ParameterError("clopper_pearson needs 0 <= successes <= trials, trials > 0");
  if (!(level > 0.0 && level < 1.0)) throw ParameterError("confidence level must be in (0, 1)");
  const double alpha = 1.0 - level;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  Interval ci;
  ci.lower = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, alpha / 2.0);
  ci.upper = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - alpha / 2.0);
  return ci;
}

namespace {

// Features of every bank window of one trial segment.
std::vector<Eigen::VectorXd> group_features(const Eigen::VectorXd& segment,
                                            std::span<const int> shifts, int max_shift,
                                            Eigen::Index window_len,
                                            const FilterPair<double>& filters,
                                            const FeatureExtractor& fx) {
  std::vector<Eigen::VectorXd> feats;
  feats.reserve(shifts.size());
  for (int d : shifts)
    feats.push_back(extract_features(segment.segment(window_offset(max_shift, d), window_len),
                                     filters, fx.wavelet.levels, fx.scale));
  return feats;
}

Eigen::Index bank_window_len(const ShiftBank& bank) {
  if (bank.models.empty()) throw ConfigurationError("bank has no models");
  return Eigen::Index{bank.models.front().feature_dim} << bank.extractor.scale;
}

void check_pulse_matches(const ShiftBank& bank, const PulseSpec& pulse) {
  pulse.validate();
  if (bank_window_len(bank) != pulse.n_samples)
    throw ConfigurationError("pulse length does not match the bank's window length");
}

}  // namespace

RatesEstimate estimate_rates(const IntegrationPipeline& pipeline, const PulseSpec& pulse,
                             double sigma, double snr_db, long n_pulse, long n_noise,
                             std::uint64_t seed, unsigned workers) {
  if (n_pulse <= 0 || n_noise <= 0) throw ParameterError("trial counts must be positive");
  pipeline.validate();
  check_pulse_matches(pipeline.bank, pulse);
  const ShiftBank& bank = pipeline.bank;
  const Eigen::VectorXd chirp = generate_chirp(pulse);
  const double amp = snr_amplitude(snr_db, chirp, sigma);
  const auto filters = daubechies_filters(bank.extractor.wavelet.order);

  auto run = [&](long count, std::uint64_t tag, double amplitude) {
    std::vector<char> hit(static_cast<std::size_t>(count), 0);
    parallel_for(hit.size(), workers, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Rng rng = Rng::substream(seed, tag, i);
        const Eigen::VectorXd seg =
            make_trial_segment(chirp, amplitude, bank.max_shift(), sigma, rng);
        const auto feats = group_features(seg, bank.shifts, bank.max_shift(),
                                          pulse.n_samples, filters, bank.extractor);
        hit[i] = pipeline.score_margins(bank_margins_from_features(bank, feats)) >
                 pipeline.threshold;
      }
    });
    long total = 0;
    for (char h : hit) total += h;
    return total;
  };

  RatesEstimate r;
  r.snr_db = snr_db;
  r.threshold = pipeline.threshold;
  r.trials_pulse = n_pulse;
  r.trials_noise = n_noise;
  r.detections = run(n_pulse, stream::kEvalPulse, amp);
  r.false_alarms = run(n_noise, stream::kEvalNoise, 0.0);
  r.p_d = static_cast<double>(r.detections) / static_cast<double>(n_pulse);
  r.p_fa = static_cast<double>(r.false_alarms) / static_cast<double>(n_noise);
  r.ci_pd = clopper_pearson(r.detections, n_pulse);
  r.ci_pfa = clopper_pearson(r.false_alarms, n_noise);
  return r;
}

// ---------------------------------------------------------------------------

void CorrelationMatrix::check_invariants() const {
  const Eigen::Index m = entries.rows();
  if (entries.cols() != m || static_cast<Eigen::Index>(labels.size()) != m)
    throw InvariantError("correlation matrix must be square with one label per row");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(entries(i, i) - 1.0) > 1e-12)
      throw InvariantError("correlation matrix diagonal entry " + std::to_string(i) + " is not 1");
    for (Eigen::Index j = 0; j < m; ++j) {
      if (std::abs(entries(i, j) - entries(j, i)) > 1e-12)
        throw InvariantError("correlation matrix is not symmetric");
      if (entries(i, j) < -1.0 || entries(i, j) > 1.0)
        throw InvariantError("correlation entry outside [-1, 1]");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9)
    throw InvariantError("correlation matrix is not positive semidefinite");
}

std::pair<Eigen::Index, Eigen::Index> CorrelationMatrix::max_off_diagonal() const {
  std::pair<Eigen::Index, Eigen::Index> best{0, 1};
  double value = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < entries.rows(); ++i)
    for (Eigen::Index j = i + 1; j < entries.cols(); ++j)
      if (entries(i, j) > value) {
        value = entries(i, j);
        best = {i, j};
      }
  return best;
}

CorrelationMatrix correlation_matrix(const Eigen::Ref<const Eigen::MatrixXd>& table,
                                     std::vector<std::string> labels) {
  const Eigen::Index n = table.rows();
  const Eigen::Index m = table.cols();
  if (n < 2) throw ParameterError("correlation needs at least two observations");
  if (static_cast<Eigen::Index>(labels.size()) != m)
    throw ParameterError("one label per column required");
  const Eigen::MatrixXd centered = table.rowwise() - table.colwise().mean();
  const Eigen::VectorXd norms = centered.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < m; ++j)
    if (!(norms[j] > 0.0))
      throw DegenerateInputError("column '" + labels[static_cast<std::size_t>(j)] +
                                 "' is constant");
  CorrelationMatrix out;
  out.labels = std::move(labels);
  out.entries = (centered.transpose() * centered).array() / (norms * norms.transpose()).array();
  out.entries = (0.5 * (out.entries + out.entries.transpose())).cwiseMax(-1.0).cwiseMin(1.0);
  out.entries.diagonal().setOnes();
  return out;
}

Eigen::MatrixXd pulse_margin_table(const ShiftBank& bank, const PulseSpec& pulse, double sigma,
                                   double snr_db, long count, std::uint64_t seed,
                                   unsigned workers) {
  if (count <= 0) throw ParameterError("observation count must be positive");
  bank.validate();
  check_pulse_matches(bank, pulse);
  const Eigen::VectorXd chirp = generate_chirp(pulse);
  const double amp = snr_amplitude(snr_db, chirp, sigma);
  const auto filters = daubechies_filters(bank.extractor.wavelet.order);
  Eigen::MatrixXd table(count, static_cast<Eigen::Index>(bank.size()));
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::substream(seed, stream::kCorrelation, i);
      const Eigen::VectorXd seg = make_trial_segment(chirp, amp, bank.max_shift(), sigma, rng);
      const auto feats = group_features(seg, bank.shifts, bank.max_shift(), pulse.n_samples,
                                        filters, bank.extractor);
      table.row(static_cast<Eigen::Index>(i)) = bank_margins_from_features(bank, feats).transpose();
    }
  });
  return table;
}

std::string shift_label(int shift) { return std::to_string(shift) + "-shift"; }

std::string integrator_label(std::span<const int> shifts) {
  std::string out = "integrated[";
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(shifts[i]);
  }
  return out + "]";
}

// ---------------------------------------------------------------------------

std::size_t FrozenScores::scheme_index(const std::string& name) const {
  auto it = std::find(schemes.begin(), schemes.end(), name);
  if (it == schemes.end()) throw ParameterError("unknown scheme '" + name + "'");
  return static_cast<std::size_t>(it - schemes.begin());
}

double FrozenScores::mean_pd(std::size_t scheme, double threshold) const {
  const auto& per_snr = pulse.at(scheme);
  double total = 0.0;
  for (const auto& sorted : per_snr) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), threshold);
    total += static_cast<double>(above) / static_cast<double>(sorted.size());
  }
  return total / static_cast<double>(per_snr.size());
}

double FrozenScores::pfa(std::size_t scheme, double threshold) const {
  const auto& sorted = noise.at(scheme);
  const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), threshold);
  return static_cast<double>(above) / static_cast<double>(sorted.size());
}

double FrozenScores::pfa_at_mean_pd(std::size_t scheme, double goal) const {
  // mean_pd(t) only drops at pulse scores, so the best threshold sits just
  // below the pulse score where the accumulated mean P_d first reaches goal.
  struct Weighted {
    double score;
    double weight;
  };
  std::vector<Weighted> all;
  const auto& per_snr = pulse.at(scheme);
  for (const auto& v : per_snr)
    for (double s : v)
      all.push_back({s, 1.0 / (static_cast<double>(per_snr.size()) * static_cast<double>(v.size()))});
  std::sort(all.begin(), all.end(), [](const Weighted& a, const Weighted& b) {
    return a.score > b.score;
  });
  double acc = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    const double v = all[i].score;
    while (i < all.size() && all[i].score == v) acc += all[i++].weight;
    if (acc >= goal - 1e-12) {
      const auto& sorted = noise.at(scheme);
      const auto at_or_above = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), v);
      return static_cast<double>(at_or_above) / static_cast<double>(sorted.size());
    }
  }
  return 1.0;
}

FrozenScores freeze_scores(const ShiftBank& bank,
                           std::span<const IntegrationPipeline> integrators,
                           const PulseSpec& pulse, double sigma,
                           std::span<const double> snr_grid, long n_noise,
                           long n_pulse_per_snr, std::uint64_t seed, unsigned workers) {
  bank.validate();
  check_pulse_matches(bank, pulse);
  if (snr_grid.empty()) throw ParameterError("SNR grid is empty");
  if (n_noise <= 0 || n_pulse_per_snr <= 0) throw ParameterError("trial counts must be positive");

  // Column of each integrator input inside the full bank's feature list.
  std::vector<std::vector<std::size_t>> columns;
  for (const auto& pipe : integrators) {
    pipe.validate();
    std::vector<std::size_t> cols;
    for (int d : pipe.bank.shifts) {
      auto it = std::find(bank.shifts.begin(), bank.shifts.end(), d);
      if (it == bank.shifts.end())
        throw ConfigurationError("integrator input shift " + std::to_string(d) +
                                 " is not in the bank");
      cols.push_back(static_cast<std::size_t>(it - bank.shifts.begin()));
    }
    columns.push_back(std::move(cols));
  }

  FrozenScores out;
  for (int d : bank.shifts) out.schemes.push_back(shift_label(d));
  for (const auto& pipe : integrators) out.schemes.push_back(integrator_label(pipe.bank.shifts));
  out.snr_grid.assign(snr_grid.begin(), snr_grid.end());
  out.n_noise = n_noise;
  out.n_pulse_per_snr = n_pulse_per_snr;
  out.seed = seed;

  const std::size_t n_schemes = out.schemes.size();
  const Eigen::VectorXd chirp = generate_chirp(pulse);
  const auto filters = daubechies_filters(bank.extractor.wavelet.order);
  const int max_shift = bank.max_shift();

  auto score_group = [&](const Eigen::VectorXd& seg, auto&& sink) {
    const auto feats =
        group_features(seg, bank.shifts, max_shift, pulse.n_samples, filters, bank.extractor);
    const Eigen::VectorXd margins = bank_margins_from_features(bank, feats);
    for (std::size_t m = 0; m < bank.size(); ++m) sink(m, margins[static_cast<Eigen::Index>(m)]);
    for (std::size_t p = 0; p < integrators.size(); ++p) {
      Eigen::VectorXd sub(static_cast<Eigen::Index>(columns[p].size()));
      for (std::size_t c = 0; c < columns[p].size(); ++c)
        sub[static_cast<Eigen::Index>(c)] = margins[static_cast<Eigen::Index>(columns[p][c])];
      sink(bank.size() + p, integrators[p].score_margins(sub));
    }
  };

  out.noise.assign(n_schemes, std::vector<double>(static_cast<std::size_t>(n_noise)));
  parallel_for(static_cast<std::size_t>(n_noise), workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::substream(seed, stream::kEvalNoise, i);
      score_group(make_trial_segment(chirp, 0.0, max_shift, sigma, rng),
                  [&](std::size_t s, double v) { out.noise[s][i] = v; });
    }
  });

  const std::size_t n_snr = snr_grid.size();
  const auto per = static_cast<std::size_t>(n_pulse_per_snr);
  out.pulse.assign(n_schemes, std::vector<std::vector<double>>(n_snr, std::vector<double>(per)));
  parallel_for(n_snr * per, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const std::size_t k = idx / per, i = idx % per;
      Rng rng = Rng::substream(seed, stream::kEvalPulse, idx);
      const double amp = snr_amplitude(snr_grid[k], chirp, sigma);
      score_group(make_trial_segment(chirp, amp, max_shift, sigma, rng),
                  [&](std::size_t s, double v) { out.pulse[s][k][i] = v; });
    }
  });

  for (auto& v : out.noise) std::sort(v.begin(), v.end());
  for (auto& scheme : out.pulse)
    for (auto& v : scheme) std::sort(v.begin(), v.end());
  return out;
}

void PerformanceCurve::check_monotone() const {
  for (const auto& a : points)
    for (const auto& b : points)
      if (a.scheme == b.scheme && a.neg_log10_pfa < b.neg_log10_pfa && b.mean_pd > a.mean_pd)
        throw InvariantError("mean P_d of scheme '" + a.scheme +
                             "' increases as the P_fa target tightens");
}

double PerformanceCurve::mean_pd(const std::string& scheme, double pfa_target) const {
  for (const auto& p : points)
    if (p.scheme == scheme && p.pfa_target == pfa_target) return p.mean_pd;
  throw ParameterError("no curve point for scheme '" + scheme + "'");
}

PerformanceCurve curve_from_scores(const FrozenScores& scores,
                                   std::span<const double> pfa_targets) {
  if (pfa_targets.empty()) throw ParameterError("no P_fa targets");
  const double tightest = *std::min_element(pfa_targets.begin(), pfa_targets.end());
  const long need = required_calibration_count(tightest);
  if (scores.n_noise < need)
    throw CalibrationError("P_fa target " + std::to_string(tightest) + " needs n_noise >= " +
                           std::to_string(need) + ", got " + std::to_string(scores.n_noise));
  PerformanceCurve curve;
  curve.snr_grid = scores.snr_grid;
  curve.n_noise = scores.n_noise;
  curve.n_pulse_per_snr = scores.n_pulse_per_snr;
  curve.seed = scores.seed;
  for (std::size_t s = 0; s < scores.schemes.size(); ++s) {
    for (double target : pfa_targets) {
      CurvePoint pt;
      pt.scheme = scores.schemes[s];
      pt.pfa_target = target;
      pt.neg_log10_pfa = 0.0 - std::log10(target);  // no negative zero
      pt.threshold = threshold_for_pfa_sorted(scores.noise[s], target);
      pt.mean_pd = scores.mean_pd(s, pt.threshold);
      curve.points.push_back(pt);
    }
  }
  curve.check_monotone();
  return curve;
}

PerformanceCurve performance_curve(const ShiftBank& bank,
                                   std::span<const IntegrationPipeline> integrators,
                                   const PulseSpec& pulse, double sigma,
                                   std::span<const double> snr_grid,
                                   std::span<const double> pfa_targets, long n_noise,
                                   long n_pulse_per_snr, std::uint64_t seed, unsigned workers) {
  if (pfa_targets.empty()) throw ParameterError("no P_fa targets");
  const double tightest = *std::min_element(pfa_targets.begin(), pfa_targets.end());
  if (n_noise < required_calibration_count(tightest))
    throw CalibrationError("n_noise too small for P_fa target " + std::to_string(tightest));
  const auto scores = freeze_scores(bank, integrators, pulse, sigma, snr_grid, n_noise,
                                    n_pulse_per_snr, seed, workers);
  return curve_from_scores(scores, pfa_targets);
}

// ---------------------------------------------------------------------------

double ComplexityReport::dominance() const {
  const auto rest = bank_per_group + integrator_per_group;
  return rest == 0 ? std::numeric_limits<double>::infinity()
                   : static_cast<double>(wavelet_per_group) / static_cast<double>(rest);
}

double ComplexityReport::sliding_dominance() const {
  const auto rest = bank_per_group + integrator_per_group;
  return rest == 0 ? std::numeric_limits<double>::infinity()
                   : static_cast<double>(wavelet_per_window) / static_cast<double>(rest);
}

bool ComplexityReport::wavelet_constant_per_sample(double tol) const {
  for (const auto& row : wavelet_rows)
    if (std::abs(row.per_sample - wavelet_rows.front().per_sample) > tol) return false;
  return true;
}

std::string ComplexityReport::to_text() const {
  std::ostringstream os;
  os << "# multiply-add accounting (W=" << filter_width << ", K=" << levels << ")\n";
  os << "H\tmeasured\tclosed_form\tper_sample\n";
  for (const auto& r : wavelet_rows)
    os << r.length << '\t' << r.measured << '\t' << r.closed_form << '\t' << r.per_sample << '\n';
  os << "\n# one detection group (H=" << window_len << ", M=" << bank_size
     << ", S=" << feature_dim << ")\n";
  os << "wavelet_per_window\t" << wavelet_per_window << '\n';
  os << "wavelet_per_group\t" << wavelet_per_group << '\n';
  os << "bank_per_group\t" << bank_per_group << '\n';
  os << "integrator_support_vectors\t" << integrator_support << '\n';
  os << "integrator_per_group\t" << integrator_per_group << '\n';
  os << "integrator_quadratic_form\t" << integrator_quadratic << '\n';
  os << "wavelet_dominance\t" << dominance() << '\n';
  os << "sliding_wavelet_dominance\t" << sliding_dominance() << '\n';
  return os.str();
}

ComplexityReport complexity_report(const WaveletConfig& wavelet,
                                   std::span<const Eigen::Index> lengths,
                                   const IntegrationPipeline& pipeline) {
  pipeline.validate();
  const auto filters = daubechies_filters(wavelet.order);
  ComplexityReport rep;
  rep.filter_width = static_cast<int>(filters.width());
  rep.levels = wavelet.levels;
  for (Eigen::Index h : lengths) {
    wavelet.validate(h);
    const auto pyr = dwt(Eigen::VectorXd::Zero(h), filters, wavelet.levels);
    WaveletCountRow row;
    row.length = h;
    row.measured = pyr.op_count;
    row.closed_form = dwt_op_count(static_cast<std::uint64_t>(h),
                                   static_cast<std::uint64_t>(filters.width()), wavelet.levels);
    row.per_sample = static_cast<double>(row.measured) / static_cast<double>(h);
    rep.wavelet_rows.push_back(row);
  }
  const ShiftBank& bank = pipeline.bank;
  rep.window_len = bank_window_len(bank);
  rep.bank_size = bank.size();
  rep.feature_dim = bank.models.front().feature_dim;
  const auto m = static_cast<std::uint64_t>(bank.size());
  rep.wavelet_per_window =
      dwt_op_count(static_cast<std::uint64_t>(rep.window_len),
                   static_cast<std::uint64_t>(daubechies_filters(bank.extractor.wavelet.order).width()),
                   bank.extractor.wavelet.levels);
  rep.wavelet_per_group = m * rep.wavelet_per_window;
  rep.bank_per_group = m * static_cast<std::uint64_t>(rep.feature_dim);
  rep.integrator_support = pipeline.integrator.support_count();
  rep.integrator_per_group = static_cast<std::uint64_t>(rep.integrator_support) * m;
  rep.integrator_quadratic = m * m + m;
  return rep;
}

}  // namespace wavedet
