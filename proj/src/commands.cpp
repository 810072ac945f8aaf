#include "wavedet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>

#include "wavedet/error.hpp"
#include "wavedet/eval.hpp"
#include "wavedet/io.hpp"

namespace wavedet {

namespace fs = std::filesystem;

namespace {

// Reference correlation of pulse margins, shift order 0, 11, 23, 37, 53.
constexpr double kReferenceCorrelation[5][5] = {
    {1.0000, 0.9123, 0.9573, 0.9209, 0.9201},
    {0.9123, 1.0000, 0.8977, 0.9131, 0.9171},
    {0.9573, 0.8977, 1.0000, 0.9474, 0.9449},
    {0.9209, 0.9131, 0.9474, 1.0000, 0.9951},
    {0.9201, 0.9171, 0.9449, 0.9951, 1.0000}};
constexpr int kReferenceShifts[5] = {0, 11, 23, 37, 53};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw DataError("cannot create directory '" + dir.string() + "'");
}

std::vector<std::string> shift_labels(std::span<const int> shifts) {
  std::vector<std::string> out;
  for (int d : shifts) out.push_back(shift_label(d));
  return out;
}

struct LoadedBundles {
  ShiftBank bank;  // covers every configured shift
  std::vector<IntegrationPipeline> integrators;
};

LoadedBundles load_bundles(const ExperimentConfig& cfg, const OutputLayout& out) {
  LoadedBundles lb;
  const ShiftBank* widest = nullptr;
  for (const auto& inputs : cfg.integrators) {
    const fs::path dir = out.bundle(inputs);
    if (!fs::exists(dir / "manifest.json"))
      throw DataError("pipeline bundle '" + dir.string() + "' not found; run 'train' first");
    lb.integrators.push_back(io::load_pipeline(dir));
    if (lb.integrators.back().bank.shifts != inputs)
      throw DataError("bundle '" + dir.string() + "' does not match its configured inputs");
  }
  for (const auto& p : lb.integrators)
    if (!widest || p.bank.size() > widest->size()) widest = &p.bank;
  if (!widest || widest->shifts != cfg.shifts)
    throw DataError("no bundle covers the full shift list; configure an integrator over all shifts");
  lb.bank = *widest;
  return lb;
}

}  // namespace

fs::path OutputLayout::bundle(std::span<const int> inputs) const {
  std::string tag = "integrated";
  for (int d : inputs) tag += "_" + std::to_string(d);
  return pipelines() / tag;
}

void cmd_gen(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const OutputLayout out{cfg.output_dir};
  ensure_dir(out.root);
  const Dataset ds = build_dataset(cfg.pulse, cfg.sigma, cfg.shifts, cfg.snr_grid, cfg.counts,
                                   cfg.seed, cfg.workers);
  io::write_dataset(ds, out.dataset_base());
  io::write_text(out.root / "config.json", to_json(cfg).dump(1) + "\n");
  log << "dataset: " << ds.size() << " trials x " << ds.shifts.size() << " shifts -> "
      << out.dataset_base().string() << ".{bin,json}\n";
  for (WindowLabel label : {WindowLabel::pulse, WindowLabel::noise_only})
    for (Partition p : kAllPartitions)
      log << "  " << std::left << std::setw(11) << to_string(label) << std::setw(12) << to_string(p)
          << ds.select(label, p).size() << '\n';
}

void cmd_train(const ExperimentConfig& cfg, bool force, std::ostream& log) {
  cfg.validate();
  const OutputLayout out{cfg.output_dir};
  if (!force)
    for (const auto& inputs : cfg.integrators)
      if (fs::exists(out.bundle(inputs)))
        throw DataError("bundle '" + out.bundle(inputs).string() +
                        "' already exists; pass --force to overwrite");

  const Dataset ds = io::read_dataset(out.dataset_base());
  for (int d : cfg.shifts) {
    try {
      ds.shift_index(d);
    } catch (const ParameterError&) {
      throw DataError("dataset lacks shift " + std::to_string(d));
    }
  }
  if (ds.pulse.n_samples != cfg.pulse.n_samples)
    throw DataError("dataset window length differs from the configured pulse length");

  std::vector<std::vector<std::size_t>> parts;
  for (Partition p : kAllPartitions) {
    auto ids = ds.select(WindowLabel::pulse, p);
    const auto noise = ds.select(WindowLabel::noise_only, p);
    ids.insert(ids.end(), noise.begin(), noise.end());
    parts.push_back(std::move(ids));
  }
  assert_disjoint(parts);

  log << "training " << cfg.shifts.size() << " linear shift detectors\n";
  const ShiftBank bank = train_bank(ds, cfg.shifts, cfg.bank_svm, cfg.features, cfg.seed, cfg.workers);
  for (std::size_t m = 0; m < bank.size(); ++m)
    log << "  " << shift_label(bank.shifts[m]) << ": " << bank.models[m].support_count()
        << " support vectors\n";

  const auto& integ_trials = parts[static_cast<std::size_t>(Partition::integrator)];
  const auto calib_noise = ds.select(WindowLabel::noise_only, Partition::calibration);
  const auto test_pulse = ds.select(WindowLabel::pulse, Partition::test);
  const auto test_noise = ds.select(WindowLabel::noise_only, Partition::test);

  std::vector<double> targets = cfg.pfa_targets;
  std::sort(targets.begin(), targets.end(), std::greater<>());

  for (const auto& inputs : cfg.integrators) {
    const ShiftBank sub = bank.subset(inputs);
    IntegrationPipeline pipe = train_integrator(sub, ds, integ_trials, cfg.integrator_kernel,
                                                cfg.integrator_svm, cfg.seed, cfg.workers);

    auto scores_of = [&](std::span<const std::size_t> trials) {
      const auto feats = dataset_features(ds, trials, sub.shifts, sub.extractor, cfg.workers);
      std::vector<double> s;
      s.reserve(feats.size());
      for (const auto& f : feats) s.push_back(pipe.score_margins(bank_margins_from_features(sub, f)));
      return s;
    };
    const auto calib_scores = scores_of(calib_noise);
    const auto pulse_scores = scores_of(test_pulse);
    const auto noise_scores = scores_of(test_noise);

    log << integrator_label(inputs) << ": " << pipe.integrator.support_count()
        << " support vectors\n";
    for (double target : targets) {
      const double t = calibrate_threshold(pipe, calib_scores, target);
      const auto above = [t](const std::vector<double>& v) {
        return std::count_if(v.begin(), v.end(), [t](double s) { return s > t; });
      };
      log << "  P_fa target " << target << ": threshold " << t;
      if (!pulse_scores.empty())
        log << ", test P_d " << static_cast<double>(above(pulse_scores)) / pulse_scores.size();
      if (!noise_scores.empty())
        log << ", test P_fa " << static_cast<double>(above(noise_scores)) / noise_scores.size();
      log << '\n';
    }
    io::save_pipeline(pipe, out.bundle(inputs),
                      {ds.seed, cfg.seed, out.dataset_base().string()});
    log << "  bundle -> " << out.bundle(inputs).string() << '\n';
  }
}

void cmd_corr(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const OutputLayout out{cfg.output_dir};
  const auto lb = load_bundles(cfg, out);
  const Eigen::MatrixXd table =
      pulse_margin_table(lb.bank, cfg.pulse, cfg.sigma, cfg.eval.corr_snr_db,
                         cfg.eval.corr_observations, cfg.seed, cfg.workers);
  const CorrelationMatrix corr = correlation_matrix(table, shift_labels(lb.bank.shifts));
  corr.check_invariants();
  ensure_dir(out.reports());
  io::write_correlation_csv(corr, out.reports() / "corr.csv");
  log << "correlation of " << cfg.eval.corr_observations << " pulse observations at "
      << cfg.eval.corr_snr_db << " dB\n"
      << std::fixed << std::setprecision(4) << corr.entries << '\n';
  if (lb.bank.shifts == std::vector<int>(std::begin(kReferenceShifts), std::end(kReferenceShifts))) {
    log << "delta vs reference matrix:\n"
        << (corr.entries - Eigen::Map<const Eigen::Matrix<double, 5, 5, Eigen::RowMajor>>(
                               &kReferenceCorrelation[0][0]))
        << '\n';
  }
  log.unsetf(std::ios::floatfield);
  log << "corr -> " << (out.reports() / "corr.csv").string() << '\n';
}

void cmd_eval(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const OutputLayout out{cfg.output_dir};
  const auto lb = load_bundles(cfg, out);
  ensure_dir(out.reports());

  log << "scoring " << cfg.eval.n_noise << " noise groups and " << cfg.eval.n_pulse_per_snr
      << " pulse groups at each of " << cfg.snr_grid.size() << " SNRs\n";
  const PerformanceCurve curve =
      performance_curve(lb.bank, lb.integrators, cfg.pulse, cfg.sigma, cfg.snr_grid,
                        cfg.pfa_targets, cfg.eval.n_noise, cfg.eval.n_pulse_per_snr, cfg.seed,
                        cfg.workers);
  io::write_curves_csv(curve, out.reports() / "curves.csv");
  for (const auto& p : curve.points)
    log << "  " << std::left << std::setw(28) << p.scheme << " P_fa " << std::setw(8)
        << p.pfa_target << " mean P_d " << p.mean_pd << '\n';

  const Eigen::MatrixXd table =
      pulse_margin_table(lb.bank, cfg.pulse, cfg.sigma, cfg.eval.corr_snr_db,
                         cfg.eval.corr_observations, cfg.seed, cfg.workers);
  const CorrelationMatrix corr = correlation_matrix(table, shift_labels(lb.bank.shifts));
  corr.check_invariants();
  io::write_correlation_csv(corr, out.reports() / "corr.csv");

  nlohmann::json rates = {{"schema", io::kRatesSchema}, {"estimates", nlohmann::json::array()}};
  for (const auto& pipe : lb.integrators) {
    const RatesEstimate r = estimate_rates(pipe, cfg.pulse, cfg.sigma, cfg.eval.rates_snr_db,
                                           cfg.eval.rates_pulse, cfg.eval.rates_noise, cfg.seed,
                                           cfg.workers);
    if (!r.ci_pd.contains(r.p_d) || !r.ci_pfa.contains(r.p_fa))
      throw InvariantError("rate estimate lies outside its confidence interval");
    auto j = io::rates_to_json(r);
    j.erase("schema");
    j["scheme"] = integrator_label(pipe.bank.shifts);
    rates["estimates"].push_back(j);
    log << "  " << integrator_label(pipe.bank.shifts) << " at " << r.snr_db << " dB: P_d " << r.p_d
        << ", P_fa " << r.p_fa << '\n';
  }
  io::write_text(out.reports() / "rates.json", rates.dump(1) + "\n");

  const std::vector<Eigen::Index> lengths{256, 512, 1024, 2048};
  const ComplexityReport rep =
      complexity_report(cfg.features.wavelet, lengths, lb.integrators.back());
  if (!rep.wavelet_constant_per_sample())
    throw InvariantError("wavelet multiply-adds are not linear in the window length");
  if (rep.dominance() <= 1.0)
    throw InvariantError("wavelet stage does not dominate the per-group cost");
  io::write_text(out.reports() / "complexity.txt", rep.to_text());
  log << "reports -> " << out.reports().string() << '\n';
}

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigurationError*>(&e)) return 2;
  if (dynamic_cast<const InvariantError*>(&e)) return 4;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const CalibrationError*>(&e) ||
      dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const ParameterError*>(&e) ||
      dynamic_cast<const DegenerateInputError*>(&e))
    return 3;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return 3;
  return 1;
}

}  // namespace wavedet
