#include "wavedet/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "wavedet/error.hpp"

namespace wavedet::io {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "dataset I/O assumes a little-endian host");

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json parse_file(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void expect_schema(const json& j, const char* schema, const fs::path& origin) {
  if (!j.is_object() || j.value("schema", std::string{}) != schema)
    throw DataError("'" + origin.string() + "' is not a " + schema + " document");
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("missing or invalid field '") + key + "': " + e.what());
  }
}

json vec_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.begin(), v.end()); }

Eigen::VectorXd vec_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Thresholds may be +-inf; JSON has no literal for that.
json threshold_to_json(double t) {
  if (std::isfinite(t)) return t;
  return t > 0 ? "inf" : "-inf";
}

double threshold_from_json(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v == "inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  throw DataError("invalid threshold value " + v.dump());
}

std::string file_tag(std::span<const int> shifts) {
  std::string tag;
  for (std::size_t i = 0; i < shifts.size(); ++i) tag += (i ? "_" : "") + std::to_string(shifts[i]);
  return tag;
}

}  // namespace

json to_json(const PulseSpec& spec) {
  return {{"n_samples", spec.n_samples},
          {"f_start", spec.f_start},
          {"f_end", spec.f_end},
          {"initial_phase", spec.initial_phase}};
}

PulseSpec pulse_from_json(const json& j) {
  PulseSpec p;
  p.n_samples = field<int>(j, "n_samples");
  p.f_start = field<double>(j, "f_start");
  p.f_end = field<double>(j, "f_end");
  p.initial_phase = field<double>(j, "initial_phase");
  return p;
}

// ---------------------------------------------------------------------------

void write_dataset(const Dataset& ds, const fs::path& base) {
  fs::path bin = base;
  bin += ".bin";
  fs::path side = base;
  side += ".json";

  std::ofstream out(bin, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + bin.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(ds.segments.data()),
            static_cast<std::streamsize>(ds.segments.size() * sizeof(double)));
  if (!out) throw DataError("failed writing '" + bin.string() + "'");

  std::vector<std::string> labels, partitions;
  json snrs = json::array();
  json counts = {{"pulse", json::object()}, {"noise", json::object()}};
  for (Partition p : kAllPartitions) {
    counts["pulse"][std::string(to_string(p))] = 0;
    counts["noise"][std::string(to_string(p))] = 0;
  }
  for (const auto& t : ds.trials) {
    labels.emplace_back(to_string(t.label));
    partitions.emplace_back(to_string(t.partition));
    const char* cls = t.label == WindowLabel::pulse ? "pulse" : "noise";
    counts[cls][std::string(to_string(t.partition))] =
        counts[cls][std::string(to_string(t.partition))].get<long>() + 1;
    if (t.label == WindowLabel::pulse) snrs.push_back(t.snr_db);
    else snrs.push_back(nullptr);
  }
  std::vector<int> offsets;
  for (int d : ds.shifts) offsets.push_back(static_cast<int>(window_offset(ds.max_shift(), d)));

  json j = {{"schema", kDatasetSchema},
            {"binary", bin.filename().string()},
            {"layout", "row-major float64 little-endian; one trial segment per row"},
            {"rows", ds.segments.rows()},
            {"segment_len", ds.segments.cols()},
            {"window_len", ds.window_len()},
            {"shifts", ds.shifts},
            {"window_offsets", offsets},
            {"pulse", to_json(ds.pulse)},
            {"noise", {{"sigma", ds.sigma}, {"seed", ds.seed}}},
            {"seed", ds.seed},
            {"snr_grid", ds.snr_grid},
            {"counts", counts},
            {"trials", {{"label", labels}, {"partition", partitions}, {"snr_db", snrs}}}};
  write_text(side, j.dump(1) + "\n");
}

Dataset read_dataset(const fs::path& base) {
  fs::path side = base;
  side += ".json";
  const json j = parse_file(side);
  expect_schema(j, kDatasetSchema, side);

  Dataset ds;
  ds.pulse = pulse_from_json(j.at("pulse"));
  ds.sigma = field<double>(j.at("noise"), "sigma");
  ds.seed = field<std::uint64_t>(j, "seed");
  ds.shifts = field<std::vector<int>>(j, "shifts");
  ds.snr_grid = field<std::vector<double>>(j, "snr_grid");
  const auto rows = field<Eigen::Index>(j, "rows");
  const auto cols = field<Eigen::Index>(j, "segment_len");
  if (cols != ds.window_len() + ds.max_shift())
    throw DataError("segment_len disagrees with window_len + max shift");

  const json& trials = j.at("trials");
  const auto labels = field<std::vector<std::string>>(trials, "label");
  const auto parts = field<std::vector<std::string>>(trials, "partition");
  const json& snrs = trials.at("snr_db");
  if (static_cast<Eigen::Index>(labels.size()) != rows ||
      static_cast<Eigen::Index>(parts.size()) != rows ||
      static_cast<Eigen::Index>(snrs.size()) != rows)
    throw DataError("trial metadata length disagrees with row count");
  for (Eigen::Index r = 0; r < rows; ++r) {
    TrialInfo t;
    const auto i = static_cast<std::size_t>(r);
    if (labels[i] == "pulse") t.label = WindowLabel::pulse;
    else if (labels[i] == "noise_only") t.label = WindowLabel::noise_only;
    else throw DataError("unknown trial label '" + labels[i] + "'");
    t.partition = partition_from_string(parts[i]);
    if (t.label == WindowLabel::pulse) t.snr_db = snrs[i].get<double>();
    ds.trials.push_back(t);
  }

  fs::path bin = side.parent_path() / field<std::string>(j, "binary");
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw DataError("cannot open '" + bin.string() + "'");
  ds.segments.resize(rows, cols);
  in.read(reinterpret_cast<char*>(ds.segments.data()),
          static_cast<std::streamsize>(ds.segments.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(ds.segments.size() * sizeof(double)))
    throw DataError("'" + bin.string() + "' is shorter than the sidecar declares");
  if (in.peek() != std::char_traits<char>::eof())
    throw DataError("'" + bin.string() + "' is longer than the sidecar declares");
  return ds;
}

// ---------------------------------------------------------------------------

json model_to_json(const SvmModel& model) {
  json svs = json::array();
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    const Eigen::VectorXd row = model.support_vectors.row(i).transpose();
    svs.push_back(vec_to_json(row));
  }
  json kernel = {{"kind", std::string(to_string(model.kernel.kind))}};
  if (model.kernel.kind == KernelKind::poly) {
    kernel["degree"] = model.kernel.degree;
    kernel["offset"] = model.kernel.offset;
  }
  return {{"schema", kSvmSchema},
          {"kernel", kernel},
          {"feature_dim", model.feature_dim},
          {"bias", model.bias},
          {"coefficients", vec_to_json(model.coefficients)},
          {"support_vectors", svs}};
}

SvmModel model_from_json(const json& j) {
  if (j.value("schema", std::string{}) != kSvmSchema)
    throw DataError("document is not a wavedet-svm/1 model");
  SvmModel m;
  const json& k = j.at("kernel");
  m.kernel.kind = kernel_kind_from_string(field<std::string>(k, "kind"));
  if (m.kernel.kind == KernelKind::poly) {
    m.kernel.degree = field<int>(k, "degree");
    m.kernel.offset = field<double>(k, "offset");
  }
  m.feature_dim = field<int>(j, "feature_dim");
  m.bias = field<double>(j, "bias");
  m.coefficients = vec_from_json(j.at("coefficients"));
  const json& svs = j.at("support_vectors");
  if (static_cast<Eigen::Index>(svs.size()) != m.coefficients.size())
    throw DataError("support vector and coefficient counts differ");
  m.support_vectors.resize(m.coefficients.size(), m.feature_dim);
  for (std::size_t i = 0; i < svs.size(); ++i) {
    const Eigen::VectorXd row = vec_from_json(svs[i]);
    if (row.size() != m.feature_dim) throw DataError("support vector has the wrong dimension");
    m.support_vectors.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  m.collapse_linear();
  return m;
}

void save_model(const SvmModel& model, const fs::path& path) {
  write_text(path, model_to_json(model).dump() + "\n");
}

SvmModel load_model(const fs::path& path) {
  const json j = parse_file(path);
  expect_schema(j, kSvmSchema, path);
  return model_from_json(j);
}

json norm_to_json(const FeatureNorm& norm) {
  return {{"mean", vec_to_json(norm.mean)}, {"scale", vec_to_json(norm.scale)}};
}

FeatureNorm norm_from_json(const json& j) {
  FeatureNorm n;
  n.mean = vec_from_json(j.at("mean"));
  n.scale = vec_from_json(j.at("scale"));
  if (n.mean.size() != n.scale.size()) throw DataError("normalization mean/scale sizes differ");
  return n;
}

// ---------------------------------------------------------------------------

void save_pipeline(const IntegrationPipeline& pipe, const fs::path& dir, const BundleInfo& info) {
  pipe.validate();
  fs::create_directories(dir);
  const ShiftBank& bank = pipe.bank;
  json bank_files = json::array();
  json feature_norms = json::array();
  for (std::size_t m = 0; m < bank.size(); ++m) {
    const std::string name = "bank_shift_" + std::to_string(bank.shifts[m]) + ".json";
    save_model(bank.models[m], dir / name);
    bank_files.push_back(name);
    feature_norms.push_back(norm_to_json(bank.feature_norm[m]));
  }
  const std::string integrator_file = "integrator_" + file_tag(bank.shifts) + ".json";
  save_model(pipe.integrator, dir / integrator_file);

  write_text(dir / "normalization.json",
             json{{"feature_norm", feature_norms}, {"score_norm", norm_to_json(pipe.score_norm)}}
                     .dump() +
                 "\n");
  json cal = json::array();
  for (const auto& [target, t] : pipe.calibration)
    cal.push_back({{"pfa_target", target}, {"threshold", threshold_to_json(t)}});
  write_text(dir / "thresholds.json",
             json{{"active", threshold_to_json(pipe.threshold)},
                  {"calibration", cal}}
                     .dump(1) +
                 "\n");

  const json manifest = {
      {"schema", kPipelineSchema},
      {"shifts", bank.shifts},
      {"wavelet",
       {{"family", "daubechies"},
        {"order", bank.extractor.wavelet.order},
        {"levels", bank.extractor.wavelet.levels},
        {"scale", bank.extractor.scale},
        {"boundary", "periodic"}}},
      {"bank_models", bank_files},
      {"integrator_model", integrator_file},
      {"normalization", "normalization.json"},
      {"thresholds", "thresholds.json"},
      {"bank_trials", bank.trained_on},
      {"dataset", {{"seed", info.dataset_seed}, {"path", info.dataset_path}}},
      {"train_seed", info.train_seed}};
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
}

json read_manifest(const fs::path& dir) {
  const json j = parse_file(dir / "manifest.json");
  expect_schema(j, kPipelineSchema, dir / "manifest.json");
  return j;
}

IntegrationPipeline load_pipeline(const fs::path& dir) {
  const json manifest = read_manifest(dir);
  IntegrationPipeline pipe;
  ShiftBank& bank = pipe.bank;
  bank.shifts = field<std::vector<int>>(manifest, "shifts");
  const json& w = manifest.at("wavelet");
  bank.extractor.wavelet.order = field<int>(w, "order");
  bank.extractor.wavelet.levels = field<int>(w, "levels");
  bank.extractor.scale = field<int>(w, "scale");
  bank.trained_on = field<std::vector<std::size_t>>(manifest, "bank_trials");
  for (const auto& name : field<std::vector<std::string>>(manifest, "bank_models"))
    bank.models.push_back(load_model(dir / name));
  pipe.integrator = load_model(dir / field<std::string>(manifest, "integrator_model"));

  const json norms = parse_file(dir / field<std::string>(manifest, "normalization"));
  for (const auto& n : norms.at("feature_norm")) bank.feature_norm.push_back(norm_from_json(n));
  pipe.score_norm = norm_from_json(norms.at("score_norm"));

  const json th = parse_file(dir / field<std::string>(manifest, "thresholds"));
  pipe.threshold = threshold_from_json(th.at("active"));
  for (const auto& c : th.at("calibration"))
    pipe.calibration.emplace_back(c.at("pfa_target").get<double>(),
                                  threshold_from_json(c.at("threshold")));
  try {
    pipe.validate();
  } catch (const ConfigurationError& e) {
    throw DataError("inconsistent pipeline bundle '" + dir.string() + "': " + e.what());
  }
  return pipe;
}

// ---------------------------------------------------------------------------

void write_curves_csv(const PerformanceCurve& curve, const fs::path& path) {
  std::ostringstream os;
  os << "scheme,pfa_target,neg_log10_pfa,mean_pd,n_noise,n_pulse_per_snr,seed\n";
  os << std::setprecision(10);
  for (const auto& p : curve.points)
    os << '"' << p.scheme << "\"," << p.pfa_target << ',' << p.neg_log10_pfa << ',' << p.mean_pd
       << ',' << curve.n_noise << ',' << curve.n_pulse_per_snr << ',' << curve.seed << '\n';
  write_text(path, os.str());
}

void write_correlation_csv(const CorrelationMatrix& corr, const fs::path& path) {
  std::ostringstream os;
  for (std::size_t i = 0; i < corr.labels.size(); ++i) os << (i ? "," : "") << corr.labels[i];
  os << '\n' << std::fixed << std::setprecision(8);
  for (Eigen::Index i = 0; i < corr.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < corr.entries.cols(); ++j) os << (j ? "," : "") << corr.entries(i, j);
    os << '\n';
  }
  write_text(path, os.str());
}

json rates_to_json(const RatesEstimate& r) {
  return {{"schema", kRatesSchema},
          {"snr_db", r.snr_db},
          {"threshold", threshold_to_json(r.threshold)},
          {"p_d", r.p_d},
          {"p_fa", r.p_fa},
          {"trials_pulse", r.trials_pulse},
          {"trials_noise", r.trials_noise},
          {"detections", r.detections},
          {"false_alarms", r.false_alarms},
          {"ci_95",
           {{"p_d", {r.ci_pd.lower, r.ci_pd.upper}}, {"p_fa", {r.ci_pfa.lower, r.ci_pfa.upper}}}}};
}

}  // namespace wavedet::io
