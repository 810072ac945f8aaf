#include "wavedet/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "wavedet/error.hpp"
#include "wavedet/io.hpp"

namespace wavedet {

using nlohmann::json;

namespace {

json counts_to_json(const PartitionCounts& c) {
  return {{"bank", c.bank}, {"integrator", c.integrator}, {"calibration", c.calibration},
          {"test", c.test}};
}

json train_to_json(const TrainConfig& t) {
  return {{"c_plus", t.c_plus}, {"c_minus", t.c_minus}, {"kkt_tol", t.kkt_tol},
          {"max_passes", t.max_passes}};
}

json kernel_to_json(const KernelSpec& k) {
  return {{"kind", std::string(to_string(k.kind))}, {"degree", k.degree}, {"offset", k.offset}};
}

// Overlays `patch` onto `base`, rejecting keys `base` does not have.
void merge_strict(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) {
    base = patch;
    return;
  }
  if (!base.is_object()) throw ConfigurationError("'" + where + "' is not an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (!base.contains(it.key())) throw ConfigurationError("unknown config key '" + path + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) merge_strict(slot, it.value(), path);
    else slot = it.value();
  }
}

template <typename T>
T get(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("config field '") + key + "': " + e.what());
  }
}

PartitionCounts counts_from_json(const json& j) {
  return {get<long>(j, "bank"), get<long>(j, "integrator"), get<long>(j, "calibration"),
          get<long>(j, "test")};
}

TrainConfig train_from_json(const json& j) {
  return {get<double>(j, "c_plus"), get<double>(j, "c_minus"), get<double>(j, "kkt_tol"),
          get<long>(j, "max_passes")};
}

KernelSpec kernel_from_json(const json& j) {
  KernelSpec k;
  try {
    k.kind = kernel_kind_from_string(get<std::string>(j, "kind"));
  } catch (const ParameterError& e) {
    throw ConfigurationError(e.what());
  }
  k.degree = get<int>(j, "degree");
  k.offset = get<double>(j, "offset");
  return k;
}

}  // namespace

json to_json(const ExperimentConfig& cfg) {
  return {
      {"pulse", io::to_json(cfg.pulse)},
      {"noise", {{"sigma", cfg.sigma}}},
      {"shifts", cfg.shifts},
      {"wavelet",
       {{"order", cfg.features.wavelet.order},
        {"levels", cfg.features.wavelet.levels},
        {"scale", cfg.features.scale}}},
      {"svm",
       {{"bank", train_to_json(cfg.bank_svm)},
        {"integrator", train_to_json(cfg.integrator_svm)},
        {"integrator_kernel", kernel_to_json(cfg.integrator_kernel)}}},
      {"integrators", cfg.integrators},
      {"snr_grid", cfg.snr_grid},
      {"pfa_targets", cfg.pfa_targets},
      {"counts", {{"pulse", counts_to_json(cfg.counts.pulse)}, {"noise", counts_to_json(cfg.counts.noise)}}},
      {"seed", cfg.seed},
      {"output_dir", cfg.output_dir},
      {"eval",
       {{"n_noise", cfg.eval.n_noise},
        {"n_pulse_per_snr", cfg.eval.n_pulse_per_snr},
        {"corr_observations", cfg.eval.corr_observations},
        {"corr_snr_db", cfg.eval.corr_snr_db},
        {"rates_snr_db", cfg.eval.rates_snr_db},
        {"rates_pulse", cfg.eval.rates_pulse},
        {"rates_noise", cfg.eval.rates_noise}}},
      {"workers", cfg.workers}};
}

ExperimentConfig config_from_json(const json& patch) {
  json doc = to_json(ExperimentConfig{});
  merge_strict(doc, patch, "");

  ExperimentConfig cfg;
  try {
    cfg.pulse = io::pulse_from_json(doc.at("pulse"));
  } catch (const DataError& e) {
    throw ConfigurationError(e.what());
  }
  cfg.sigma = get<double>(doc.at("noise"), "sigma");
  cfg.shifts = get<std::vector<int>>(doc, "shifts");
  const json& w = doc.at("wavelet");
  cfg.features.wavelet.order = get<int>(w, "order");
  cfg.features.wavelet.levels = get<int>(w, "levels");
  cfg.features.scale = get<int>(w, "scale");
  const json& svm = doc.at("svm");
  cfg.bank_svm = train_from_json(svm.at("bank"));
  cfg.integrator_svm = train_from_json(svm.at("integrator"));
  cfg.integrator_kernel = kernel_from_json(svm.at("integrator_kernel"));
  cfg.integrators = get<std::vector<std::vector<int>>>(doc, "integrators");
  cfg.snr_grid = get<std::vector<double>>(doc, "snr_grid");
  cfg.pfa_targets = get<std::vector<double>>(doc, "pfa_targets");
  cfg.counts.pulse = counts_from_json(doc.at("counts").at("pulse"));
  cfg.counts.noise = counts_from_json(doc.at("counts").at("noise"));
  cfg.seed = get<std::uint64_t>(doc, "seed");
  cfg.output_dir = get<std::string>(doc, "output_dir");
  const json& e = doc.at("eval");
  cfg.eval.n_noise = get<long>(e, "n_noise");
  cfg.eval.n_pulse_per_snr = get<long>(e, "n_pulse_per_snr");
  cfg.eval.corr_observations = get<long>(e, "corr_observations");
  cfg.eval.corr_snr_db = get<double>(e, "corr_snr_db");
  cfg.eval.rates_snr_db = get<double>(e, "rates_snr_db");
  cfg.eval.rates_pulse = get<long>(e, "rates_pulse");
  cfg.eval.rates_noise = get<long>(e, "rates_noise");
  cfg.workers = get<unsigned>(doc, "workers");
  return cfg;
}

void ExperimentConfig::validate() const {
  try {
    pulse.validate();
    NoiseSpec{sigma, seed}.validate();
    features.validate(pulse.n_samples);
    bank_svm.validate();
    integrator_svm.validate();
    integrator_kernel.validate();
  } catch (const ParameterError& e) {
    throw ConfigurationError(e.what());
  }
  if (shifts.empty() || shifts.front() != 0)
    throw ConfigurationError("shifts must be non-empty and start at 0");
  for (std::size_t i = 1; i < shifts.size(); ++i)
    if (shifts[i] <= shifts[i - 1])
      throw ConfigurationError("shifts must be strictly increasing");
  if (shifts.back() >= pulse.n_samples)
    throw ConfigurationError("shifts must be smaller than the window length");
  for (const auto& in : integrators) {
    if (in.empty()) throw ConfigurationError("integrator with no inputs");
    for (int d : in)
      if (std::find(shifts.begin(), shifts.end(), d) == shifts.end())
        throw ConfigurationError("integrator input " + std::to_string(d) + " is not a bank shift");
    if (in.front() != 0 || !std::is_sorted(in.begin(), in.end()) ||
        std::adjacent_find(in.begin(), in.end()) != in.end())
      throw ConfigurationError("integrator inputs must be increasing and start at shift 0");
  }
  if (snr_grid.empty()) throw ConfigurationError("snr_grid is empty");
  for (double s : snr_grid)
    if (!std::isfinite(s)) throw ConfigurationError("snr_grid entries must be finite");
  if (pfa_targets.empty()) throw ConfigurationError("pfa_targets is empty");
  for (double p : pfa_targets)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigurationError("pfa_targets must lie in (0, 1]");
  for (Partition p : kAllPartitions)
    if (counts.pulse.of(p) < 0 || counts.noise.of(p) < 0)
      throw ConfigurationError("dataset counts must be non-negative");
  if (counts.total() <= 0) throw ConfigurationError("dataset counts are all zero");
  if (output_dir.empty()) throw ConfigurationError("output_dir is empty");
  if (eval.n_noise <= 0 || eval.n_pulse_per_snr <= 0 || eval.corr_observations < 2 ||
      eval.rates_pulse <= 0 || eval.rates_noise <= 0)
    throw ConfigurationError("eval sample counts must be positive");
  if (workers < 1) throw ConfigurationError("workers must be >= 1");
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigurationError("override '" + std::string(assignment) + "' is not key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigurationError("malformed override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::optional<std::string>& path,
                             const std::vector<std::string>& overrides, const char* env_seed) {
  json doc = json::object();
  if (path) {
    try {
      doc = json::parse(io::read_text(*path));
    } catch (const json::exception& e) {
      throw ConfigurationError("config '" + *path + "' is not valid JSON: " + e.what());
    } catch (const DataError& e) {
      throw ConfigurationError(e.what());
    }
    if (!doc.is_object()) throw ConfigurationError("config root must be an object");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  if (env_seed && *env_seed) {
    try {
      std::size_t used = 0;
      const auto seed = std::stoull(env_seed, &used);
      if (used != std::string_view(env_seed).size()) throw std::invalid_argument("trailing");
      doc["seed"] = seed;
    } catch (const std::exception&) {
      throw ConfigurationError(std::string("WAVEDET_SEED='") + env_seed + "' is not an integer");
    }
  }
  ExperimentConfig cfg = config_from_json(doc);
  cfg.validate();
  return cfg;
}

}  // namespace wavedet
