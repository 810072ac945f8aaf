#include "wavedet/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "wavedet/error.hpp"

namespace wavedet {

std::string_view to_string(KernelKind kind) {
  return kind == KernelKind::linear ? "linear" : "poly";
}

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "poly") return KernelKind::poly;
  throw ParameterError("unknown kernel kind '" + std::string(name) + "'");
}

void KernelSpec::validate() const {
  if (kind == KernelKind::poly) {
    if (degree < 1) throw ParameterError("polynomial kernel degree must be >= 1");
    if (!(offset > 0.0) || !std::isfinite(offset))
      throw ParameterError("inhomogeneous polynomial kernel needs offset > 0");
  }
}

double KernelSpec::apply(double dot) const {
  if (kind == KernelKind::linear) return dot;
  const double base = dot + offset;
  double out = 1.0;
  for (int d = 0; d < degree; ++d) out *= base;
  return out;
}

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size())
    throw ParameterError("kernel arguments differ in dimension (" +
                         std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  return spec.apply(x.dot(y));
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const RowMatrix>& a,
                              const Eigen::Ref<const RowMatrix>& b) {
  if (a.cols() != b.cols()) throw ParameterError("kernel_matrix dimension mismatch");
  Eigen::MatrixXd gram = a * b.transpose();
  if (spec.kind != KernelKind::linear)
    gram = gram.unaryExpr([&spec](double v) { return spec.apply(v); });
  return gram;
}

void TrainConfig::validate() const {
  if (!(c_plus > 0.0) || !(c_minus > 0.0))
    throw ParameterError("SVM penalties c_plus and c_minus must be positive");
  if (!(kkt_tol > 0.0)) throw ParameterError("kkt_tol must be positive");
  if (max_passes < 1) throw ParameterError("max_passes must be >= 1");
}

void SvmModel::collapse_linear() {
  if (kernel.kind != KernelKind::linear) {
    weights.reset();
    return;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(feature_dim);
  if (support_count() > 0) w = support_vectors.transpose() * coefficients;
  weights = std::move(w);
}

namespace {

// Gram rows on demand. Holds the whole matrix when it fits the budget,
// otherwise an LRU set of rows.
class KernelRows {
 public:
  KernelRows(const Eigen::Ref<const RowMatrix>& x, const KernelSpec& spec,
             std::size_t budget_bytes = std::size_t{512} << 20)
      : x_(x), spec_(spec) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n * n * sizeof(double) <= budget_bytes) {
      full_ = kernel_matrix(spec, x, x);
    } else {
      capacity_ = std::max<std::size_t>(2, budget_bytes / (n * sizeof(double)));
    }
    diag_.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) diag_[i] = spec.apply(x.row(i).squaredNorm());
  }

  const Eigen::VectorXd& diagonal() const { return diag_; }

  // Column i of the Gram matrix. The reference stays valid until the next call
  // in cached mode, so callers copy when they need two rows at once.
  Eigen::Ref<const Eigen::VectorXd> row(Eigen::Index i) {
    if (full_.size() > 0) return full_.col(i);
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Eigen::VectorXd r = x_ * x_.row(i).transpose();
    if (spec_.kind != KernelKind::linear)
      r = r.unaryExpr([this](double v) { return spec_.apply(v); });
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  Eigen::Ref<const RowMatrix> x_;
  KernelSpec spec_;
  Eigen::MatrixXd full_;
  Eigen::VectorXd diag_;
  std::size_t capacity_ = 0;
  std::list<std::pair<Eigen::Index, Eigen::VectorXd>> lru_;
  std::unordered_map<Eigen::Index,
                     std::list<std::pair<Eigen::Index, Eigen::VectorXd>>::iterator>
      index_;
};

void validate_training_set(const Eigen::Ref<const RowMatrix>& samples,
                           std::span<const int> labels) {
  if (samples.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ParameterError("sample and label counts differ");
  if (samples.rows() == 0) throw TrainingError("empty training set");
  if (!samples.allFinite()) throw ParameterError("training features contain non-finite values");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) pos = true;
    else if (y == -1) neg = true;
    else throw ParameterError("labels must be +1 or -1");
  }
  if (!pos || !neg) throw TrainingError("training set must contain both classes");
}

}  // namespace

DualSolution solve_dual(const Eigen::Ref<const RowMatrix>& samples, std::span<const int> labels,
                        const TrainConfig& cfg, const KernelSpec& kernel,
                        std::uint64_t seed) {
  cfg.validate();
  kernel.validate();
  validate_training_set(samples, labels);

  const Eigen::Index n = samples.rows();
  Eigen::VectorXd y(n), upper(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    y[t] = labels[static_cast<std::size_t>(t)];
    upper[t] = cfg.box(labels[static_cast<std::size_t>(t)]);
  }

  // Seeded scan order; the first index in this order wins ties.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  {
    Rng rng = Rng::substream(seed, stream::kSvm, static_cast<std::uint64_t>(n));
    for (std::size_t k = order.size(); k > 1; --k)
      std::swap(order[k - 1], order[static_cast<std::size_t>(rng() % k)]);
  }

  KernelRows rows(samples, kernel);
  const Eigen::VectorXd& kdiag = rows.diagonal();

  DualSolution sol;
  sol.alpha = Eigen::VectorXd::Zero(n);
  sol.gradient = Eigen::VectorXd::Constant(n, -1.0);
  Eigen::VectorXd& a = sol.alpha;
  Eigen::VectorXd& g = sol.gradient;

  constexpr double kTau = 1e-12;
  const long max_iter = cfg.max_passes * std::max<long>(n, 1);
  Eigen::VectorXd ki, kj;

  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t : order) {
      const double v = -y[t] * g[t];
      const bool up = (y[t] > 0) ? a[t] < upper[t] : a[t] > 0.0;
      const bool low = (y[t] > 0) ? a[t] > 0.0 : a[t] < upper[t];
      if (up && v > gmax) {
        gmax = v;
        i = t;
      }
      if (low && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < cfg.kkt_tol) {
      sol.converged = true;
      break;
    }

    ki = rows.row(i);
    kj = rows.row(j);
    const double ci = upper[i], cj = upper[j];
    const double old_ai = a[i], old_aj = a[j];
    const double qij = y[i] * y[j] * ki[j];

    if (y[i] != y[j]) {
      double quad = kdiag[i] + kdiag[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) {
          a[j] = 0.0;
          a[i] = diff;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = -diff;
      }
      if (diff > ci - cj) {
        if (a[i] > ci) {
          a[i] = ci;
          a[j] = ci - diff;
        }
      } else if (a[j] > cj) {
        a[j] = cj;
        a[i] = cj + diff;
      }
    } else {
      double quad = kdiag[i] + kdiag[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > ci) {
        if (a[i] > ci) {
          a[i] = ci;
          a[j] = sum - ci;
        }
      } else if (a[j] < 0.0) {
        a[j] = 0.0;
        a[i] = sum;
      }
      if (sum > cj) {
        if (a[j] > cj) {
          a[j] = cj;
          a[i] = sum - cj;
        }
      } else if (a[i] < 0.0) {
        a[i] = 0.0;
        a[j] = sum;
      }
    }

    const double dai = (a[i] - old_ai) * y[i];
    const double daj = (a[j] - old_aj) * y[j];
    g.array() += y.array() * (ki.array() * dai + kj.array() * daj);
  }

  // Bias from the KKT conditions: mean over free vectors, else the midpoint
  // of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  long n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * g[t];
    if (a[t] >= upper[t]) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (a[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);
  sol.bias = -rho;
  return sol;
}

SvmModel train(const Eigen::Ref<const RowMatrix>& samples, std::span<const int> labels,
               const TrainConfig& cfg, const KernelSpec& kernel, std::uint64_t seed) {
  const DualSolution sol = solve_dual(samples, labels, cfg, kernel, seed);

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < sol.alpha.size(); ++t)
    if (sol.alpha[t] > 0.0) sv.push_back(t);

  SvmModel model;
  model.kernel = kernel;
  model.feature_dim = static_cast<int>(samples.cols());
  model.bias = sol.bias;
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), samples.cols());
  model.coefficients.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    model.support_vectors.row(row) = samples.row(sv[k]);
    model.coefficients[row] = sol.alpha[sv[k]] * labels[static_cast<std::size_t>(sv[k])];
  }
  model.collapse_linear();
  return model;
}

double decision_value(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.feature_dim)
    throw ParameterError("feature vector has dimension " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(model.feature_dim));
  if (model.weights) return model.weights->dot(x) + model.bias;
  double f = model.bias;
  for (Eigen::Index i = 0; i < model.support_count(); ++i)
    f += model.coefficients[i] * model.kernel.apply(model.support_vectors.row(i).dot(x));
  return f;
}

bool classify(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
              double threshold) {
  return decision_value(model, x) > threshold;
}

double dual_objective(const Eigen::Ref<const RowMatrix>& samples, std::span<const int> labels,
                      const Eigen::Ref<const Eigen::VectorXd>& alphas,
                      const KernelSpec& kernel) {
  const Eigen::Index n = samples.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n || alphas.size() != n)
    throw ParameterError("dual_objective: samples, labels and alphas differ in size");
  Eigen::VectorXd ay(n);
  for (Eigen::Index t = 0; t < n; ++t) ay[t] = alphas[t] * labels[static_cast<std::size_t>(t)];
  const Eigen::MatrixXd gram = kernel_matrix(kernel, samples, samples);
  return alphas.sum() - 0.5 * ay.dot(gram * ay);
}

void check_model_constraints(const SvmModel& model, const TrainConfig& cfg, double eq_tol) {
  for (Eigen::Index i = 0; i < model.support_count(); ++i) {
    const double c = model.coefficients[i];
    const double box = c > 0 ? cfg.c_plus : cfg.c_minus;
    if (std::abs(c) > box * (1.0 + 1e-12))
      throw InvariantError("support vector " + std::to_string(i) + " violates its box");
  }
  if (std::abs(model.coefficients.sum()) > eq_tol)
    throw InvariantError("dual equality constraint sum(alpha*y) = 0 violated");
}

}  // namespace wavedet
