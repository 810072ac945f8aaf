#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "wavedet/signal.hpp"

namespace wavedet {

enum class KernelKind : std::uint8_t { linear, poly };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

/// linear: <x, y>.  poly: (<x, y> + offset)^degree.
struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  int degree = 2;
  double offset = 1.0;

  static KernelSpec linear() { return {}; }
  static KernelSpec poly(int degree, double offset = 1.0) {
    return {KernelKind::poly, degree, offset};
  }

  void validate() const;

  double apply(double dot) const;
};

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Eigen::VectorXd>& x,
                   const Eigen::Ref<const Eigen::VectorXd>& y);

/// Gram matrix K(a_i, b_j) for row-sample matrices.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const Eigen::Ref<const RowMatrix>& a,
                              const Eigen::Ref<const RowMatrix>& b);

/// Soft-margin penalties per class: c_plus bounds alpha_i for y_i = +1 (pulse),
/// c_minus for y_i = -1 (noise).
struct TrainConfig {
  double c_plus = 1.0;
  double c_minus = 1.0;
  double kkt_tol = 1e-3;
  long max_passes = 10000;

  void validate() const;

  double box(int label) const noexcept { return label > 0 ? c_plus : c_minus; }
};

struct SvmModel {
  RowMatrix support_vectors;
  Eigen::VectorXd coefficients;  // alpha_i * y_i
  double bias = 0.0;
  KernelSpec kernel;
  int feature_dim = 0;

  /// Explicit weight vector, present for linear kernels.
  std::optional<Eigen::VectorXd> weights;

  Eigen::Index support_count() const noexcept { return coefficients.size(); }

  /// Populates `weights` when the kernel is linear.
  void collapse_linear();
};

/// Raw dual solution over all training points, before support-vector pruning.
struct DualSolution {
  Eigen::VectorXd alpha;
  Eigen::VectorXd gradient;  // of 1/2 a'Qa - e'a
  double bias = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// SMO on the soft-margin dual with boxes [0, C+] / [0, C-] and
/// maximal-violating-pair working sets. Stops when the KKT gap falls below
/// cfg.kkt_tol or after cfg.max_passes * n pair updates. `seed` fixes the
/// scan order used to break ties between equally violating indices.
DualSolution solve_dual(const Eigen::Ref<const RowMatrix>& samples, std::span<const int> labels,
                        const TrainConfig& cfg, const KernelSpec& kernel,
                        std::uint64_t seed = 0);

SvmModel train(const Eigen::Ref<const RowMatrix>& samples, std::span<const int> labels,
               const TrainConfig& cfg, const KernelSpec& kernel, std::uint64_t seed = 0);

/// f(x) = sum_i coef_i K(sv_i, x) + bias, the "smooth output".
double decision_value(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

/// decision_value(model, x) > threshold. Ties go to the noise class.
bool classify(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x,
              double threshold = 0.0);

/// W(a) = sum a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j).
double dual_objective(const Eigen::Ref<const RowMatrix>& samples, std::span<const int> labels,
                      const Eigen::Ref<const Eigen::VectorXd>& alphas,
                      const KernelSpec& kernel);

/// Throws InvariantError if the box or equality constraints fail. The label
/// of each support vector is the sign of its coefficient.
void check_model_constraints(const SvmModel& model, const TrainConfig& cfg,
                             double eq_tol = 1e-6);

}  // namespace wavedet
