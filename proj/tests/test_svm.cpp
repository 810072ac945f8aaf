#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles/qp_oracle.hpp"
#include "wavedet/error.hpp"
#include "wavedet/svm.hpp"

using namespace wavedet;

namespace {

struct Problem {
  RowMatrix x;
  std::vector<int> y;
};

Problem random_problem(std::uint64_t seed, Eigen::Index n, Eigen::Index dim) {
  Rng rng(seed);
  std::normal_distribution<double> g;
  Problem p{RowMatrix(n, dim), std::vector<int>(static_cast<std::size_t>(n))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int label = (i % 2 == 0) ? 1 : -1;
    p.y[static_cast<std::size_t>(i)] = label;
    for (Eigen::Index d = 0; d < dim; ++d) p.x(i, d) = g(rng) + (d == 0 ? 0.8 * label : 0.0);
  }
  return p;
}

oracle::QpResult oracle_solve(const Problem& p, const TrainConfig& cfg, const KernelSpec& k) {
  const Eigen::MatrixXd gram = kernel_matrix(k, p.x, p.x);
  Eigen::VectorXd y(p.x.rows()), c(p.x.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    y[i] = p.y[static_cast<std::size_t>(i)];
    c[i] = cfg.box(p.y[static_cast<std::size_t>(i)]);
  }
  return oracle::solve_dual_qp(gram, y, c);
}

TrainConfig tight(double cp, double cm) { return {cp, cm, 1e-10, 100000}; }

}  // namespace

TEST_CASE("kernel evaluation") {
  const Eigen::Vector2d x(1, 2), y(3, 4);
  CHECK(kernel_eval(KernelSpec::linear(), x, y) == 11.0);
  CHECK(kernel_eval(KernelSpec::poly(2, 1.0), x, y) == 144.0);
  CHECK(kernel_eval(KernelSpec::poly(2, 1.0), Eigen::Vector2d::Zero(), y) == 1.0);
  CHECK_THROWS_AS(kernel_eval(KernelSpec::linear(), x, Eigen::Vector3d::Ones()), ParameterError);
  CHECK_THROWS_AS(KernelSpec::poly(0).validate(), ParameterError);
  CHECK_THROWS_AS(KernelSpec::poly(2, 0.0).validate(), ParameterError);
}

TEST_CASE("symmetric two-point margin") {
  RowMatrix x(2, 1);
  x << 1.0, -1.0;
  const std::vector<int> y{1, -1};
  const SvmModel m = train(x, y, tight(1e6, 1e6), KernelSpec::linear());
  CHECK(std::abs(m.bias) < 1e-6);
  CHECK(std::abs(decision_value(m, Eigen::VectorXd::Constant(1, 1.0)) - 1.0) < 1e-6);
  CHECK(std::abs(decision_value(m, Eigen::VectorXd::Constant(1, -1.0)) + 1.0) < 1e-6);
  CHECK(std::abs(decision_value(m, Eigen::VectorXd::Zero(1))) < 1e-6);
}

TEST_CASE("XOR layout is separable by the degree-2 kernel") {
  RowMatrix x(8, 2);
  x << 1, 1, 2, 2, -1, -1, -2, -2, 1, -1, 2, -2, -1, 1, -2, 2;
  const std::vector<int> y{1, 1, 1, 1, -1, -1, -1, -1};
  const Problem p{x, y};
  const auto cfg = tight(10.0, 10.0);
  const KernelSpec k = KernelSpec::poly(2, 1.0);
  const SvmModel m = train(x, y, cfg, k);
  for (Eigen::Index i = 0; i < 8; ++i)
    CHECK(classify(m, x.row(i).transpose()) == (y[static_cast<std::size_t>(i)] > 0));
  const DualSolution sol = solve_dual(x, y, cfg, k);
  CHECK(std::abs(dual_objective(x, y, sol.alpha, k) - oracle_solve(p, cfg, k).objective) < 1e-6);
}

TEST_CASE("heavily penalized outlier stays on its side") {
  RowMatrix x(8, 1);
  x << -2.0, -1.5, -1.0, 0.4, 0.5, 1.0, 1.5, 2.0;
  const std::vector<int> y{-1, -1, -1, -1, 1, 1, 1, 1};  // x=0.4 is the noise outlier
  x(3, 0) = 0.9;
  const auto cfg = tight(1.0, 1e6);
  const SvmModel m = train(x, y, cfg, KernelSpec::linear());
  CHECK_FALSE(classify(m, Eigen::VectorXd::Constant(1, 0.9)));
  const DualSolution sol = solve_dual(x, y, cfg, KernelSpec::linear());
  const Problem p{x, y};
  CHECK(std::abs(dual_objective(x, y, sol.alpha, KernelSpec::linear()) -
                 oracle_solve(p, cfg, KernelSpec::linear()).objective) < 1e-6);
}

TEST_CASE("decision value edge cases") {
  SvmModel m;
  m.feature_dim = 3;
  m.bias = 0.3;
  m.support_vectors.resize(0, 3);
  m.coefficients.resize(0);
  CHECK(decision_value(m, Eigen::Vector3d(4, 5, 6)) == 0.3);
  m.collapse_linear();
  CHECK(decision_value(m, Eigen::Vector3d(4, 5, 6)) == 0.3);
  CHECK_THROWS_AS(decision_value(m, Eigen::Vector2d(1, 1)), ParameterError);

  CHECK(classify(m, Eigen::Vector3d::Zero(), -std::numeric_limits<double>::infinity()));
  m.bias = 0.5;
  CHECK_FALSE(classify(m, Eigen::Vector3d::Zero(), 0.5));
  CHECK(classify(m, Eigen::Vector3d::Zero(), 0.0));
}

TEST_CASE("dual objective closed forms") {
  RowMatrix x(2, 1);
  x << 1.0, -1.0;
  const std::vector<int> y{1, -1};
  CHECK(dual_objective(x, y, Eigen::Vector2d::Zero(), KernelSpec::linear()) == 0.0);
  for (double a : {0.1, 0.5, 0.9}) {
    // y1 y2 K12 = (+1)(-1)(-1) = 1, so W = 2a - 1/2 (a^2 + 2a^2 + a^2)
    CHECK(dual_objective(x, y, Eigen::Vector2d(a, a), KernelSpec::linear()) ==
          doctest::Approx(2 * a - 2 * a * a).epsilon(1e-14));
  }
  CHECK_THROWS_AS(dual_objective(x, y, Eigen::Vector3d::Zero(), KernelSpec::linear()),
                  ParameterError);
}

TEST_CASE("training errors") {
  RowMatrix x(3, 2);
  x << 1, 2, 3, 4, 5, 6;
  CHECK_THROWS_AS(train(x, std::vector<int>{1, 1, 1}, TrainConfig{}, KernelSpec::linear()),
                  TrainingError);
  x(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train(x, std::vector<int>{1, -1, 1}, TrainConfig{}, KernelSpec::linear()),
                  ParameterError);
}

TEST_CASE("SMO matches the QP oracle on random 10-point sets") {
  for (int t = 0; t < 20; ++t) {
    CAPTURE(t);
    const Problem p = random_problem(1000 + t, 10, 2 + t % 3);
    const KernelSpec k = (t % 2) ? KernelSpec::poly(2, 1.0) : KernelSpec::linear();
    const auto cfg = tight(1.0, (t % 3 == 0) ? 4.0 : 1.0);
    const DualSolution sol = solve_dual(p.x, p.y, cfg, k, t);
    CHECK(sol.converged);
    const double w = dual_objective(p.x, p.y, sol.alpha, k);
    const double ref = oracle_solve(p, cfg, k).objective;
    CHECK(w >= ref - 1e-6);
    CHECK(w <= ref + 1e-9);
  }
}

TEST_CASE("box and equality constraints on trained models") {
  for (int t = 0; t < 10; ++t) {
    const Problem p = random_problem(2000 + t, 30, 4);
    const TrainConfig cfg{1.0, 4.0, 1e-3, 10000};
    const SvmModel m = train(p.x, p.y, cfg, t % 2 ? KernelSpec::poly(2) : KernelSpec::linear(), t);
    CHECK_NOTHROW(check_model_constraints(m, cfg));
    CHECK(m.support_count() > 0);
    for (Eigen::Index i = 0; i < m.support_count(); ++i) CHECK(m.coefficients[i] != 0.0);
  }
}

TEST_CASE("free support vectors sit on the margin") {
  const Problem p = random_problem(31, 40, 3);
  const TrainConfig cfg{1.0, 4.0, 1e-3, 10000};
  const DualSolution sol = solve_dual(p.x, p.y, cfg, KernelSpec::linear());
  const SvmModel m = train(p.x, p.y, cfg, KernelSpec::linear());
  int free_count = 0;
  for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
    const double c = cfg.box(p.y[static_cast<std::size_t>(i)]);
    if (sol.alpha[i] > 0.0 && sol.alpha[i] < c) {
      ++free_count;
      CHECK(std::abs(std::abs(decision_value(m, p.x.row(i).transpose())) - 1.0) <= cfg.kkt_tol);
    }
  }
  CHECK(free_count > 0);
}

TEST_CASE("label and penalty flip negates the decision function") {
  for (int t = 0; t < 5; ++t) {
    Problem p = random_problem(3000 + t, 24, 3);
    const KernelSpec k = t % 2 ? KernelSpec::poly(2) : KernelSpec::linear();
    const SvmModel a = train(p.x, p.y, tight(1.0, 4.0), k);
    for (int& v : p.y) v = -v;
    const SvmModel b = train(p.x, p.y, tight(4.0, 1.0), k);
    Rng rng(t);
    std::normal_distribution<double> g;
    for (int probe = 0; probe < 100; ++probe) {
      Eigen::VectorXd x(3);
      for (auto& v : x) v = g(rng);
      CHECK(std::abs(decision_value(a, x) + decision_value(b, x)) < 1e-6);
    }
  }
}

TEST_CASE("raising c_minus never adds noise-class training errors") {
  for (int t = 0; t < 5; ++t) {
    const Problem p = random_problem(4000 + t, 60, 3);
    long prev = std::numeric_limits<long>::max();
    for (double cm : {0.25, 1.0, 4.0, 16.0, 64.0}) {
      const SvmModel m = train(p.x, p.y, tight(1.0, cm), KernelSpec::linear(), t);
      long errors = 0;
      for (Eigen::Index i = 0; i < p.x.rows(); ++i)
        if (p.y[static_cast<std::size_t>(i)] < 0 && classify(m, p.x.row(i).transpose())) ++errors;
      CHECK(errors <= prev);
      prev = errors;
    }
  }
}

TEST_CASE("training is deterministic") {
  const Problem p = random_problem(55, 50, 4);
  const SvmModel a = train(p.x, p.y, TrainConfig{}, KernelSpec::poly(2), 9);
  const SvmModel b = train(p.x, p.y, TrainConfig{}, KernelSpec::poly(2), 9);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.bias == b.bias);
}
