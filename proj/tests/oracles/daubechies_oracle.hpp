#pragma once

// Daubechies lowpass filters by spectral factorization, independent of the
// embedded coefficient tables.
//
// |H(w)|^2 = cos^{2p}(w/2) P(sin^2(w/2)), P(y) = sum_{k<p} C(p-1+k, k) y^k.
// Each root y of P maps to a reciprocal pair z, 1/z through
// y = (2 - z - 1/z) / 4; keeping |z| < 1 gives the extremal-phase filter.

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <vector>

namespace oracle {

inline std::vector<double> daubechies_lowpass(int p) {
  using cd = std::complex<double>;
  std::vector<cd> poly{1.0};  // coefficients in z^{-1}, ascending
  auto multiply = [&poly](cd a0, cd a1) {  // poly *= (a0 + a1 z^{-1})
    std::vector<cd> out(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      out[i] += a0 * poly[i];
      out[i + 1] += a1 * poly[i];
    }
    poly = std::move(out);
  };
  for (int i = 0; i < p; ++i) multiply(0.5, 0.5);

  if (p > 1) {
    const int deg = p - 1;
    Eigen::VectorXd c(deg + 1);
    for (int k = 0; k <= deg; ++k) c(k) = std::round(std::tgamma(p + k) / (std::tgamma(k + 1) * std::tgamma(p)));
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -c(i) / c(deg);
    const Eigen::VectorXcd ys = Eigen::EigenSolver<Eigen::MatrixXd>(companion).eigenvalues();
    for (Eigen::Index r = 0; r < ys.size(); ++r) {
      // z^2 - (2 - 4y) z + 1 = 0
      const cd b = 2.0 - 4.0 * ys(r);
      const cd disc = std::sqrt(b * b - 4.0);
      cd z = (b + disc) / 2.0;
      if (std::abs(z) > 1.0) z = 1.0 / z;
      multiply(1.0, -z);
    }
  }

  std::vector<double> h(poly.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    h[i] = poly[i].real();
    sum += h[i];
  }
  for (double& v : h) v *= std::sqrt(2.0) / sum;
  return h;
}

}  // namespace oracle
