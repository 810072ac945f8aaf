#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wavedet/error.hpp"

namespace wavedet {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Orthonormal two-channel filter bank. highpass[k] = (-1)^k lowpass[W-1-k].
template <typename Scalar = double>
struct FilterPair {
  Vec<Scalar> lowpass;
  Vec<Scalar> highpass;
  int order = 0;

  Eigen::Index width() const noexcept { return lowpass.size(); }
};

namespace detail {
/// Embedded minimum-phase Daubechies lowpass filters, orders 1..10.
std::span<const double> daubechies_table(int order);
}  // namespace detail

/// Throws InvariantError unless `f` is an orthonormal QMF pair: unit energy,
/// lowpass sum sqrt(2), even-shift orthogonality, alternating-flip highpass.
template <typename Scalar>
void check_filter_pair(const FilterPair<Scalar>& f, double tol = -1.0) {
  using std::abs;
  if (tol < 0.0)
    tol = std::max(1e-12, 64.0 * double(Eigen::NumTraits<Scalar>::epsilon()));
  const Eigen::Index w = f.width();
  if (w == 0 || w % 2 != 0 || f.highpass.size() != w)
    throw InvariantError("filter pair must have equal, even length");
  if (abs(double(f.lowpass.sum()) - std::sqrt(2.0)) > tol)
    throw InvariantError("lowpass sum differs from sqrt(2)");
  for (Eigen::Index m = 0; 2 * m < w; ++m) {
    double acc = 0.0;
    for (Eigen::Index n = 0; n + 2 * m < w; ++n)
      acc += double(f.lowpass[n] * f.lowpass[n + 2 * m]);
    if (abs(acc - (m == 0 ? 1.0 : 0.0)) > tol)
      throw InvariantError("lowpass fails even-shift orthogonality at m=" +
                           std::to_string(m));
  }
  for (Eigen::Index k = 0; k < w; ++k) {
    const Scalar expect = (k % 2 == 0 ? Scalar(1) : Scalar(-1)) * f.lowpass[w - 1 - k];
    if (abs(double(f.highpass[k] - expect)) > tol)
      throw InvariantError("highpass is not the alternating flip of lowpass");
  }
}

/// Daubechies pair with `order` vanishing moments (W = 2 * order taps).
template <typename Scalar = double>
FilterPair<Scalar> daubechies_filters(int order) {
  if (order < 1 || order > 10)
    throw ParameterError("Daubechies order must be in [1, 10], got " +
                         std::to_string(order));
  const auto table = detail::daubechies_table(order);
  const auto w = static_cast<Eigen::Index>(table.size());
  FilterPair<Scalar> f;
  f.order = order;
  f.lowpass.resize(w);
  f.highpass.resize(w);
  for (Eigen::Index k = 0; k < w; ++k) {
    f.lowpass[k] = Scalar(table[static_cast<std::size_t>(k)]);
    f.highpass[k] = (k % 2 == 0 ? Scalar(1) : Scalar(-1)) *
                    Scalar(table[static_cast<std::size_t>(w - 1 - k)]);
  }
  check_filter_pair(f);
  return f;
}

enum class Boundary { periodic };

struct WaveletConfig {
  int order = 5;
  int levels = 4;
  Boundary boundary = Boundary::periodic;

  /// Throws ParameterError unless 2^levels divides `length`.
  void validate(Eigen::Index length) const {
    if (order < 1 || order > 10)
      throw ParameterError("wavelet order must be in [1, 10]");
    if (levels < 1 || levels > 30)
      throw ParameterError("wavelet levels must be positive");
    const Eigen::Index block = Eigen::Index{1} << levels;
    if (length <= 0 || length % block != 0)
      throw ParameterError("signal length " + std::to_string(length) +
                           " is not divisible by 2^" + std::to_string(levels));
  }
};

/// Mallat pyramid. details[j-1] holds the level-j detail band d_j (length
/// H / 2^j); approx holds the final coarse band (length H / 2^K).
template <typename Scalar = double>
struct CoefficientPyramid {
  std::vector<Vec<Scalar>> details;
  Vec<Scalar> approx;
  std::uint64_t op_count = 0;

  int levels() const noexcept { return static_cast<int>(details.size()); }

  Eigen::Index signal_length() const noexcept {
    return details.empty() ? approx.size() : 2 * details.front().size();
  }

  Scalar energy() const {
    Scalar e = approx.squaredNorm();
    for (const auto& d : details) e += d.squaredNorm();
    return e;
  }
};

namespace detail {

// out[n] = sum_k f[k] x[(2n - k) mod L], n < L/2. Periodic convolution
// followed by keeping the even-indexed outputs.
template <typename Scalar>
void analysis_step(const Vec<Scalar>& x, const Vec<Scalar>& f, Vec<Scalar>& out) {
  const Eigen::Index len = x.size();
  const Eigen::Index half = len / 2;
  const Eigen::Index w = f.size();
  out.resize(half);
  for (Eigen::Index n = 0; n < half; ++n) {
    Scalar acc(0);
    const Eigen::Index base = 2 * n;
    if (base >= w - 1) {
      for (Eigen::Index k = 0; k < w; ++k) acc += f[k] * x[base - k];
    } else {
      for (Eigen::Index k = 0; k < w; ++k) {
        Eigen::Index idx = (base - k) % len;
        if (idx < 0) idx += len;
        acc += f[k] * x[idx];
      }
    }
    out[n] = acc;
  }
}

// Adjoint of analysis_step for both channels: scatter into a length-2n output.
template <typename Scalar>
void synthesis_step(const Vec<Scalar>& approx, const Vec<Scalar>& detail,
                    const FilterPair<Scalar>& f, Vec<Scalar>& out) {
  const Eigen::Index half = approx.size();
  const Eigen::Index len = 2 * half;
  const Eigen::Index w = f.width();
  out.setZero(len);
  for (Eigen::Index n = 0; n < half; ++n) {
    const Eigen::Index base = 2 * n;
    for (Eigen::Index k = 0; k < w; ++k) {
      Eigen::Index idx = (base - k) % len;
      if (idx < 0) idx += len;
      out[idx] += approx[n] * f.lowpass[k] + detail[n] * f.highpass[k];
    }
  }
}

}  // namespace detail

/// Forward periodic DWT with precomputed filters. op_count grows by W
/// multiply-adds per output coefficient of either channel.
template <typename Derived>
CoefficientPyramid<typename Derived::Scalar> dwt(
    const Eigen::MatrixBase<Derived>& signal,
    const FilterPair<typename Derived::Scalar>& filters, int levels) {
  using Scalar = typename Derived::Scalar;
  WaveletConfig{filters.order, levels}.validate(signal.size());
  CoefficientPyramid<Scalar> pyr;
  pyr.details.resize(static_cast<std::size_t>(levels));
  Vec<Scalar> current = signal;
  Vec<Scalar> next;
  const auto w = static_cast<std::uint64_t>(filters.width());
  for (int j = 0; j < levels; ++j) {
    detail::analysis_step(current, filters.highpass, pyr.details[static_cast<std::size_t>(j)]);
    detail::analysis_step(current, filters.lowpass, next);
    pyr.op_count += w * static_cast<std::uint64_t>(current.size());
    current.swap(next);
  }
  pyr.approx = std::move(current);
  return pyr;
}

template <typename Derived>
CoefficientPyramid<typename Derived::Scalar> dwt(const Eigen::MatrixBase<Derived>& signal,
                                                 const WaveletConfig& cfg) {
  cfg.validate(signal.size());
  return dwt(signal, daubechies_filters<typename Derived::Scalar>(cfg.order), cfg.levels);
}

/// Inverse of dwt; exact up to rounding for orthonormal filters.
template <typename Scalar>
Vec<Scalar> idwt(const CoefficientPyramid<Scalar>& pyr, const FilterPair<Scalar>& filters) {
  if (pyr.details.empty()) throw ParameterError("pyramid has no detail levels");
  Vec<Scalar> current = pyr.approx;
  Vec<Scalar> next;
  for (int j = pyr.levels() - 1; j >= 0; --j) {
    const auto& d = pyr.details[static_cast<std::size_t>(j)];
    if (d.size() != current.size())
      throw ParameterError("pyramid level " + std::to_string(j + 1) +
                           " has inconsistent length");
    detail::synthesis_step(current, d, filters, next);
    current.swap(next);
  }
  return current;
}

template <typename Scalar>
Vec<Scalar> idwt(const CoefficientPyramid<Scalar>& pyr, const WaveletConfig& cfg) {
  if (pyr.levels() != cfg.levels)
    throw ParameterError("pyramid depth does not match wavelet config");
  cfg.validate(pyr.signal_length());
  return idwt(pyr, daubechies_filters<Scalar>(cfg.order));
}

/// The d_k band, 1 <= k <= levels.
template <typename Scalar>
const Vec<Scalar>& extract_scale(const CoefficientPyramid<Scalar>& pyr, int k) {
  if (k < 1 || k > pyr.levels())
    throw ParameterError("scale " + std::to_string(k) + " outside [1, " +
                         std::to_string(pyr.levels()) + "]");
  return pyr.details[static_cast<std::size_t>(k - 1)];
}

/// Closed-form multiply-add count of a K-level transform of length H with W
/// taps: sum_{j=1..K} W * H / 2^(j-1).
constexpr std::uint64_t dwt_op_count(std::uint64_t length, std::uint64_t width,
                                     int levels) noexcept {
  std::uint64_t total = 0;
  for (int j = 0; j < levels; ++j) total += width * (length >> j);
  return total;
}

}  // namespace wavedet
