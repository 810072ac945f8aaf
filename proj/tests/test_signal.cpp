#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "wavedet/error.hpp"
#include "wavedet/signal.hpp"

using namespace wavedet;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// One-sample Kolmogorov-Smirnov statistic against N(0, sigma^2).
double ks_statistic(std::vector<double> xs, double sigma) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i] / sigma);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

Eigen::VectorXd half_power_pulse(int n) {
  // sin over an integer number of periods: mean square exactly 0.5
  Eigen::VectorXd p(n);
  for (int i = 0; i < n; ++i) p[i] = std::sin(2.0 * std::numbers::pi * 8.0 * i / n);
  return p;
}

}  // namespace

TEST_CASE("chirp has unit amplitude and sweeps its band") {
  const PulseSpec spec;
  const Eigen::VectorXd s = generate_chirp(spec);
  CHECK(s.size() == 1024);
  CHECK(s.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(s[0] == doctest::Approx(0.0));
  // Instantaneous phase increment at both ends matches f_start / f_end.
  const double t0 = 2.0 * std::numbers::pi * spec.f_start;
  CHECK(std::asin(s[1]) == doctest::Approx(t0 + 2.0 * std::numbers::pi * (spec.f_end - spec.f_start) / 2048.0).epsilon(1e-9));
}

TEST_CASE("pulse spec validation") {
  CHECK_THROWS_AS(generate_chirp(PulseSpec{1000, 0.02, 0.12, 0.0}), ParameterError);
  CHECK_THROWS_AS(generate_chirp(PulseSpec{1024, 0.12, 0.02, 0.0}), ParameterError);
  CHECK_THROWS_AS(generate_chirp(PulseSpec{1024, 0.02, 0.5, 0.0}), ParameterError);
}

TEST_CASE("awgn moments at 1e6 samples") {
  const Eigen::VectorXd x = generate_awgn(1'000'000, NoiseSpec{1.0, 7});
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / (x.size() - 1));
  CHECK(std::abs(mean) < 0.01);
  CHECK(sd >= 0.995);
  CHECK(sd <= 1.005);

  const Eigen::VectorXd y = generate_awgn(1'000'000, NoiseSpec{2.0, 8});
  const double sd2 = std::sqrt((y.array() - y.mean()).square().sum() / (y.size() - 1));
  CHECK(sd2 == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("awgn is reproducible from its seed") {
  const Eigen::VectorXd a = generate_awgn(4096, NoiseSpec{1.0, 42});
  const Eigen::VectorXd b = generate_awgn(4096, NoiseSpec{1.0, 42});
  const Eigen::VectorXd c = generate_awgn(4096, NoiseSpec{1.0, 43});
  CHECK(a == b);
  CHECK(a != c);
  CHECK_THROWS_AS(generate_awgn(0, NoiseSpec{}), ParameterError);
  CHECK_THROWS_AS(generate_awgn(10, NoiseSpec{0.0, 1}), ParameterError);
}

TEST_CASE("snr_amplitude closed forms") {
  const Eigen::VectorXd p = half_power_pulse(1024);
  REQUIRE(p.squaredNorm() / 1024.0 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(snr_amplitude(0.0, p, 1.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(snr_amplitude(-15.0, p, 1.0) == doctest::Approx(std::sqrt(2.0 * std::pow(10.0, -1.5))).epsilon(1e-12));
  CHECK(snr_amplitude(-15.0, p, 1.0) == doctest::Approx(0.2515).epsilon(1e-3));
  CHECK(snr_amplitude(-std::numeric_limits<double>::infinity(), p, 1.0) == 0.0);
  CHECK(snr_amplitude(-300.0, p, 1.0) < 1e-14);
  CHECK_THROWS_AS(snr_amplitude(0.0, Eigen::VectorXd::Zero(16), 1.0), DegenerateInputError);
}

TEST_CASE("snr_amplitude is strictly increasing") {
  const Eigen::VectorXd p = generate_chirp(PulseSpec{});
  double prev = snr_amplitude(-40.0, p, 1.0);
  for (double db = -39.75; db <= 20.0; db += 0.25) {
    const double a = snr_amplitude(db, p, 1.0);
    CHECK(a > prev);
    prev = a;
  }
}

TEST_CASE("assemble_window geometry") {
  const Eigen::VectorXd p = generate_chirp(PulseSpec{});
  const NoiseSpec noise{1.0, 0};

  SUBCASE("11-shift: 11 leading noise samples, 1013 pulse samples") {
    Rng r1(5), r2(5);
    const auto w = assemble_window(p, {1024, 11, 0.0, WindowLabel::pulse}, noise, r1);
    const Eigen::VectorXd n = generate_awgn(1024, 1.0, r2);
    const double a = snr_amplitude(0.0, p, 1.0);
    CHECK(w.samples.head(11) == n.head(11));
    CHECK((w.samples.tail(1013) - n.tail(1013) - a * p.head(1013)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("0-shift is A*pulse + noise elementwise") {
    Rng r1(9), r2(9);
    const auto w = assemble_window(p, {1024, 0, -3.0, WindowLabel::pulse}, noise, r1);
    const Eigen::VectorXd n = generate_awgn(1024, 1.0, r2);
    const double a = snr_amplitude(-3.0, p, 1.0);
    CHECK((w.samples - (a * p + n)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("zero amplitude equals noise_only") {
    Rng r1(3), r2(3);
    const auto w = assemble_window(
        p, {1024, 23, -std::numeric_limits<double>::infinity(), WindowLabel::pulse}, noise, r1);
    const auto v = assemble_window(p, {1024, 23, 0.0, WindowLabel::noise_only}, noise, r2);
    CHECK(w.samples == v.samples);
  }
  SUBCASE("shift out of range") {
    Rng r(1);
    CHECK_THROWS_AS(assemble_window(p, {1024, 1024, 0.0, WindowLabel::pulse}, noise, r),
                    ParameterError);
  }
}

TEST_CASE("trial segments reproduce assemble_window at every shift") {
  const Eigen::VectorXd p = generate_chirp(PulseSpec{});
  const double a = snr_amplitude(-2.0, p, 1.0);
  for (int d : {0, 11, 23, 37, 53}) {
    Rng r1(77), r2(77);
    const Eigen::VectorXd seg = make_trial_segment(p, a, 53, 1.0, r1);
    const Eigen::VectorXd n = generate_awgn(1024 + 53, 1.0, r2);
    const Eigen::VectorXd w = seg.segment(window_offset(53, d), 1024);
    const Eigen::VectorXd nw = n.segment(window_offset(53, d), 1024);
    CHECK(w.head(d) == nw.head(d));
    CHECK((w.tail(1024 - d) - nw.tail(1024 - d) - a * p.head(1024 - d)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pulse-free prefix is N(0, sigma^2) by Kolmogorov-Smirnov") {
  const Eigen::VectorXd p = generate_chirp(PulseSpec{});
  const double sigma = 1.5;
  const double a = snr_amplitude(0.0, p, sigma);
  for (int d : {11, 53}) {
    std::vector<double> prefix;
    for (int t = 0; t < 10000; ++t) {
      Rng r = Rng::substream(123, d, t);
      const Eigen::VectorXd seg = make_trial_segment(p, a, 53, sigma, r);
      prefix.push_back(seg[window_offset(53, d) + (t % d)]);
    }
    // Critical value at significance 0.01.
    CHECK(ks_statistic(prefix, sigma) < 1.628 / std::sqrt(10000.0));
  }
}

TEST_CASE("dataset shape, labels and partitions") {
  const std::vector<int> shifts{0, 11, 23, 37, 53};
  const std::vector<double> snr{0, -5, -10, -15};
  const DatasetCounts counts{{8, 6, 0, 4}, {8, 6, 10, 4}};
  const Dataset ds = build_dataset(PulseSpec{}, 1.0, shifts, snr, counts, 11);

  CHECK(ds.size() == counts.total());
  CHECK(ds.segments.cols() == 1024 + 53);
  CHECK(ds.select(WindowLabel::pulse, Partition::bank).size() == 8);
  CHECK(ds.select(WindowLabel::noise_only, Partition::calibration).size() == 10);
  CHECK(ds.select(WindowLabel::pulse, Partition::calibration).empty());
  for (int d : shifts) CHECK(ds.window(0, d).size() == 1024);

  std::vector<std::vector<std::size_t>> parts;
  for (Partition p : kAllPartitions) {
    auto ids = ds.select(WindowLabel::pulse, p);
    const auto n = ds.select(WindowLabel::noise_only, p);
    ids.insert(ids.end(), n.begin(), n.end());
    parts.push_back(ids);
  }
  CHECK_NOTHROW(assert_disjoint(parts));
  parts[1].push_back(parts[0].front());
  CHECK_THROWS_AS(assert_disjoint(parts), ConfigurationError);

  for (const auto& t : ds.trials)
    if (t.label == WindowLabel::pulse)
      CHECK(std::find(snr.begin(), snr.end(), t.snr_db) != snr.end());
}

TEST_CASE("noise-only dataset and empty snr grid") {
  const std::vector<int> shifts{0, 11};
  const DatasetCounts noise_only{{0, 0, 0, 0}, {5, 0, 0, 0}};
  const Dataset ds = build_dataset(PulseSpec{}, 1.0, shifts, std::vector<double>{}, noise_only, 1);
  for (const auto& t : ds.trials) CHECK(t.label == WindowLabel::noise_only);

  const DatasetCounts with_pulse{{1, 0, 0, 0}, {1, 0, 0, 0}};
  CHECK_THROWS_AS(build_dataset(PulseSpec{}, 1.0, shifts, std::vector<double>{}, with_pulse, 1),
                  ParameterError);
  CHECK_THROWS_AS(build_dataset(PulseSpec{}, 1.0, shifts, std::vector<double>{0.0},
                                DatasetCounts{}, 1),
                  ParameterError);
}

TEST_CASE("datasets are bit-identical across seeds and worker counts") {
  const std::vector<int> shifts{0, 11, 23, 37, 53};
  const std::vector<double> snr{0, -1, -2};
  const DatasetCounts counts{{20, 10, 0, 5}, {20, 10, 10, 5}};
  const Dataset a = build_dataset(PulseSpec{}, 1.0, shifts, snr, counts, 99, 1);
  const Dataset b = build_dataset(PulseSpec{}, 1.0, shifts, snr, counts, 99, 3);
  const Dataset c = build_dataset(PulseSpec{}, 1.0, shifts, snr, counts, 100, 1);
  CHECK(a.segments == b.segments);
  CHECK(a.segments != c.segments);
  for (std::size_t i = 0; i < a.trials.size(); ++i) CHECK(a.trials[i].snr_db == b.trials[i].snr_db);
}
