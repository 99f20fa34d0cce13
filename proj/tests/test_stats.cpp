#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <random>
#include <vector>

#include "taskseq/error.hpp"
#include "taskseq/stats.hpp"

using namespace taskseq;
using doctest::Approx;

TEST_CASE("paired t-test reference value") {
  std::vector<double> x{2, 4, 6, 8}, y{1, 2, 3, 4};
  auto r = stats::paired_t_test(x, y);
  CHECK(r.t == Approx(3.872983346207417).epsilon(1e-13));
  CHECK(r.p == Approx(0.030466291662170977).epsilon(1e-10));
  CHECK(r.df == 3.0);

  auto flipped = stats::paired_t_test(y, x);
  CHECK(flipped.t == Approx(-r.t).epsilon(1e-15));
  CHECK(flipped.p == Approx(r.p).epsilon(1e-14));
}

TEST_CASE("paired t-test errors") {
  std::vector<double> a{1, 2, 3}, b{1, 2};
  CHECK_THROWS_WITH_AS(stats::paired_t_test(a, b), doctest::Contains("LengthMismatch"), Error);
  std::vector<double> one{1};
  CHECK_THROWS_WITH_AS(stats::paired_t_test(one, one), doctest::Contains("TooFewPairs"), Error);
  std::vector<double> c{2, 3, 4};
  try {
    stats::paired_t_test(c, a);
    FAIL("expected ZeroVariance");
  } catch (const Error& e) {
    CHECK(e.kind() == "ZeroVariance");
    CHECK(e.category() == ErrorCategory::Numerical);
  }
}

TEST_CASE("student t matches Boost over a grid") {
  for (double df : {1.0, 2.0, 3.0, 5.5, 10.0, 30.0, 200.0}) {
    boost::math::students_t dist(df);
    for (double t = -12.0; t <= 12.0; t += 0.37) {
      CHECK(stats::student_t_cdf(t, df) == Approx(boost::math::cdf(dist, t)).epsilon(1e-11));
      const double two = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
      CHECK(stats::student_t_two_sided(t, df) == Approx(two).epsilon(1e-10));
    }
  }
}

TEST_CASE("property: random paired samples match a Boost-based reference") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 60);
    std::vector<double> x(n), y(n), d(n);
    for (int i = 0; i < n; ++i) {
      x[i] = z(rng);
      y[i] = z(rng) + 0.2;
      d[i] = x[i] - y[i];
    }
    double m = 0;
    for (double v : d) m += v;
    m /= n;
    double ss = 0;
    for (double v : d) ss += (v - m) * (v - m);
    const double t = m / std::sqrt(ss / (n - 1) / n);
    boost::math::students_t dist(n - 1);
    const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    auto r = stats::paired_t_test(x, y);
    CHECK(r.t == Approx(t).epsilon(1e-10));
    CHECK(r.p == Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("incomplete beta edge values") {
  CHECK(stats::incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(stats::incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  // I_x(1, 1) = x and I_x(a, 1) = x^a
  CHECK(stats::incomplete_beta(1.0, 1.0, 0.3) == Approx(0.3).epsilon(1e-14));
  CHECK(stats::incomplete_beta(2.5, 1.0, 0.4) == Approx(std::pow(0.4, 2.5)).epsilon(1e-13));
}

TEST_CASE("descriptive helpers") {
  std::vector<double> v{1, 2, 3, 4};
  CHECK(stats::mean(v) == 2.5);
  CHECK(*stats::sample_sd(v) == Approx(std::sqrt(5.0 / 3.0)));
  std::vector<double> one{7};
  CHECK_FALSE(stats::sample_sd(one).has_value());
  CHECK(stats::quantile_sorted(v, 0.0) == 1.0);
  CHECK(stats::quantile_sorted(v, 1.0) == 4.0);
  CHECK(stats::quantile_sorted(v, 0.25) == Approx(1.75));
  CHECK(stats::quantile_sorted(v, 0.5) == Approx(2.5));
  CHECK(stats::quantile_sorted(one, 0.75) == 7.0);
}
