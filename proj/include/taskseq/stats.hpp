#pragma once

#include <optional>
#include <span>

namespace taskseq::stats {

/// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1],
/// evaluated by continued fraction (modified Lentz). Absolute error is
/// below 1e-12 over the ranges used by the t distribution.
double incomplete_beta(double a, double b, double x);

/// Student t cumulative distribution P(T <= t) with `df` > 0 degrees of
/// freedom.
double student_t_cdf(double t, double df);

/// Two-sided tail probability P(|T| >= |t|).
double student_t_two_sided(double t, double df);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;  // two-sided
  double df = 0.0;
};

/// Paired t-test on d = x - y. Throws LengthMismatch, TooFewPairs (n < 2)
/// or ZeroVariance (all differences identical).
TTestResult paired_t_test(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); nullopt for n < 2.
std::optional<double> sample_sd(std::span<const double> v);

/// Quantile with linear interpolation between order statistics
/// (h = (n - 1) q). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace taskseq::stats
