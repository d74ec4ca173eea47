#pragma once

#include <span>

namespace alseg {

enum class Direction { greater, less };

struct TestResult {
  double statistic = 0.0;
  double p_one_sided = 1.0;
  int n = 0;
  Direction direction = Direction::greater;
  /// Degrees of freedom of the t tests (0 for Wilcoxon).
  double df = 0.0;
  /// Set when a stated convention replaced the test (zero variance, all
  /// differences zero, fewer than two observations).
  bool degenerate = false;
};

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double a, double b, double x);

/// Student-t cumulative distribution with `df` degrees of freedom.
double student_t_cdf(double t, double df);

double normal_cdf(double z);

/// One-sided paired t test on d = x - y. Alternative `greater`: mean(d) > 0.
TestResult paired_t(std::span<const double> x, std::span<const double> y, Direction direction);

/// Welch's unequal-variance t test, one-sided.
TestResult unpaired_t(std::span<const double> x, std::span<const double> y, Direction direction);

/// Signed-rank test on d = x - y with zero differences dropped, average ranks
/// for ties, tie-corrected normal approximation and a 0.5 continuity
/// correction toward the null. The statistic is the positive rank sum.
TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                Direction direction);

}  // namespace alseg
