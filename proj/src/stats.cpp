#include "alseg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace alseg {

namespace {

constexpr double kTiny = 1e-300;
constexpr double kEps = 1e-16;

double beta_continued_fraction(double a, double b, double x) {
  // Modified Lentz evaluation.
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

// Convention when the test statistic has zero spread.
double degenerate_p(double effect, Direction dir) {
  if (effect == 0.0) return 0.5;
  const bool favors = dir == Direction::greater ? effect > 0.0 : effect < 0.0;
  return favors ? 0.0 : 1.0;
}

double t_tail(double t, double df, Direction dir) {
  return dir == Direction::greater ? student_t_cdf(-t, df) : student_t_cdf(t, df);
}

TestResult too_few(int n, Direction dir) {
  TestResult r;
  r.n = n;
  r.direction = dir;
  r.statistic = std::numeric_limits<double>::quiet_NaN();
  r.p_one_sided = 0.5;
  r.degenerate = true;
  return r;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_cdf: df must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

TestResult paired_t(std::span<const double> x, std::span<const double> y, Direction direction) {
  if (x.size() != y.size()) throw std::invalid_argument("paired_t: samples differ in length");
  const int n = static_cast<int>(x.size());
  if (n < 2) return too_few(n, direction);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = x[i] - y[i];
  const double m = mean_of(d);
  const double var = variance_of(d, m);

  TestResult r;
  r.n = n;
  r.direction = direction;
  r.df = n - 1;
  if (var == 0.0) {
    r.degenerate = true;
    r.statistic = m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
    r.p_one_sided = degenerate_p(m, direction);
    return r;
  }
  r.statistic = m / std::sqrt(var / n);
  r.p_one_sided = t_tail(r.statistic, r.df, direction);
  return r;
}

TestResult unpaired_t(std::span<const double> x, std::span<const double> y, Direction direction) {
  const int n = static_cast<int>(x.size() + y.size());
  if (x.size() < 2 || y.size() < 2) return too_few(n, direction);
  const double mx = mean_of(x), my = mean_of(y);
  const double vx = variance_of(x, mx) / static_cast<double>(x.size());
  const double vy = variance_of(y, my) / static_cast<double>(y.size());
  const double se2 = vx + vy;

  TestResult r;
  r.n = n;
  r.direction = direction;
  const double diff = mx - my;
  if (se2 == 0.0) {
    r.degenerate = true;
    r.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p_one_sided = degenerate_p(diff, direction);
    return r;
  }
  r.df = se2 * se2 / (vx * vx / static_cast<double>(x.size() - 1) +
                      vy * vy / static_cast<double>(y.size() - 1));
  r.statistic = diff / std::sqrt(se2);
  r.p_one_sided = t_tail(r.statistic, r.df, direction);
  return r;
}

TestResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                Direction direction) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("wilcoxon_signed_rank: samples differ in length");
  }
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i] - y[i];
    if (v != 0.0) d.push_back(v);
  }
  TestResult r;
  r.direction = direction;
  r.n = static_cast<int>(d.size());
  if (d.empty()) {
    r.degenerate = true;
    r.statistic = 0.0;
    r.p_one_sided = 1.0;
    return r;
  }

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(d.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    const auto t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  double w_plus = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) w_plus += rank[i];
  }
  const auto n = static_cast<double>(d.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  r.statistic = w_plus;
  if (var <= 0.0) {
    r.degenerate = true;
    r.p_one_sided = degenerate_p(w_plus - mean, direction);
    return r;
  }
  const double se = std::sqrt(var);
  if (direction == Direction::greater) {
    r.p_one_sided = normal_cdf(-(w_plus - mean - 0.5) / se);
  } else {
    r.p_one_sided = normal_cdf((w_plus - mean + 0.5) / se);
  }
  r.p_one_sided = std::clamp(r.p_one_sided, 0.0, 1.0);
  return r;
}

}  // namespace alseg
