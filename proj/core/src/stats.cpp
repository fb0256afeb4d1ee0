#include "ogl/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace ogl::stats {

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

namespace {

// Continued-fraction evaluation of the regularized incomplete beta function.
double betacf(double a, double b, double x) {
  const int kMaxIter = 300;
  const double kEps = 3e-14;
  const double kFpMin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double betai(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// P(|T_dof| <= t)
double t_two_sided_cdf(double t, int dof) {
  double x = static_cast<double>(dof) / (dof + t * t);
  return 1.0 - betai(0.5 * dof, 0.5, x);
}

}  // namespace

double student_t_quantile(double confidence, int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_quantile: dof must be >= 1");
  if (confidence <= 0.0 || confidence >= 1.0) {
    throw std::invalid_argument("student_t_quantile: confidence must be in (0,1)");
  }
  double lo = 0.0, hi = 1.0;
  while (t_two_sided_cdf(hi, dof) < confidence) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (t_two_sided_cdf(mid, dof) < confidence) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double ci_half_width(std::span<const double> xs, double confidence) {
  if (xs.size() < 2) return 0.0;
  double s = sample_std(xs);
  if (s == 0.0) return 0.0;
  double t = student_t_quantile(confidence, static_cast<int>(xs.size()) - 1);
  return t * s / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace ogl::stats
