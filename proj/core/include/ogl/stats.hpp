#pragma once

#include <span>

namespace ogl::stats {

double mean(std::span<const double> xs);

/// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_std(std::span<const double> xs);

/// Two-sided Student-t quantile: returns t such that P(|T| <= t) = confidence
/// for `dof` degrees of freedom.
double student_t_quantile(double confidence, int dof);

/// Half-width of the two-sided confidence interval for the mean.
/// Zero for fewer than two samples.
double ci_half_width(std::span<const double> xs, double confidence);

}  // namespace ogl::stats
