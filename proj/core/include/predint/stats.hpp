#pragma once

#include <cstddef>
#include <span>

namespace predint {

// Standard normal CDF, accurate to ~1e-15 (erfc-based).
double normal_cdf(double x);

// Inverse standard normal CDF on (0,1). Rational initial guess refined by a
// single Halley step against normal_cdf; absolute error well below 1e-10.
double normal_quantile(double p);

// Two-tailed z-score for significance level alpha in (0,1):
// the (1 - alpha/2)-quantile of the standard normal.
double two_tailed_z(double alpha);

double mean(std::span<const double> xs);
// Population standard deviation (divide by n).
double population_std(std::span<const double> xs);

}  // namespace predint
