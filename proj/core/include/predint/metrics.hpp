#pragma once

#include <span>

#include "predint/dataset.hpp"
#include "predint/intervals.hpp"

namespace predint {

struct MetricsReport {
  double coverage = 0.0;
  double mean_width = 0.0;      // +inf when any interval is unbounded
  double relative_width = 0.0;
  double r2 = 0.0;              // NaN for estimators without a point prediction
  std::size_t n_test = 0;
};

// Fraction of test points with lower <= y <= upper (closed containment).
double coverage(const IntervalEstimator& est, const Dataset& test);

// Mean |upper - lower| over the test set; any unbounded interval makes the
// result +inf rather than being dropped.
double mean_width(const IntervalEstimator& est, const Dataset& test);

// 1 - SSE/SST with SST taken about the test-target mean.
double r2(std::span<const double> predictions, std::span<const double> targets);

// Mean width divided by the unconditional quantile gap
// Q_{1-alpha/2}(targets_all) - Q_{alpha/2}(targets_all), quantiles taken with
// the conformal rank convention. Below 1 means the estimator beats a
// featureless interval.
double relative_width(const IntervalEstimator& est, const Dataset& test,
                      std::span<const double> targets_all, double alpha);

MetricsReport evaluate(const IntervalEstimator& est, const Dataset& test,
                       std::span<const double> targets_all, double alpha);

}  // namespace predint
