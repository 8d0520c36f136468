#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "predint/dataset.hpp"
#include "predint/forest.hpp"
#include "predint/intervals.hpp"

namespace predint {

// Empirical level-quantile with the conformal rank convention: the k-th
// smallest score with k = ceil(level * n). Rank products within 1e-9
// (relative) of an integer are snapped to it so that analytically integer
// levels such as (1-alpha)(1+1/n)*n survive floating point. k <= 0 yields the
// smallest score; k > n yields +inf.
double empirical_quantile(std::span<const double> scores, double level);

enum class MeasureTag { point, normalized, interval, oob };

// Nonconformity measure: scores how unusual an instance (x, y) is under a
// trained model. Higher means less conforming.
struct NonconformityMeasure {
  MeasureTag tag = MeasureTag::point;
  std::function<double(std::span<const double>, double)> score;
};

struct CalibrationRecord {
  std::vector<double> scores;  // sorted ascending
  double critical = 0.0;       // may be +inf when the calibration set is too small
  double alpha = 0.0;
  std::size_t n_cal = 0;
};

// Scores every calibration point and takes the ((1-alpha)(1+1/n))-quantile as
// the critical value. The calibration set must be disjoint from the data the
// measure's model was trained on (exchangeability); the caller owns that
// discipline.
CalibrationRecord calibrate(const NonconformityMeasure& measure, const Dataset& cal,
                            double alpha);

using PointPredictor = std::function<double(std::span<const double>)>;
using DispersionFn = std::function<double(std::span<const double>)>;

// Absolute-residual measure |y - model(x)|: constant-width intervals
// model(x) +- critical.
IntervalEstimator conformalize_point(PointPredictor model, const Dataset& cal,
                                     double alpha, std::string name = "point_cp");

// Residuals scaled by a positive dispersion: |y - model(x)| / dispersion(x);
// intervals model(x) +- critical * dispersion(x).
IntervalEstimator conformalize_normalized(PointPredictor model, DispersionFn dispersion,
                                          const Dataset& cal, double alpha,
                                          std::string name = "normalized_cp");

// Interval-residual measure max(lower - y, y - upper): both endpoints shift
// outward by the critical value (inward when it is negative).
IntervalEstimator conformalize_interval(const IntervalEstimator& base,
                                        const Dataset& cal, double alpha,
                                        std::string name = "");

// Out-of-bag variant: calibration scores are the absolute out-of-bag
// residuals over the full training set (no separate calibration split); test
// intervals are full-forest prediction +- critical.
IntervalEstimator conformalize_oob(std::shared_ptr<const Forest> forest,
                                   const Dataset& train, double alpha,
                                   std::string name = "rf_oob_cp");

}  // namespace predint
