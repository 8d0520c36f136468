#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "predint/forest.hpp"
#include "predint/gp.hpp"
#include "predint/nn.hpp"

namespace predint {

// Closed interval with extended-real endpoints (+-inf allowed; degenerate
// single-point intervals allowed).
struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  Interval() = default;
  Interval(double lo, double hi);

  double width() const;
  bool contains(double y) const { return lower <= y && y <= upper; }
};

// A trained interval estimator at a fixed significance level: a pure,
// deterministic mapping from a feature vector to an Interval, optionally
// paired with a point prediction. Any Monte-Carlo seeds are frozen at
// construction time, so repeated queries at the same x agree exactly.
class IntervalEstimator {
 public:
  using IntervalFn = std::function<Interval(std::span<const double>)>;
  using PointFn = std::function<double(std::span<const double>)>;

  IntervalEstimator(std::string method, double alpha, IntervalFn interval_fn,
                    PointFn point_fn = {});

  Interval interval(std::span<const double> x) const { return interval_fn_(x); }
  bool has_point() const { return static_cast<bool>(point_fn_); }
  double point(std::span<const double> x) const;
  const std::string& method() const { return method_; }
  double alpha() const { return alpha_; }

 private:
  std::string method_;
  double alpha_;
  IntervalFn interval_fn_;
  PointFn point_fn_;
};

// Symmetric Gaussian interval mu +- z^alpha * sigma.
Interval gaussian_interval(double mu, double sigma, double alpha);

// Mean and population standard deviation (1/R convention) of an ensemble of
// point predictions; requires R >= 2.
std::pair<double, double> ensemble_moments(std::span<const double> preds);

// Moment-matched Gaussian for a uniformly weighted mixture: mixture mean and
// sqrt(spread-of-means variance + mean of component variances); R >= 1.
std::pair<double, double> mve_moments(std::span<const double> means,
                                      std::span<const double> variances);

// Quantile levels trained by a softened quantile-pair regressor:
// (w*alpha/2, 1 - w*alpha/2).
std::pair<double, double> qr_levels(double alpha, double w);

// Two-sided empirical shifts for residual multiset D at significance alpha:
// lower = the ceil((alpha/2)*n)-th smallest, upper its reflected counterpart
// (the (n+1-k)-th smallest), so the pair is symmetric under negating D.
std::pair<double, double> oob_shifts(std::span<const double> residuals, double alpha);

// Monte-Carlo dropout: R dropout-active passes with per-pass seeds frozen at
// construction; Gaussian interval from the ensemble moments. Requires p > 0.
IntervalEstimator dropout_estimator(const NetParams& net, std::size_t R,
                                    double alpha, std::uint64_t seed);

// Dropout mean-variance estimator over a 2-head (mean, log-variance) net:
// mixture moments over R dropout-active passes.
IntervalEstimator mve_estimator(const NetParams& net, std::size_t R, double alpha,
                                std::uint64_t seed);

// Ensemble of independently trained 2-head nets; mixture moments over the
// member (mean, variance) outputs, evaluated without dropout.
IntervalEstimator deep_ensemble_estimator(std::vector<NetParams> nets, double alpha);

// Constant-width interval around the full-forest prediction, shifted by the
// empirical quantile pair of the signed out-of-bag residuals
// y_i - oob_prediction_i (training rows without an out-of-bag subensemble
// are skipped).
IntervalEstimator oob_interval_estimator(std::shared_ptr<const Forest> forest,
                                         const Dataset& train, double alpha);

// Direct quantile-pair net: interval straight from the two heads, swapped
// when they cross.
IntervalEstimator qr_estimator(const NetParams& net, double alpha, double w);
IntervalEstimator qd_estimator(const NetParams& net, double alpha);

// Gaussian interval from the GP posterior (predictive, noise included).
IntervalEstimator gp_estimator(std::shared_ptr<const GPModel> gp, double alpha);

}  // namespace predint
