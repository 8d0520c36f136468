#pragma once

#include <span>
#include <vector>

#include "predint/dataset.hpp"

namespace predint {

// Closed-form ridge regressor with unpenalized intercept. Plumbing for the
// conformal baselines and tests.
class RidgeModel {
 public:
  static RidgeModel fit(const Dataset& ds, double lambda = 1e-3);

  double predict(std::span<const double> x) const;
  const std::vector<double>& coef() const { return coef_; }
  double intercept() const { return intercept_; }

 private:
  std::vector<double> coef_;
  double intercept_ = 0.0;
};

}  // namespace predint
