#include "predint/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "predint/conformal.hpp"

namespace predint {

double coverage(const IntervalEstimator& est, const Dataset& test) {
  if (test.n() == 0) throw std::invalid_argument("coverage: empty test set");
  std::size_t covered = 0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    if (est.interval(test.row(i)).contains(test.target(i))) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(test.n());
}

double mean_width(const IntervalEstimator& est, const Dataset& test) {
  if (test.n() == 0) throw std::invalid_argument("mean_width: empty test set");
  double total = 0.0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    const double w = est.interval(test.row(i)).width();
    if (std::isinf(w)) return std::numeric_limits<double>::infinity();
    total += w;
  }
  return total / static_cast<double>(test.n());
}

double r2(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty() || predictions.size() != targets.size()) {
    throw std::invalid_argument("r2: length mismatch or empty");
  }
  double mean_t = 0.0;
  for (double t : targets) mean_t += t;
  mean_t /= static_cast<double>(targets.size());

  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    sse += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    sst += (targets[i] - mean_t) * (targets[i] - mean_t);
  }
  if (sst == 0.0) throw std::invalid_argument("r2: zero target variance");
  return 1.0 - sse / sst;
}

double relative_width(const IntervalEstimator& est, const Dataset& test,
                      std::span<const double> targets_all, double alpha) {
  const double lo = empirical_quantile(targets_all, alpha / 2.0);
  const double hi = empirical_quantile(targets_all, 1.0 - alpha / 2.0);
  const double gap = hi - lo;
  if (!(gap > 0.0)) throw std::invalid_argument("relative_width: zero quantile gap");
  return mean_width(est, test) / gap;
}

MetricsReport evaluate(const IntervalEstimator& est, const Dataset& test,
                       std::span<const double> targets_all, double alpha) {
  MetricsReport r;
  r.n_test = test.n();
  r.coverage = coverage(est, test);
  r.mean_width = mean_width(est, test);
  r.relative_width = relative_width(est, test, targets_all, alpha);
  if (est.has_point()) {
    std::vector<double> preds(test.n());
    for (std::size_t i = 0; i < test.n(); ++i) preds[i] = est.point(test.row(i));
    r.r2 = r2(preds, test.targets());
  } else {
    r.r2 = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

}  // namespace predint
