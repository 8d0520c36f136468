#include "predint/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace predint {

double empirical_quantile(std::span<const double> scores, double level) {
  if (scores.empty()) throw std::invalid_argument("empirical_quantile: empty scores");
  const std::size_t n = scores.size();
  const double x = level * static_cast<double>(n);
  const double snapped = std::round(x);
  double k_real;
  if (std::abs(x - snapped) <= 1e-9 * std::max(1.0, std::abs(x))) {
    k_real = snapped;
  } else {
    k_real = std::ceil(x);
  }
  if (k_real <= 0.0) {
    return *std::min_element(scores.begin(), scores.end());
  }
  if (k_real > static_cast<double>(n)) {
    return std::numeric_limits<double>::infinity();
  }
  const std::size_t k = static_cast<std::size_t>(k_real);
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end());
  return sorted[k - 1];
}

CalibrationRecord calibrate(const NonconformityMeasure& measure, const Dataset& cal,
                            double alpha) {
  if (!measure.score) throw std::invalid_argument("calibrate: measure has no score fn");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("calibrate: alpha must lie in (0,1)");
  }
  CalibrationRecord rec;
  rec.alpha = alpha;
  rec.n_cal = cal.n();
  rec.scores.resize(cal.n());
  for (std::size_t i = 0; i < cal.n(); ++i) {
    const double s = measure.score(cal.row(i), cal.target(i));
    if (std::isnan(s)) throw std::runtime_error("calibrate: NaN nonconformity score");
    rec.scores[i] = s;
  }
  std::sort(rec.scores.begin(), rec.scores.end());
  const double level = (1.0 - alpha) * (1.0 + 1.0 / static_cast<double>(rec.n_cal));
  rec.critical = empirical_quantile(rec.scores, level);
  return rec;
}

IntervalEstimator conformalize_point(PointPredictor model, const Dataset& cal,
                                     double alpha, std::string name) {
  if (!model) throw std::invalid_argument("conformalize_point: null model");
  NonconformityMeasure m;
  m.tag = MeasureTag::point;
  m.score = [model](std::span<const double> x, double y) {
    return std::abs(y - model(x));
  };
  const CalibrationRecord rec = calibrate(m, cal, alpha);
  const double half_width = rec.critical;

  return IntervalEstimator(
      std::move(name), alpha,
      [model, half_width](std::span<const double> x) {
        const double y_hat = model(x);
        return Interval(y_hat - half_width, y_hat + half_width);
      },
      [model](std::span<const double> x) { return model(x); });
}

IntervalEstimator conformalize_normalized(PointPredictor model, DispersionFn dispersion,
                                          const Dataset& cal, double alpha,
                                          std::string name) {
  if (!model || !dispersion) {
    throw std::invalid_argument("conformalize_normalized: null model or dispersion");
  }
  auto checked_dispersion = [dispersion](std::span<const double> x) {
    const double s = dispersion(x);
    if (!(s > 0.0)) {
      std::ostringstream os;
      os << "conformalize_normalized: non-positive dispersion " << s << " at x = (";
      for (std::size_t j = 0; j < x.size(); ++j) {
        os << x[j] << (j + 1 < x.size() ? ", " : ")");
      }
      throw std::runtime_error(os.str());
    }
    return s;
  };

  NonconformityMeasure m;
  m.tag = MeasureTag::normalized;
  m.score = [model, checked_dispersion](std::span<const double> x, double y) {
    return std::abs(y - model(x)) / checked_dispersion(x);
  };
  const CalibrationRecord rec = calibrate(m, cal, alpha);
  const double critical = rec.critical;

  return IntervalEstimator(
      std::move(name), alpha,
      [model, checked_dispersion, critical](std::span<const double> x) {
        const double y_hat = model(x);
        const double h = critical * checked_dispersion(x);
        return Interval(y_hat - h, y_hat + h);
      },
      [model](std::span<const double> x) { return model(x); });
}

IntervalEstimator conformalize_interval(const IntervalEstimator& base,
                                        const Dataset& cal, double alpha,
                                        std::string name) {
  if (name.empty()) name = base.method() + "_cp";
  NonconformityMeasure m;
  m.tag = MeasureTag::interval;
  m.score = [&base](std::span<const double> x, double y) {
    const Interval iv = base.interval(x);
    return std::max(iv.lower - y, y - iv.upper);
  };
  const CalibrationRecord rec = calibrate(m, cal, alpha);
  const double shift = rec.critical;

  IntervalEstimator::PointFn point;
  if (base.has_point()) {
    point = [base](std::span<const double> x) { return base.point(x); };
  }
  return IntervalEstimator(
      std::move(name), alpha,
      [base, shift](std::span<const double> x) {
        const Interval iv = base.interval(x);
        return Interval(iv.lower - shift, iv.upper + shift);
      },
      std::move(point));
}

IntervalEstimator conformalize_oob(std::shared_ptr<const Forest> forest,
                                   const Dataset& train, double alpha,
                                   std::string name) {
  if (!forest) throw std::invalid_argument("conformalize_oob: null forest");
  if (train.n() != forest->n_train()) {
    throw std::invalid_argument("conformalize_oob: train set does not match forest");
  }
  std::vector<double> scores;
  scores.reserve(train.n());
  for (std::size_t i = 0; i < train.n(); ++i) {
    if (!forest->has_oob(i)) continue;
    scores.push_back(std::abs(train.target(i) - forest->predict_oob(train.row(i), i)));
  }
  if (scores.empty()) {
    throw std::runtime_error("conformalize_oob: empty out-of-bag residual set");
  }
  std::sort(scores.begin(), scores.end());
  const double level =
      (1.0 - alpha) * (1.0 + 1.0 / static_cast<double>(scores.size()));
  const double half_width = empirical_quantile(scores, level);

  return IntervalEstimator(
      std::move(name), alpha,
      [forest, half_width](std::span<const double> x) {
        const double y_hat = forest->predict(x);
        return Interval(y_hat - half_width, y_hat + half_width);
      },
      [forest](std::span<const double> x) { return forest->predict(x); });
}

}  // namespace predint
