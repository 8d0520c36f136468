#include "predint/intervals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "predint/rng.hpp"
#include "predint/stats.hpp"

namespace predint {

Interval::Interval(double lo, double hi) : lower(lo), upper(hi) {
  if (std::isnan(lo) || std::isnan(hi)) {
    throw std::invalid_argument("Interval: NaN endpoint");
  }
  if (lo > hi) throw std::invalid_argument("Interval: lower > upper");
}

double Interval::width() const {
  if (std::isinf(lower) || std::isinf(upper)) {
    return std::numeric_limits<double>::infinity();
  }
  return upper - lower;
}

IntervalEstimator::IntervalEstimator(std::string method, double alpha,
                                     IntervalFn interval_fn, PointFn point_fn)
    : method_(std::move(method)),
      alpha_(alpha),
      interval_fn_(std::move(interval_fn)),
      point_fn_(std::move(point_fn)) {
  if (!interval_fn_) throw std::invalid_argument("IntervalEstimator: missing interval fn");
  if (!(alpha_ > 0.0 && alpha_ < 1.0)) {
    throw std::invalid_argument("IntervalEstimator: alpha must lie in (0,1)");
  }
}

double IntervalEstimator::point(std::span<const double> x) const {
  if (!point_fn_) {
    throw std::logic_error("IntervalEstimator: method '" + method_ +
                           "' has no point prediction");
  }
  return point_fn_(x);
}

Interval gaussian_interval(double mu, double sigma, double alpha) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_interval: sigma < 0");
  const double z = two_tailed_z(alpha);
  return Interval(mu - z * sigma, mu + z * sigma);
}

std::pair<double, double> ensemble_moments(std::span<const double> preds) {
  if (preds.size() < 2) {
    throw std::invalid_argument("ensemble_moments: need at least 2 predictions");
  }
  return {mean(preds), population_std(preds)};
}

std::pair<double, double> mve_moments(std::span<const double> means,
                                      std::span<const double> variances) {
  if (means.empty() || means.size() != variances.size()) {
    throw std::invalid_argument("mve_moments: length mismatch or empty");
  }
  const double mu = mean(means);
  double spread = 0.0;
  double aleatoric = 0.0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (!(variances[i] >= 0.0)) {
      throw std::invalid_argument("mve_moments: negative variance");
    }
    spread += (means[i] - mu) * (means[i] - mu);
    aleatoric += variances[i];
  }
  const double R = static_cast<double>(means.size());
  return {mu, std::sqrt(spread / R + aleatoric / R)};
}

std::pair<double, double> qr_levels(double alpha, double w) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("qr_levels: alpha must lie in (0,1)");
  }
  if (!(w > 0.0) || w * alpha / 2.0 >= 0.5) {
    throw std::invalid_argument("qr_levels: softening factor out of range");
  }
  return {w * alpha / 2.0, 1.0 - w * alpha / 2.0};
}

std::pair<double, double> oob_shifts(std::span<const double> residuals, double alpha) {
  if (residuals.empty()) throw std::invalid_argument("oob_shifts: empty residual set");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("oob_shifts: alpha must lie in (0,1)");
  }
  std::vector<double> d(residuals.begin(), residuals.end());
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  // Same rank rule as the conformal quantile: snap near-integer products
  // before taking the ceiling.
  const double x = alpha / 2.0 * static_cast<double>(n);
  const double snapped = std::round(x);
  const double k_real =
      std::abs(x - snapped) <= 1e-9 * std::max(1.0, std::abs(x)) ? snapped
                                                                 : std::ceil(x);
  std::size_t k = k_real <= 1.0 ? 1 : static_cast<std::size_t>(k_real);
  k = std::min(k, n);
  return {d[k - 1], d[n - k]};
}

namespace {

// Shared scaffolding for the Monte-Carlo dropout estimators: per-pass seeds
// drawn once so the estimator is a pure function afterwards.
std::vector<std::uint64_t> frozen_pass_seeds(std::uint64_t seed, std::size_t R) {
  return derive_stream_seeds(seed, R);
}

}  // namespace

IntervalEstimator dropout_estimator(const NetParams& net, std::size_t R,
                                    double alpha, std::uint64_t seed) {
  if (net.dropout_prob <= 0.0) {
    throw std::invalid_argument(
        "dropout_estimator: net has p = 0, no test-time stochasticity");
  }
  if (R < 2) throw std::invalid_argument("dropout_estimator: R must be >= 2");
  auto seeds = frozen_pass_seeds(seed, R);
  auto net_copy = net;

  auto moments = [net_copy, seeds](std::span<const double> x) {
    std::vector<double> preds(seeds.size());
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      preds[r] = forward(net_copy, x, /*dropout_active=*/true, seeds[r])[0];
    }
    return ensemble_moments(preds);
  };
  return IntervalEstimator(
      "dropout", alpha,
      [moments, alpha](std::span<const double> x) {
        const auto [mu, sigma] = moments(x);
        return gaussian_interval(mu, sigma, alpha);
      },
      [moments](std::span<const double> x) { return moments(x).first; });
}

IntervalEstimator mve_estimator(const NetParams& net, std::size_t R, double alpha,
                                std::uint64_t seed) {
  if (net.out_dim != 2) {
    throw std::invalid_argument("mve_estimator: needs a (mean, log-variance) net");
  }
  if (net.dropout_prob <= 0.0) {
    throw std::invalid_argument(
        "mve_estimator: net has p = 0, no test-time stochasticity");
  }
  if (R < 2) throw std::invalid_argument("mve_estimator: R must be >= 2");
  auto seeds = frozen_pass_seeds(seed, R);
  auto net_copy = net;

  auto moments = [net_copy, seeds](std::span<const double> x) {
    std::vector<double> means(seeds.size());
    std::vector<double> vars(seeds.size());
    for (std::size_t r = 0; r < seeds.size(); ++r) {
      const auto out = forward(net_copy, x, /*dropout_active=*/true, seeds[r]);
      means[r] = out[0];
      vars[r] = std::exp(out[1]);
    }
    return mve_moments(means, vars);
  };
  return IntervalEstimator(
      "mve", alpha,
      [moments, alpha](std::span<const double> x) {
        const auto [mu, sigma] = moments(x);
        return gaussian_interval(mu, sigma, alpha);
      },
      [moments](std::span<const double> x) { return moments(x).first; });
}

IntervalEstimator deep_ensemble_estimator(std::vector<NetParams> nets, double alpha) {
  if (nets.empty()) throw std::invalid_argument("deep_ensemble_estimator: empty ensemble");
  for (const auto& n : nets) {
    if (n.out_dim != 2) {
      throw std::invalid_argument(
          "deep_ensemble_estimator: members must be (mean, log-variance) nets");
    }
  }
  auto shared = std::make_shared<const std::vector<NetParams>>(std::move(nets));

  auto moments = [shared](std::span<const double> x) {
    std::vector<double> means(shared->size());
    std::vector<double> vars(shared->size());
    for (std::size_t r = 0; r < shared->size(); ++r) {
      const auto out = forward((*shared)[r], x);
      means[r] = out[0];
      vars[r] = std::exp(out[1]);
    }
    return mve_moments(means, vars);
  };
  return IntervalEstimator(
      "deep_ensemble", alpha,
      [moments, alpha](std::span<const double> x) {
        const auto [mu, sigma] = moments(x);
        return gaussian_interval(mu, sigma, alpha);
      },
      [moments](std::span<const double> x) { return moments(x).first; });
}

IntervalEstimator oob_interval_estimator(std::shared_ptr<const Forest> forest,
                                         const Dataset& train, double alpha) {
  if (!forest) throw std::invalid_argument("oob_interval_estimator: null forest");
  if (train.n() != forest->n_train()) {
    throw std::invalid_argument("oob_interval_estimator: train set does not match forest");
  }
  std::vector<double> residuals;
  residuals.reserve(train.n());
  for (std::size_t i = 0; i < train.n(); ++i) {
    if (!forest->has_oob(i)) continue;  // negligible at 100 trees
    residuals.push_back(train.target(i) - forest->predict_oob(train.row(i), i));
  }
  if (residuals.empty()) {
    throw std::runtime_error("oob_interval_estimator: empty out-of-bag residual set");
  }
  const auto [lo_shift, hi_shift] = oob_shifts(residuals, alpha);

  return IntervalEstimator(
      "rf_oob", alpha,
      [forest, lo_shift, hi_shift](std::span<const double> x) {
        const double y_hat = forest->predict(x);
        return Interval(y_hat + lo_shift, y_hat + hi_shift);
      },
      [forest](std::span<const double> x) { return forest->predict(x); });
}

namespace {

Interval heads_to_interval(const NetParams& net, std::span<const double> x) {
  const auto out = forward(net, x);
  double lo = out[0];
  double hi = out[1];
  if (lo > hi) std::swap(lo, hi);
  return Interval(lo, hi);
}

}  // namespace

IntervalEstimator qr_estimator(const NetParams& net, double alpha, double w) {
  if (net.out_dim != 2) {
    throw std::invalid_argument("qr_estimator: needs a 2-head quantile net");
  }
  qr_levels(alpha, w);  // validates the softening factor
  auto net_copy = net;
  return IntervalEstimator("qr", alpha, [net_copy](std::span<const double> x) {
    return heads_to_interval(net_copy, x);
  });
}

IntervalEstimator qd_estimator(const NetParams& net, double alpha) {
  if (net.out_dim != 2) {
    throw std::invalid_argument("qd_estimator: needs a 2-head interval net");
  }
  auto net_copy = net;
  return IntervalEstimator("qd", alpha, [net_copy](std::span<const double> x) {
    return heads_to_interval(net_copy, x);
  });
}

IntervalEstimator gp_estimator(std::shared_ptr<const GPModel> gp, double alpha) {
  if (!gp) throw std::invalid_argument("gp_estimator: null model");
  return IntervalEstimator(
      "gp", alpha,
      [gp, alpha](std::span<const double> x) {
        const auto [mu, var] = gp->posterior(x);
        return gaussian_interval(mu, std::sqrt(var), alpha);
      },
      [gp](std::span<const double> x) { return gp->posterior(x).first; });
}

}  // namespace predint
