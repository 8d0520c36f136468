// Acceptance suite: one criterion per check, one printed pass/fail line each.
// Exit status is the number of failed criteria.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "predint/bench.hpp"
#include "predint/conformal.hpp"
#include "predint/dataset.hpp"
#include "predint/forest.hpp"
#include "predint/gp.hpp"
#include "predint/intervals.hpp"
#include "predint/metrics.hpp"
#include "predint/nn.hpp"
#include "predint/ridge.hpp"
#include "predint/rng.hpp"
#include "predint/stats.hpp"
#include "support/fd_check.hpp"
#include "support/oracles.hpp"

using namespace predint;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Dataset sine_data(std::size_t n, std::uint64_t seed, double noise = 0.3,
                  std::size_t d = 2) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::sine_heteroscedastic;
  spec.n = n;
  spec.d = d;
  spec.noise_scale = noise;
  return gen_synthetic(spec, seed);
}

ExperimentConfig sine_config(double cal_frac = 0.5, std::size_t n_splits = 50) {
  ExperimentConfig cfg;
  cfg.data.synthetic.kind = SyntheticKind::sine_heteroscedastic;
  cfg.data.synthetic.n = 2000;
  cfg.data.synthetic.d = 2;
  cfg.data.synthetic.noise_scale = 0.3;
  cfg.alpha = 0.1;
  cfg.n_splits = n_splits;
  cfg.test_frac = 0.2;
  cfg.cal_frac = cal_frac;
  cfg.base_seed = 20240601;
  return cfg;
}

const AggregateRow& find_aggregate(const ResultsTable& table, const std::string& m) {
  for (const auto& a : table.aggregates) {
    if (a.method == m) return a;
  }
  throw std::runtime_error("aggregate missing for " + m);
}

// --- criterion 1: conformal wrappers hit near-nominal mean coverage ---------

Outcome criterion_marginal_validity() {
  ExperimentConfig cfg = sine_config();
  for (const char* name : {"nn_cp", "ridge_cp", "rf_cp", "rf_ncp", "qrf_cp",
                           "rf_oob_cp"}) {
    MethodSpec spec;
    spec.name = name;
    cfg.methods.push_back(spec);
  }
  const ResultsTable table = run(cfg);

  Outcome out;
  out.pass = true;
  std::ostringstream os;
  for (const auto& m : cfg.methods) {
    const AggregateRow& agg = find_aggregate(table, m.name);
    const bool ok = agg.n_rows == cfg.n_splits && agg.coverage_mean >= 0.88 &&
                    agg.coverage_mean <= 0.93;
    os << m.name << "=" << agg.coverage_mean << (ok ? " " : "(!) ");
    out.pass = out.pass && ok;
  }
  out.detail = os.str();
  return out;
}

// --- criterion 2: coverage std shrinks from n_cal=50 to n_cal=5000 ----------

Outcome criterion_coverage_contraction() {
  const Dataset train = sine_data(400, 1);
  const RidgeModel ridge = RidgeModel::fit(train);
  auto model = [&ridge](std::span<const double> x) { return ridge.predict(x); };

  const std::size_t n_trials = 200;
  const std::size_t n_test = 200;
  auto coverage_std = [&](std::size_t n_cal, std::uint64_t salt) {
    std::vector<double> coverages;
    for (std::size_t t = 0; t < n_trials; ++t) {
      const Dataset cal = sine_data(n_cal, salt + 2 * t);
      const Dataset test = sine_data(n_test, salt + 2 * t + 1);
      const IntervalEstimator est = conformalize_point(model, cal, 0.1);
      std::size_t covered = 0;
      for (std::size_t i = 0; i < test.n(); ++i) {
        if (est.interval(test.row(i)).contains(test.target(i))) ++covered;
      }
      coverages.push_back(static_cast<double>(covered) /
                          static_cast<double>(test.n()));
    }
    return oracles::sample_pstd(coverages);
  };

  const double std_small = coverage_std(50, 100000);
  const double std_large = coverage_std(5000, 900000);
  Outcome out;
  out.pass = std_large < std_small;
  std::ostringstream os;
  os << "std@50=" << std_small << " std@5000=" << std_large;
  out.detail = os.str();
  return out;
}

// --- criterion 3: raw MC-dropout undercovers on heteroscedastic data --------

Outcome criterion_dropout_undercoverage() {
  ExperimentConfig cfg = sine_config(0.5, 15);
  MethodSpec drop;
  drop.name = "drop";
  drop.params["dropout"] = 0.1;
  drop.params["mc_samples"] = 50;
  // train to a sensible point fit; the interval still misses the noise scale
  drop.params["learning_rate"] = 5e-3;
  drop.params["epochs"] = 200;
  cfg.methods.push_back(drop);
  const ResultsTable table = run(cfg);
  const AggregateRow& agg = find_aggregate(table, "drop");
  Outcome out;
  out.pass = agg.n_rows == cfg.n_splits && agg.coverage_mean < 0.85;
  std::ostringstream os;
  os << "mean coverage=" << agg.coverage_mean;
  out.detail = os.str();
  return out;
}

// --- criterion 4: calibrating an overfit forest on its own training data ----

Outcome criterion_unsafe_calibration() {
  auto base = [] {
    ExperimentConfig cfg = sine_config(0.5, 20);
    MethodSpec rf;
    rf.name = "rf_cp";
    rf.params["max_depth"] = -1.0;  // unlimited
    rf.params["min_leaf"] = 1.0;
    cfg.methods.push_back(rf);
    return cfg;
  };
  ExperimentConfig proper = base();
  ExperimentConfig unsafe = base();
  unsafe.unsafe_train_calibration = true;

  const double cov_proper = find_aggregate(run(proper), "rf_cp").coverage_mean;
  const double cov_unsafe = find_aggregate(run(unsafe), "rf_cp").coverage_mean;
  Outcome out;
  out.pass = cov_unsafe <= cov_proper - 0.02;
  std::ostringstream os;
  os << "proper=" << cov_proper << " unsafe=" << cov_unsafe;
  out.detail = os.str();
  return out;
}

// --- criterion 5: 75/25 train/cal keeps coverage, does not widen ------------

Outcome criterion_split_ratio() {
  // the conformalized point net benefits most from extra training data, so
  // the width effect is visible well above the split-to-split noise
  auto with_cal_frac = [](double cal_frac) {
    ExperimentConfig cfg = sine_config(cal_frac, 50);
    cfg.data.synthetic.noise_scale = 0.1;
    MethodSpec nn;
    nn.name = "nn_cp";
    cfg.methods.push_back(nn);
    return run(cfg);
  };
  const AggregateRow half = find_aggregate(with_cal_frac(0.5), "nn_cp");
  const AggregateRow quarter = find_aggregate(with_cal_frac(0.25), "nn_cp");

  Outcome out;
  const bool coverage_ok = std::abs(half.coverage_mean - 0.9) <= 0.02 &&
                           std::abs(quarter.coverage_mean - 0.9) <= 0.02;
  const bool width_ok = quarter.width_mean <= half.width_mean;
  out.pass = coverage_ok && width_ok;
  std::ostringstream os;
  os << "cov(50/50)=" << half.coverage_mean << " cov(75/25)=" << quarter.coverage_mean
     << " width(50/50)=" << half.width_mean << " width(75/25)=" << quarter.width_mean;
  out.detail = os.str();
  return out;
}

// --- criterion 6: GP equals dense joint-Gaussian conditioning ---------------

double kernel_ref(std::span<const double> a, std::span<const double> b,
                  const GPHyper& h) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) d2 += (a[j] - b[j]) * (a[j] - b[j]);
  return h.signal_variance * std::exp(-d2 / (2.0 * h.lengthscale * h.lengthscale));
}

Outcome criterion_gp_oracle() {
  double worst = 0.0;
  Rng rng(2305);
  for (std::size_t n : {2u, 3u, 4u, 5u}) {
    std::vector<double> f(n), t(n);
    for (auto& v : f) v = rng.uniform() * 4.0 - 2.0;
    for (auto& v : t) v = rng.normal();
    const Dataset ds(std::vector<double>(f), std::vector<double>(t), 1);
    const GPHyper h{0.9, 1.2, 0.15};
    const GPModel gp(ds, h);

    Eigen::MatrixXd K(n, n);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y(i) = t[i];
      for (std::size_t j = 0; j < n; ++j) {
        K(i, j) = kernel_ref(ds.row(i), ds.row(j), h);
        if (i == j) K(i, j) += h.noise_variance;
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    const Eigen::MatrixXd K_inv = lu.inverse();

    for (int probe = 0; probe < 10; ++probe) {
      const std::vector<double> x = {rng.uniform() * 6.0 - 3.0};
      Eigen::VectorXd k_star(n);
      for (std::size_t i = 0; i < n; ++i) k_star(i) = kernel_ref(ds.row(i), x, h);
      const double mean_ref = (k_star.transpose() * K_inv * y)(0);
      const double var_ref = kernel_ref(x, x, h) + h.noise_variance -
                             (k_star.transpose() * K_inv * k_star)(0);
      const auto [mean, var] = gp.posterior(x);
      worst = std::max(worst, std::abs(mean - mean_ref));
      worst = std::max(worst, std::abs(var - var_ref));
    }

    const double quad = (y.transpose() * K_inv * y)(0);
    const double lml_ref = -0.5 * quad - 0.5 * std::log(std::abs(lu.determinant())) -
                           0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
    worst = std::max(worst, std::abs(gp.log_marginal_likelihood() - lml_ref));
  }
  Outcome out;
  out.pass = worst < 1e-8;
  std::ostringstream os;
  os << "max abs deviation=" << worst;
  out.detail = os.str();
  return out;
}

// --- criterion 7: finite-difference gradient suite --------------------------

Outcome criterion_gradients() {
  Outcome out;
  out.pass = true;
  std::ostringstream os;
  // moderate softness keeps the QD third derivative small enough for the
  // h=1e-5 central difference to stay in its truncation regime
  const std::pair<const char*, LossKind> cases[] = {
      {"mse", LossKind::mse()},
      {"gauss_nll", LossKind::gauss_nll()},
      {"pinball", LossKind::pinball({0.1, 0.5, 0.9})},
      {"soft_qd", LossKind::qd(0.2, 0.5, 8.0)},
  };
  for (const auto& [name, loss] : cases) {
    const auto report = fd_check::run(loss, 100, 811);
    const bool ok = report.configs_checked >= 100 && report.max_rel_err < 1e-4;
    os << name << "=" << report.max_rel_err << (ok ? " " : "(!) ");
    out.pass = out.pass && ok;
  }
  out.detail = os.str();
  return out;
}

// --- criterion 8: conformal closed forms equal the grid-scanned region ------

struct GridHit {
  double lo = 0.0;
  double hi = 0.0;
};

GridHit grid_scan(const std::function<double(std::span<const double>, double)>& score,
                  std::span<const double> x, double critical, double center,
                  double span, double step) {
  GridHit hit;
  bool found = false;
  for (double y = center - span; y <= center + span; y += step) {
    if (score(x, y) <= critical) {
      if (!found) {
        hit.lo = y;
        found = true;
      }
      hit.hi = y;
    }
  }
  if (!found) throw std::runtime_error("grid scan found an empty region");
  return hit;
}

Outcome criterion_conformal_region_oracle() {
  Rng rng(907);
  double worst_ratio = 0.0;  // endpoint deviation in units of the local grid step
  for (int config = 0; config < 100; ++config) {
    // random affine model, random calibration set, random probe
    const double slope = rng.uniform() * 4.0 - 2.0;
    const double intercept = rng.uniform() * 2.0 - 1.0;
    auto model = [slope, intercept](std::span<const double> x) {
      return intercept + slope * x[0];
    };
    auto disp = [](std::span<const double> x) { return 0.5 + std::abs(x[0]); };

    const std::size_t n_cal = 20 + rng.below(80);
    std::vector<double> cf(n_cal), ct(n_cal);
    for (std::size_t i = 0; i < n_cal; ++i) {
      cf[i] = rng.uniform() * 2.0 - 1.0;
      ct[i] = model(std::vector<double>{cf[i]}) + rng.normal();
    }
    const Dataset cal(std::move(cf), std::move(ct), 1);
    const double alpha = 0.05 + rng.uniform() * 0.3;
    const std::vector<double> probe = {rng.uniform() * 2.0 - 1.0};

    // base interval net for the interval wrapper
    NetParams qnet = NetParams::init(1, 2, 0.0, rng.next_u64(), 8);
    const IntervalEstimator qr_base = qr_estimator(qnet, alpha, 2.0);

    struct WrapCase {
      std::function<double(std::span<const double>, double)> score;
      IntervalEstimator est;
      double center;
    };
    std::vector<WrapCase> wraps;
    wraps.push_back({[model](std::span<const double> x, double y) {
                       return std::abs(y - model(x));
                     },
                     conformalize_point(model, cal, alpha), model(probe)});
    wraps.push_back({[model, disp](std::span<const double> x, double y) {
                       return std::abs(y - model(x)) / disp(x);
                     },
                     conformalize_normalized(model, disp, cal, alpha), model(probe)});
    const Interval base_iv = qr_base.interval(probe);
    wraps.push_back({[&qr_base](std::span<const double> x, double y) {
                       const Interval iv = qr_base.interval(x);
                       return std::max(iv.lower - y, y - iv.upper);
                     },
                     conformalize_interval(qr_base, cal, alpha),
                     (base_iv.lower + base_iv.upper) / 2.0});

    for (const auto& wrap : wraps) {
      // the generic region uses the calibrated critical value directly
      NonconformityMeasure measure;
      measure.score = wrap.score;
      const CalibrationRecord rec = calibrate(measure, cal, alpha);
      const double critical = rec.critical;

      // resolution: 1e-3 of the calibration score range
      const double range = std::max(rec.scores.back() - rec.scores.front(), 1e-6);
      const double step = 1e-3 * range;
      const Interval closed = wrap.est.interval(probe);
      const double span = std::max({std::abs(closed.lower - wrap.center),
                                    std::abs(closed.upper - wrap.center), 1.0}) +
                          10.0 * step + 1.0;
      const GridHit hit = grid_scan(wrap.score, probe, critical, wrap.center, span, step);
      const double deviation = std::max(std::abs(hit.lo - closed.lower),
                                        std::abs(hit.hi - closed.upper));
      worst_ratio = std::max(worst_ratio, deviation / step);
      if (deviation > step + 1e-9) {
        Outcome out;
        out.pass = false;
        std::ostringstream os;
        os << "config " << config << ": deviation " << deviation << " > step " << step;
        out.detail = os.str();
        return out;
      }
    }
  }
  Outcome out;
  out.pass = true;
  std::ostringstream os;
  os << "max deviation/step=" << worst_ratio;
  out.detail = os.str();
  return out;
}

// --- criterion 9: QRF consistency -------------------------------------------

Outcome criterion_qrf_consistency() {
  Outcome out;
  out.pass = true;
  std::ostringstream os;

  // single-leaf forest: quantiles equal empirical target quantiles exactly
  {
    const std::size_t n = 37;
    Rng rng(1201);
    std::vector<double> f(n), t(n);
    for (auto& v : f) v = rng.uniform();
    for (auto& v : t) v = rng.normal();
    const Dataset ds(std::vector<double>(f), std::vector<double>(t), 1);
    ForestConfig cfg;
    cfg.n_trees = 1;
    cfg.max_depth = 0;
    cfg.seed = 5;
    const Forest forest = fit_forest(ds, cfg);
    bool exact = true;
    for (long long j = 1; j <= 19; ++j) {
      const double beta = static_cast<double>(j) / 20.0;
      const double got = forest.qrf_quantile(ds.row(0), beta);
      const double expected = oracles::quantile_rational(t, j, 20);
      exact = exact && got == expected;
    }
    os << "single-leaf exact=" << (exact ? "yes" : "no") << " ";
    out.pass = out.pass && exact;
  }

  // monotone CDF and the Galois property on 10^4 probes
  {
    const Dataset ds = sine_data(150, 1301, 0.3, 1);
    ForestConfig cfg;
    cfg.n_trees = 50;
    cfg.seed = 17;
    const Forest forest = fit_forest(ds, cfg);
    Rng rng(1307);
    bool monotone = true;
    bool galois = true;
    for (int k = 0; k < 10000; ++k) {
      const std::vector<double> x = {rng.uniform() * 2.0 - 1.0};
      const double y1 = rng.normal();
      const double y2 = y1 + rng.uniform();
      if (forest.qrf_cdf(x, y2) < forest.qrf_cdf(x, y1)) monotone = false;
      const double beta = 0.01 + rng.uniform() * 0.98;
      const double q = forest.qrf_quantile(x, beta);
      if (forest.qrf_cdf(x, q) < beta) galois = false;
    }
    os << "monotone=" << (monotone ? "yes" : "no")
       << " galois=" << (galois ? "yes" : "no");
    out.pass = out.pass && monotone && galois;
  }
  return out;
}

// --- criterion 10: OOB conformal equals the quantile-shift estimator --------

Outcome criterion_oob_equivalence() {
  const Dataset train = sine_data(50, 1409, 0.3, 1);
  ForestConfig cfg;
  cfg.n_trees = 100;
  cfg.seed = 1423;
  auto forest = std::make_shared<const Forest>(fit_forest(train, cfg));

  std::vector<double> residuals;
  for (std::size_t i = 0; i < train.n(); ++i) {
    if (!forest->has_oob(i)) {
      Outcome out;
      out.detail = "an index lost its out-of-bag ensemble";
      return out;
    }
    residuals.push_back(train.target(i) - forest->predict_oob(train.row(i), i));
  }
  std::vector<double> sym = residuals;
  for (double r : residuals) sym.push_back(-r);

  const auto [lo_shift, hi_shift] = oob_shifts(sym, 0.1);
  std::vector<double> abs_sym;
  for (double r : sym) abs_sym.push_back(std::abs(r));
  const double level = 0.9 * (1.0 + 1.0 / static_cast<double>(abs_sym.size()));
  const double critical = empirical_quantile(abs_sym, level);

  double worst = 0.0;
  const Dataset probes = sine_data(50, 1429, 0.3, 1);
  for (std::size_t i = 0; i < probes.n(); ++i) {
    const double y_hat = forest->predict(probes.row(i));
    worst = std::max(worst, std::abs((y_hat + lo_shift) - (y_hat - critical)));
    worst = std::max(worst, std::abs((y_hat + hi_shift) - (y_hat + critical)));
  }
  Outcome out;
  out.pass = worst <= 1e-12;
  std::ostringstream os;
  os << "max endpoint deviation=" << worst;
  out.detail = os.str();
  return out;
}

// --- criterion 11: gaussian_interval statistical calibration ----------------

Outcome criterion_gaussian_calibration() {
  const double z = two_tailed_z(0.1);
  const bool z_ok = z >= 1.6448 && z <= 1.6450;

  Rng rng(1531);
  const std::size_t n = 100000;
  const double mu = -0.3;
  const double sigma = 1.7;
  const Interval iv = gaussian_interval(mu, sigma, 0.1);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (iv.contains(mu + sigma * rng.normal())) ++inside;
  }
  const double freq = static_cast<double>(inside) / static_cast<double>(n);
  const double se = std::sqrt(0.9 * 0.1 / static_cast<double>(n));
  Outcome out;
  out.pass = z_ok && std::abs(freq - 0.9) <= 3.0 * se;
  std::ostringstream os;
  os << "z=" << z << " freq=" << freq << " band=" << 3.0 * se;
  out.detail = os.str();
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Criterion> criteria = {
      {1, "conformal wrappers reach near-nominal mean coverage",
       criterion_marginal_validity},
      {2, "coverage std contracts as the calibration set grows",
       criterion_coverage_contraction},
      {3, "raw MC-dropout undercovers on heteroscedastic data",
       criterion_dropout_undercoverage},
      {4, "calibrating on training data degrades coverage",
       criterion_unsafe_calibration},
      {5, "75/25 split keeps coverage and does not widen intervals",
       criterion_split_ratio},
      {6, "GP matches dense joint-Gaussian conditioning", criterion_gp_oracle},
      {7, "loss gradients match central finite differences", criterion_gradients},
      {8, "conformal closed forms equal the grid-scanned region",
       criterion_conformal_region_oracle},
      {9, "quantile-forest CDF/quantile consistency", criterion_qrf_consistency},
      {10, "OOB conformal equals the quantile-shift form on symmetric residuals",
       criterion_oob_equivalence},
      {11, "Gaussian intervals are statistically calibrated",
       criterion_gaussian_calibration},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.fn();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %2d: %s (%s) [%.1fs]\n",
                outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }
  return failures;
}
