#include "predint/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "predint/conformal.hpp"
#include "predint/forest.hpp"
#include "predint/gp.hpp"
#include "predint/nn.hpp"
#include "predint/ridge.hpp"
#include "predint/rng.hpp"
#include "predint/stats.hpp"

namespace predint {

double MethodSpec::get(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

std::string row_status_name(RowStatus s) {
  switch (s) {
    case RowStatus::ok:
      return "ok";
    case RowStatus::oot:
      return "oot";
    case RowStatus::oor:
      return "oor";
    case RowStatus::error:
      return "error";
  }
  return "";
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  nlohmann::json j;
  in >> j;

  if (!j.contains("version") || j["version"].get<int>() != 1) {
    throw std::runtime_error("load_config: expected \"version\": 1");
  }
  ExperimentConfig cfg;
  const auto& data = j.at("data");
  if (data.contains("csv")) {
    cfg.data.use_csv = true;
    cfg.data.csv_path = data["csv"].at("path").get<std::string>();
    if (data["csv"].contains("target")) {
      cfg.data.csv_target = data["csv"]["target"].get<std::string>();
    } else {
      cfg.data.csv_target_index = data["csv"].at("target_index").get<std::size_t>();
    }
  } else if (data.contains("synthetic")) {
    const auto& s = data["synthetic"];
    cfg.data.synthetic.kind = parse_synthetic_kind(s.at("kind").get<std::string>());
    cfg.data.synthetic.n = s.at("n").get<std::size_t>();
    cfg.data.synthetic.d = s.value("d", std::size_t{1});
    cfg.data.synthetic.noise_scale = s.value("noise_scale", 1.0);
  } else {
    throw std::runtime_error("load_config: data needs \"csv\" or \"synthetic\"");
  }

  cfg.alpha = j.value("alpha", 0.1);
  cfg.n_splits = j.value("n_splits", std::size_t{50});
  cfg.test_frac = j.value("test_frac", 0.2);
  cfg.cal_frac = j.value("cal_frac", 0.5);
  cfg.base_seed = j.value("base_seed", std::uint64_t{0});
  cfg.unsafe_train_calibration = j.value("unsafe_train_calibration", false);
  cfg.time_budget_s = j.value("time_budget_s", 600.0);

  if (!j.contains("methods") || !j["methods"].is_array() || j["methods"].empty()) {
    throw std::runtime_error("load_config: needs a non-empty methods array");
  }
  for (const auto& m : j["methods"]) {
    MethodSpec spec;
    spec.name = m.at("name").get<std::string>();
    for (const auto& [key, value] : m.items()) {
      if (key == "name") continue;
      if (value.is_boolean()) {
        spec.params[key] = value.get<bool>() ? 1.0 : 0.0;
      } else {
        spec.params[key] = value.get<double>();
      }
    }
    cfg.methods.push_back(std::move(spec));
  }
  return cfg;
}

namespace {

struct TrainedNets {
  NetParams net;
  std::string detail;
};

// Carves a deterministic validation slice (frac of rows, at least one) off a
// training set, for early stopping and hyperparameter tuning.
std::pair<Dataset, Dataset> carve_validation(const Dataset& train, std::uint64_t seed,
                                             double frac = 0.05) {
  const std::size_t n = train.n();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * frac));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + n_val);
  std::vector<std::size_t> fit_idx(idx.begin() + n_val, idx.end());
  return {train.subset(fit_idx), train.subset(val_idx)};
}

TrainConfig base_train_config(const MethodSpec& spec, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = spec.get("learning_rate", 5e-4);
  cfg.epochs = static_cast<std::size_t>(spec.get("epochs", 100));
  cfg.batch_size = static_cast<std::size_t>(spec.get("batch_size", 0));
  cfg.l2_lambda = spec.get("l2_lambda", 1e-6);
  cfg.patience = static_cast<std::size_t>(spec.get("patience", 10));
  cfg.seed = seed;
  return cfg;
}

// Trains a net with loss-based early stopping, optionally tuning the dropout
// probability over the usual 0.05..0.5 grid on the validation slice.
TrainedNets train_with_dropout(const MethodSpec& spec, const Dataset& train,
                               std::uint64_t seed, const LossKind& loss,
                               std::size_t out_dim) {
  const auto [fit_ds, val_ds] = carve_validation(train, seed);
  TrainConfig cfg = base_train_config(spec, seed);
  cfg.early_stopping = TrainConfig::Stopping::loss;

  const bool tune = spec.get("tune_dropout", 0.0) != 0.0;
  std::vector<double> grid;
  if (tune) {
    for (double p = 0.05; p < 0.5001; p += 0.05) grid.push_back(p);
  } else {
    grid.push_back(spec.get("dropout", 0.1));
  }

  TrainedNets best;
  double best_val = std::numeric_limits<double>::infinity();
  for (double p : grid) {
    NetParams net = NetParams::init(train.dim(), out_dim, p, seed);
    NetParams trained = predint::train(net, fit_ds, &val_ds, cfg, loss);
    const double vl =
        batch_loss(trained, val_ds.features(), val_ds.n(), val_ds.targets(), loss);
    if (vl < best_val) {
      best_val = vl;
      best.net = std::move(trained);
      if (tune) {
        std::ostringstream os;
        os << "dropout=" << p;
        best.detail = os.str();
      }
    }
  }
  return best;
}

ForestConfig forest_config(const MethodSpec& spec, std::uint64_t seed) {
  ForestConfig cfg;
  cfg.n_trees = static_cast<std::size_t>(spec.get("n_trees", 100));
  const double md = spec.get("max_depth", -1.0);
  cfg.max_depth = md < 0.0 ? std::numeric_limits<std::size_t>::max()
                           : static_cast<std::size_t>(md);
  cfg.min_leaf = static_cast<std::size_t>(spec.get("min_leaf", 1));
  cfg.features_per_split = static_cast<std::size_t>(spec.get("features_per_split", 0));
  cfg.seed = seed;
  return cfg;
}

IntervalEstimator forest_ensemble_estimator(std::shared_ptr<const Forest> forest,
                                            double alpha) {
  return IntervalEstimator(
      "rf_ens", alpha,
      [forest, alpha](std::span<const double> x) {
        const auto preds = forest->tree_predictions(x);
        const auto [mu, sigma] = ensemble_moments(preds);
        return gaussian_interval(mu, sigma, alpha);
      },
      [forest](std::span<const double> x) { return forest->predict(x); });
}

IntervalEstimator qrf_estimator(std::shared_ptr<const Forest> forest, double alpha) {
  return IntervalEstimator(
      "qrf", alpha,
      [forest, alpha](std::span<const double> x) {
        double lo = forest->qrf_quantile(x, alpha / 2.0);
        double hi = forest->qrf_quantile(x, 1.0 - alpha / 2.0);
        if (lo > hi) std::swap(lo, hi);
        return Interval(lo, hi);
      },
      [forest](std::span<const double> x) { return forest->predict(x); });
}

DispersionFn forest_dispersion(std::shared_ptr<const Forest> forest) {
  // Tree-ensemble spread with a small floor keeping it positive everywhere;
  // the conformal scaling is invariant to the dispersion's overall scale.
  return [forest](std::span<const double> x) {
    const auto preds = forest->tree_predictions(x);
    return population_std(preds) + 1e-3;
  };
}

struct MethodEntry {
  std::string description;
  BuiltMethod (*build)(const MethodSpec&, const Dataset&, const Dataset&, double,
                       std::uint64_t);
  bool needs_calibration = false;
};

BuiltMethod build_ridge_cp(const MethodSpec& spec, const Dataset& train,
                           const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)seed;
  auto model = std::make_shared<RidgeModel>(
      RidgeModel::fit(train, spec.get("ridge_lambda", 1e-3)));
  auto predict = [model](std::span<const double> x) { return model->predict(x); };
  return {conformalize_point(predict, cal, alpha, "ridge_cp"), ""};
}

BuiltMethod build_nn_cp(const MethodSpec& spec, const Dataset& train,
                        const Dataset& cal, double alpha, std::uint64_t seed) {
  TrainedNets t = train_with_dropout(spec, train, seed, LossKind::mse(), 1);
  auto net = std::make_shared<const NetParams>(std::move(t.net));
  auto predict = [net](std::span<const double> x) { return forward(*net, x)[0]; };
  return {conformalize_point(predict, cal, alpha, "nn_cp"), t.detail};
}

BuiltMethod build_rf_cp(const MethodSpec& spec, const Dataset& train,
                        const Dataset& cal, double alpha, std::uint64_t seed) {
  auto forest =
      std::make_shared<const Forest>(fit_forest(train, forest_config(spec, seed)));
  auto predict = [forest](std::span<const double> x) { return forest->predict(x); };
  return {conformalize_point(predict, cal, alpha, "rf_cp"), ""};
}

BuiltMethod build_rf_ncp(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed) {
  auto forest =
      std::make_shared<const Forest>(fit_forest(train, forest_config(spec, seed)));
  auto predict = [forest](std::span<const double> x) { return forest->predict(x); };
  return {conformalize_normalized(predict, forest_dispersion(forest), cal, alpha,
                                  "rf_ncp"),
          ""};
}

BuiltMethod build_rf_ens(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  auto forest =
      std::make_shared<const Forest>(fit_forest(train, forest_config(spec, seed)));
  return {forest_ensemble_estimator(forest, alpha), ""};
}

BuiltMethod build_rf_ens_cp(const MethodSpec& spec, const Dataset& train,
                            const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_rf_ens(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "rf_ens_cp"), ""};
}

BuiltMethod build_rf_oob(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  auto forest =
      std::make_shared<const Forest>(fit_forest(train, forest_config(spec, seed)));
  return {oob_interval_estimator(forest, train, alpha), ""};
}

BuiltMethod build_rf_oob_cp(const MethodSpec& spec, const Dataset& train,
                            const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;  // calibrates on out-of-bag residuals over the training set
  auto forest =
      std::make_shared<const Forest>(fit_forest(train, forest_config(spec, seed)));
  return {conformalize_oob(forest, train, alpha, "rf_oob_cp"), ""};
}

BuiltMethod build_qrf(const MethodSpec& spec, const Dataset& train,
                      const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  auto forest =
      std::make_shared<const Forest>(fit_forest(train, forest_config(spec, seed)));
  return {qrf_estimator(forest, alpha), ""};
}

BuiltMethod build_qrf_cp(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_qrf(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "qrf_cp"), ""};
}

BuiltMethod build_gp(const MethodSpec& spec, const Dataset& train,
                     const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  (void)seed;
  GPHyper init;
  init.lengthscale = spec.get("lengthscale", 1.0);
  init.signal_variance = spec.get("signal_variance", 1.0);
  init.noise_variance = spec.get("noise_variance", 0.1);
  const std::size_t iters = static_cast<std::size_t>(spec.get("gp_iters", 50));
  auto model = std::make_shared<const GPModel>(fit_gp(train, init, iters));
  return {gp_estimator(model, alpha), ""};
}

BuiltMethod build_gp_cp(const MethodSpec& spec, const Dataset& train,
                        const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_gp(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "gp_cp"), ""};
}

BuiltMethod build_drop(const MethodSpec& spec, const Dataset& train,
                       const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  TrainedNets t = train_with_dropout(spec, train, seed, LossKind::mse(), 1);
  const std::size_t R = static_cast<std::size_t>(spec.get("mc_samples", 50));
  return {dropout_estimator(t.net, R, alpha, seed), t.detail};
}

BuiltMethod build_drop_cp(const MethodSpec& spec, const Dataset& train,
                          const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_drop(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "dropout_cp"),
          base.detail};
}

BuiltMethod build_mve(const MethodSpec& spec, const Dataset& train,
                      const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  TrainedNets t = train_with_dropout(spec, train, seed, LossKind::gauss_nll(), 2);
  const std::size_t R = static_cast<std::size_t>(spec.get("mc_samples", 50));
  return {mve_estimator(t.net, R, alpha, seed), t.detail};
}

BuiltMethod build_mve_cp(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_mve(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "mve_cp"), base.detail};
}

BuiltMethod build_mve_ncp(const MethodSpec& spec, const Dataset& train,
                          const Dataset& cal, double alpha, std::uint64_t seed) {
  TrainedNets t = train_with_dropout(spec, train, seed, LossKind::gauss_nll(), 2);
  const std::size_t R = static_cast<std::size_t>(spec.get("mc_samples", 50));
  IntervalEstimator base = mve_estimator(t.net, R, alpha, seed);
  auto predict = [base](std::span<const double> x) { return base.point(x); };
  // Predictive sigma as the dispersion: recovered from the interval width.
  const double z = two_tailed_z(alpha);
  auto dispersion = [base, z](std::span<const double> x) {
    return base.interval(x).width() / (2.0 * z) + 1e-9;
  };
  return {conformalize_normalized(predict, dispersion, cal, alpha, "mve_ncp"),
          t.detail};
}

BuiltMethod build_de(const MethodSpec& spec, const Dataset& train,
                     const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  const std::size_t R = static_cast<std::size_t>(spec.get("ensemble_size", 5));
  TrainConfig cfg = base_train_config(spec, seed);
  cfg.adversarial = true;
  cfg.adversarial_eta_scale = spec.get("adversarial_eta_scale", 0.01);

  const auto seeds = derive_stream_seeds(seed, R);
  std::vector<NetParams> nets;
  nets.reserve(R);
  for (std::size_t r = 0; r < R; ++r) {
    cfg.seed = seeds[r];
    NetParams net = NetParams::init(train.dim(), 2, spec.get("dropout", 0.0), seeds[r]);
    nets.push_back(predint::train(net, train, nullptr, cfg, LossKind::gauss_nll()));
  }
  return {deep_ensemble_estimator(std::move(nets), alpha), ""};
}

BuiltMethod build_de_cp(const MethodSpec& spec, const Dataset& train,
                        const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_de(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "de_cp"), ""};
}

BuiltMethod build_qr(const MethodSpec& spec, const Dataset& train,
                     const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  const double w = spec.get("softening", 2.0);
  const auto [lo, hi] = qr_levels(alpha, w);
  LossKind loss = LossKind::pinball({lo, hi}, alpha);

  const auto [fit_ds, val_ds] = carve_validation(train, seed);
  TrainConfig cfg = base_train_config(spec, seed);
  cfg.early_stopping = TrainConfig::Stopping::interval;
  NetParams net =
      NetParams::init(train.dim(), 2, spec.get("dropout", 0.1), seed);
  NetParams trained = predint::train(net, fit_ds, &val_ds, cfg, loss);
  return {qr_estimator(trained, alpha, w), ""};
}

BuiltMethod build_qr_cp(const MethodSpec& spec, const Dataset& train,
                        const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_qr(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "qr_cp"), ""};
}

BuiltMethod build_qd(const MethodSpec& spec, const Dataset& train,
                     const Dataset& cal, double alpha, std::uint64_t seed) {
  (void)cal;
  LossKind loss = LossKind::qd(alpha, spec.get("lambda_qd", 0.05),
                               spec.get("softness", 160.0));
  const auto [fit_ds, val_ds] = carve_validation(train, seed);
  TrainConfig cfg = base_train_config(spec, seed);
  cfg.early_stopping = TrainConfig::Stopping::interval;
  NetParams net =
      NetParams::init(train.dim(), 2, spec.get("dropout", 0.0), seed);
  NetParams trained = predint::train(net, fit_ds, &val_ds, cfg, loss);
  return {qd_estimator(trained, alpha), ""};
}

BuiltMethod build_qd_cp(const MethodSpec& spec, const Dataset& train,
                        const Dataset& cal, double alpha, std::uint64_t seed) {
  BuiltMethod base = build_qd(spec, train, cal, alpha, seed);
  return {conformalize_interval(base.estimator, cal, alpha, "qd_cp"), ""};
}

const std::vector<std::pair<std::string, MethodEntry>>& registry() {
  static const std::vector<std::pair<std::string, MethodEntry>> table = {
      {"ridge_cp", {"split-conformal intervals around a ridge point predictor", build_ridge_cp, true}},
      {"nn_cp", {"split-conformal intervals around a feed-forward point predictor", build_nn_cp, true}},
      {"rf_cp", {"split-conformal intervals around the forest mean", build_rf_cp, true}},
      {"rf_ncp", {"normalized conformal forest intervals, tree-spread dispersion", build_rf_ncp, true}},
      {"rf_ens", {"Gaussian interval from per-tree prediction moments", build_rf_ens, false}},
      {"rf_ens_cp", {"rf_ens calibrated with the interval residual measure", build_rf_ens_cp, true}},
      {"rf_oob", {"constant-width interval from signed out-of-bag residual quantiles", build_rf_oob, false}},
      {"rf_oob_cp", {"conformal intervals calibrated on absolute out-of-bag residuals", build_rf_oob_cp, false}},
      {"qrf", {"quantile regression forest interval [q_a/2, q_1-a/2]", build_qrf, false}},
      {"qrf_cp", {"qrf calibrated with the interval residual measure", build_qrf_cp, true}},
      {"gp", {"exact GP predictive interval, RBF kernel", build_gp, false}},
      {"gp_cp", {"gp calibrated with the interval residual measure", build_gp_cp, true}},
      {"drop", {"Monte-Carlo dropout ensemble interval", build_drop, false}},
      {"drop_cp", {"drop calibrated with the interval residual measure", build_drop_cp, true}},
      {"mve", {"dropout mean-variance estimator interval", build_mve, false}},
      {"mve_cp", {"mve calibrated with the interval residual measure", build_mve_cp, true}},
      {"mve_ncp", {"normalized conformal intervals, predictive-sigma dispersion", build_mve_ncp, true}},
      {"de", {"deep ensemble of mean-variance nets with FGSM training", build_de, false}},
      {"de_cp", {"de calibrated with the interval residual measure", build_de_cp, true}},
      {"qr", {"quantile-pair net trained with pinball loss, softening w", build_qr, false}},
      {"qr_cp", {"qr calibrated with the interval residual measure", build_qr_cp, true}},
      {"qd", {"direct interval net trained with the captured-width objective", build_qd, false}},
      {"qd_cp", {"qd calibrated with the interval residual measure", build_qd_cp, true}},
  };
  return table;
}

}  // namespace

BuiltMethod build_method(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed) {
  for (const auto& [name, entry] : registry()) {
    if (name == spec.name) return entry.build(spec, train, cal, alpha, seed);
  }
  throw std::invalid_argument("unknown method: " + spec.name);
}

std::vector<std::pair<std::string, std::string>> list_methods() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, entry] : registry()) out.emplace_back(name, entry.description);
  return out;
}

namespace {

Dataset load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.data.use_csv) {
    TargetColumn target;
    if (!cfg.data.csv_target.empty()) {
      target = cfg.data.csv_target;
    } else {
      target = cfg.data.csv_target_index;
    }
    return load_csv(cfg.data.csv_path, target);
  }
  return gen_synthetic(cfg.data.synthetic, cfg.base_seed);
}

}  // namespace

ResultsTable run(const ExperimentConfig& config) {
  if (config.methods.empty()) throw std::invalid_argument("run: no methods configured");
  if (config.n_splits == 0) throw std::invalid_argument("run: n_splits must be >= 1");

  const Dataset ds = load_experiment_data(config);
  ResultsTable table;

  for (std::size_t s = 0; s < config.n_splits; ++s) {
    const std::uint64_t split_seed = config.base_seed + s;
    const SplitTriple triple = split(ds, split_seed, config.test_frac, config.cal_frac);
    if (!config.unsafe_train_calibration) {
      std::set<std::size_t> train_set(triple.train_idx.begin(), triple.train_idx.end());
      for (std::size_t i : triple.cal_idx) {
        if (train_set.count(i) != 0) {
          throw std::logic_error("run: calibration index leaked into training set");
        }
      }
      if (triple.cal_idx.empty()) {
        for (const auto& m : config.methods) {
          for (const auto& [name, entry] : registry()) {
            if (name == m.name && entry.needs_calibration) {
              throw std::invalid_argument(
                  "run: method '" + m.name +
                  "' needs cal_frac > 0 (or the unsafe flag)");
            }
          }
        }
      }
    }

    const Dataset train_raw = ds.subset(triple.train_idx);
    const ScalerParams scaler = fit_scaler(train_raw);
    const Dataset train_s = apply_scaler(train_raw, scaler);
    const Dataset test_s = apply_scaler(ds.subset(triple.test_idx), scaler);
    Dataset cal_s = config.unsafe_train_calibration || triple.cal_idx.empty()
                        ? train_s
                        : apply_scaler(ds.subset(triple.cal_idx), scaler);

    const Dataset all_s = apply_scaler(ds, scaler);
    const std::vector<double> targets_all(all_s.targets().begin(),
                                          all_s.targets().end());
    const double gap =
        empirical_quantile(targets_all, 1.0 - config.alpha / 2.0) -
        empirical_quantile(targets_all, config.alpha / 2.0);

    const auto method_seeds = derive_stream_seeds(split_seed, config.methods.size());
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      ResultRow row;
      row.method = config.methods[m].name;
      row.split = s;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        BuiltMethod built = build_method(config.methods[m], train_s, cal_s,
                                         config.alpha, method_seeds[m]);
        row.metrics = evaluate(built.estimator, test_s, targets_all, config.alpha);
        row.detail = built.detail;
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        if (row.wall_ms > config.time_budget_s * 1000.0) {
          row.status = RowStatus::oot;
        } else if ((std::isfinite(row.metrics.r2) && row.metrics.r2 < -1.0) ||
                   row.metrics.mean_width > 100.0 * gap) {
          row.status = RowStatus::oor;
        }
      } catch (const std::exception& e) {
        const auto t1 = std::chrono::steady_clock::now();
        row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        row.status = RowStatus::error;
        row.detail = e.what();
      }
      table.rows.push_back(std::move(row));
    }
  }

  table.aggregates = aggregate(table.rows);
  return table;
}

namespace {

struct Welford {
  std::vector<double> values;
  void add(double v) { values.push_back(v); }
  double mean() const {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    return predint::mean(values);
  }
  double pstd() const {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    return population_std(values);
  }
};

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.method) == order.end()) {
      order.push_back(r.method);
    }
  }

  std::vector<AggregateRow> out;
  for (const auto& name : order) {
    AggregateRow agg;
    agg.method = name;
    Welford cov, wid, rel, r2v, wall;
    for (const auto& r : rows) {
      if (r.method != name) continue;
      const bool usable = r.status == RowStatus::ok &&
                          std::isfinite(r.metrics.mean_width) &&
                          std::isfinite(r.metrics.relative_width);
      if (!usable) {
        ++agg.n_excluded;
        continue;
      }
      ++agg.n_rows;
      cov.add(r.metrics.coverage);
      wid.add(r.metrics.mean_width);
      rel.add(r.metrics.relative_width);
      if (std::isfinite(r.metrics.r2)) r2v.add(r.metrics.r2);
      wall.add(r.wall_ms);
    }
    agg.coverage_mean = cov.mean();
    agg.coverage_std = cov.pstd();
    agg.width_mean = wid.mean();
    agg.width_std = wid.pstd();
    agg.relwidth_mean = rel.mean();
    agg.relwidth_std = rel.pstd();
    agg.r2_mean = r2v.mean();
    agg.r2_std = r2v.pstd();
    agg.wall_ms_mean = wall.mean();
    out.push_back(std::move(agg));
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string rows_csv(const ResultsTable& table) {
  std::ostringstream os;
  os << "method,split,coverage,mean_width,relative_width,r2,wall_ms,status\n";
  for (const auto& r : table.rows) {
    const bool has_metrics = r.status == RowStatus::ok || r.status == RowStatus::oor ||
                             r.status == RowStatus::oot;
    os << r.method << ',' << r.split << ',';
    if (has_metrics) {
      os << fmt_double(r.metrics.coverage) << ',' << fmt_double(r.metrics.mean_width)
         << ',' << fmt_double(r.metrics.relative_width) << ','
         << fmt_double(r.metrics.r2) << ',';
    } else {
      os << ",,,,";
    }
    os << fmt_double(r.wall_ms) << ',' << row_status_name(r.status) << '\n';
  }
  return os.str();
}

std::string aggregate_csv(const ResultsTable& table) {
  std::ostringstream os;
  os << "method,n_rows,n_excluded,coverage_mean,coverage_std,mean_width_mean,"
        "mean_width_std,relative_width_mean,relative_width_std,r2_mean,r2_std,"
        "wall_ms_mean\n";
  for (const auto& a : table.aggregates) {
    os << a.method << ',' << a.n_rows << ',' << a.n_excluded << ','
       << fmt_double(a.coverage_mean) << ',' << fmt_double(a.coverage_std) << ','
       << fmt_double(a.width_mean) << ',' << fmt_double(a.width_std) << ','
       << fmt_double(a.relwidth_mean) << ',' << fmt_double(a.relwidth_std) << ','
       << fmt_double(a.r2_mean) << ',' << fmt_double(a.r2_std) << ','
       << fmt_double(a.wall_ms_mean) << '\n';
  }
  return os.str();
}

void write_rows_csv(const ResultsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_rows_csv: cannot open " + path);
  out << rows_csv(table);
}

void write_aggregate_csv(const ResultsTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_aggregate_csv: cannot open " + path);
  out << aggregate_csv(table);
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path);
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ds.column_names()[j] << ',';
  out << ds.target_name() << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < ds.dim(); ++j) out << fmt_double(r[j]) << ',';
    out << fmt_double(ds.target(i)) << '\n';
  }
}

}  // namespace predint
