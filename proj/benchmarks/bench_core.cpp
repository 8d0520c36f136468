#include <benchmark/benchmark.h>

#include "predint/conformal.hpp"
#include "predint/dataset.hpp"
#include "predint/forest.hpp"
#include "predint/gp.hpp"
#include "predint/intervals.hpp"
#include "predint/nn.hpp"
#include "predint/ridge.hpp"

namespace {

predint::Dataset make_data(std::size_t n, std::size_t d = 4) {
  predint::SyntheticSpec spec;
  spec.kind = predint::SyntheticKind::sine_heteroscedastic;
  spec.n = n;
  spec.d = d;
  spec.noise_scale = 0.3;
  return predint::gen_synthetic(spec, 7);
}

void BM_ForestFit(benchmark::State& state) {
  const auto ds = make_data(static_cast<std::size_t>(state.range(0)));
  predint::ForestConfig cfg;
  cfg.n_trees = 50;
  cfg.seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predint::fit_forest(ds, cfg));
  }
}
BENCHMARK(BM_ForestFit)->Arg(256)->Arg(1024);

void BM_ForestQrfQuantile(benchmark::State& state) {
  const auto ds = make_data(512);
  predint::ForestConfig cfg;
  cfg.n_trees = 100;
  cfg.seed = 1;
  const auto forest = predint::fit_forest(ds, cfg);
  const auto x = ds.row(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(forest.qrf_quantile(x, 0.95));
  }
}
BENCHMARK(BM_ForestQrfQuantile);

void BM_GpPosterior(benchmark::State& state) {
  const auto ds = make_data(static_cast<std::size_t>(state.range(0)), 2);
  const predint::GPModel gp(ds, predint::GPHyper{1.0, 1.0, 0.1});
  const auto x = ds.row(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gp.posterior(x));
  }
}
BENCHMARK(BM_GpPosterior)->Arg(128)->Arg(512);

void BM_NnTrainEpoch(benchmark::State& state) {
  const auto ds = make_data(512, 4);
  const auto net = predint::NetParams::init(4, 1, 0.0, 3);
  predint::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        predint::train(net, ds, nullptr, cfg, predint::LossKind::mse()));
  }
}
BENCHMARK(BM_NnTrainEpoch);

void BM_DropoutIntervalQuery(benchmark::State& state) {
  const auto net = predint::NetParams::init(4, 1, 0.1, 9);
  const auto est = predint::dropout_estimator(
      net, static_cast<std::size_t>(state.range(0)), 0.1, 21);
  const std::vector<double> x = {0.1, -0.4, 0.7, 0.2};
  for (auto _ : state) {
    benchmark::DoNotOptimize(est.interval(x));
  }
}
BENCHMARK(BM_DropoutIntervalQuery)->Arg(10)->Arg(50);

void BM_ConformalCalibrate(benchmark::State& state) {
  const auto ds = make_data(static_cast<std::size_t>(state.range(0)), 2);
  const auto ridge = predint::RidgeModel::fit(ds);
  auto predict = [&ridge](std::span<const double> x) { return ridge.predict(x); };
  for (auto _ : state) {
    benchmark::DoNotOptimize(predint::conformalize_point(predict, ds, 0.1));
  }
}
BENCHMARK(BM_ConformalCalibrate)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
