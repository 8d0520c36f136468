#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "predint/dataset.hpp"
#include "predint/forest.hpp"
#include "predint/gp.hpp"
#include "predint/intervals.hpp"
#include "predint/nn.hpp"
#include "predint/rng.hpp"
#include "predint/stats.hpp"
#include "support/oracles.hpp"

using namespace predint;

namespace {

Dataset sine_data(std::size_t n, std::uint64_t seed, double noise = 0.3,
                  std::size_t d = 1) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::sine_heteroscedastic;
  spec.n = n;
  spec.d = d;
  spec.noise_scale = noise;
  return gen_synthetic(spec, seed);
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    for (std::size_t k = 0; k < n; ++k) r[idx[k]] = static_cast<double>(k);
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double ma = oracles::sample_mean(ra);
  const double mb = oracles::sample_mean(rb);
  double num = 0.0;
  double da = 0.0;
  double db = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST_CASE("interval basics") {
  CHECK_THROWS(Interval(1.0, 0.0));
  const Interval degenerate(2.0, 2.0);
  CHECK(degenerate.width() == 0.0);
  CHECK(degenerate.contains(2.0));
  const Interval full(-std::numeric_limits<double>::infinity(),
                      std::numeric_limits<double>::infinity());
  CHECK(std::isinf(full.width()));
  CHECK(full.contains(1e300));
}

TEST_CASE("gaussian_interval pinned values") {
  const Interval degenerate = gaussian_interval(3.0, 0.0, 0.1);
  CHECK(degenerate.lower == 3.0);
  CHECK(degenerate.upper == 3.0);

  const Interval iv = gaussian_interval(0.0, 1.0, 0.1);
  CHECK(std::abs(iv.lower + 1.645) < 1e-3);
  CHECK(std::abs(iv.upper - 1.645) < 1e-3);

  const Interval one = gaussian_interval(0.5, 1.0, 0.2);
  const Interval two = gaussian_interval(0.5, 2.0, 0.2);
  CHECK(two.width() == doctest::Approx(2.0 * one.width()).epsilon(1e-12));
}

TEST_CASE("gaussian_interval statistical calibration at alpha = 0.1") {
  Rng rng(42);
  const std::size_t n = 100000;
  std::size_t inside = 0;
  const double mu = 0.7;
  const double sigma = 2.3;
  const Interval iv = gaussian_interval(mu, sigma, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = mu + sigma * rng.normal();
    if (iv.contains(y)) ++inside;
  }
  const double freq = static_cast<double>(inside) / static_cast<double>(n);
  const double se = std::sqrt(0.9 * 0.1 / static_cast<double>(n));
  CHECK(std::abs(freq - 0.9) <= 3.0 * se);
}

TEST_CASE("ensemble_moments pinned values and symmetry") {
  CHECK(ensemble_moments(std::vector<double>{1.0, 1.0, 1.0}) ==
        std::pair<double, double>{1.0, 0.0});
  const auto [mu, sigma] = ensemble_moments(std::vector<double>{0.0, 2.0});
  CHECK(mu == 1.0);
  CHECK(sigma == 1.0);
  const auto a = ensemble_moments(std::vector<double>{0.3, -1.0, 2.5});
  const auto b = ensemble_moments(std::vector<double>{2.5, 0.3, -1.0});
  CHECK(a.first == doctest::Approx(b.first).epsilon(1e-15));
  CHECK(a.second == doctest::Approx(b.second).epsilon(1e-15));
  CHECK_THROWS(ensemble_moments(std::vector<double>{1.0}));
}

TEST_CASE("mve_moments pinned values") {
  const auto single = mve_moments(std::vector<double>{1.7}, std::vector<double>{4.0});
  CHECK(single.first == 1.7);
  CHECK(single.second == 2.0);

  const auto spread = mve_moments(std::vector<double>{0.0, 2.0},
                                  std::vector<double>{0.0, 0.0});
  CHECK(spread.first == 1.0);
  CHECK(spread.second == 1.0);

  const auto aleatoric = mve_moments(std::vector<double>{0.0, 0.0, 0.0},
                                     std::vector<double>{0.49, 0.49, 0.49});
  CHECK(aleatoric.first == 0.0);
  CHECK(aleatoric.second == doctest::Approx(0.7).epsilon(1e-12));

  CHECK_THROWS(mve_moments(std::vector<double>{1.0}, std::vector<double>{}));
  CHECK_THROWS(mve_moments(std::vector<double>{1.0}, std::vector<double>{-0.1}));
}

TEST_CASE("mve_moments equals the exact mixture moments (MC, 3 sigma)") {
  // uniform mixture of N(m_i, v_i): sample and compare moments
  const std::vector<double> means = {-1.0, 0.5, 2.0};
  const std::vector<double> vars = {0.25, 1.0, 0.04};
  const auto [mu, sigma] = mve_moments(means, vars);

  Rng rng(7);
  const std::size_t n = 200000;
  std::vector<double> samples(n);
  for (auto& s : samples) {
    const auto c = static_cast<std::size_t>(rng.below(3));
    s = means[c] + std::sqrt(vars[c]) * rng.normal();
  }
  const double sm = oracles::sample_mean(samples);
  const double ss = oracles::sample_pstd(samples);
  const double se_mean = ss / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sm - mu) < 3.0 * se_mean);
  CHECK(std::abs(ss - sigma) < 0.01);
}

TEST_CASE("qr_levels implements the softening rule") {
  const auto [lo, hi] = qr_levels(0.1, 1.0);
  CHECK(lo == doctest::Approx(0.05));
  CHECK(hi == doctest::Approx(0.95));
  const auto [lo2, hi2] = qr_levels(0.1, 2.0);
  CHECK(lo2 == doctest::Approx(0.1));
  CHECK(hi2 == doctest::Approx(0.9));
  CHECK_THROWS(qr_levels(0.5, 2.0));  // w*alpha/2 reaches 0.5
}

TEST_CASE("oob_shifts pinned enumeration and scale equivariance") {
  const std::vector<double> d = {-2.0, -1.0, 0.0, 1.0, 2.0};
  const auto [lo, hi] = oob_shifts(d, 0.4);
  CHECK(lo == -2.0);
  CHECK(hi == 2.0);

  std::vector<double> scaled;
  for (double v : d) scaled.push_back(3.0 * v);
  const auto [lo3, hi3] = oob_shifts(scaled, 0.4);
  CHECK(lo3 == 3.0 * lo);
  CHECK(hi3 == 3.0 * hi);

  CHECK_THROWS(oob_shifts({}, 0.4));
}

TEST_CASE("oob_shifts is symmetric under negation of the residuals") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(10 + rng.below(40));
    for (auto& v : d) v = rng.normal();
    std::vector<double> neg;
    for (double v : d) neg.push_back(-v);
    const auto [lo, hi] = oob_shifts(d, 0.1);
    const auto [nlo, nhi] = oob_shifts(neg, 0.1);
    CHECK(lo == -nhi);
    CHECK(hi == -nlo);
  }
}

TEST_CASE("dropout estimator with vanishing p produces zero-width intervals") {
  NetParams net = NetParams::init(1, 1, 1e-12, 3, 16);
  const IntervalEstimator est = dropout_estimator(net, 10, 0.1, 5);
  const std::vector<double> x = {0.4};
  const Interval iv = est.interval(x);
  CHECK(iv.width() == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(est.has_point());
}

TEST_CASE("dropout estimator rejects p = 0 and R < 2") {
  NetParams net = NetParams::init(1, 1, 0.0, 3, 8);
  CHECK_THROWS(dropout_estimator(net, 10, 0.1, 5));
  net.dropout_prob = 0.3;
  CHECK_THROWS(dropout_estimator(net, 1, 0.1, 5));
}

TEST_CASE("dropout estimator is deterministic and matches the recompute oracle") {
  NetParams net = NetParams::init(2, 1, 0.4, 9, 16);
  const std::size_t R = 25;
  const std::uint64_t seed = 77;
  const IntervalEstimator est = dropout_estimator(net, R, 0.1, seed);
  const std::vector<double> x = {0.2, -0.7};

  const Interval a = est.interval(x);
  const Interval b = est.interval(x);
  CHECK(a.lower == b.lower);
  CHECK(a.upper == b.upper);

  // recompute through the documented seed-stream contract
  const auto seeds = derive_stream_seeds(seed, R);
  std::vector<double> preds(R);
  for (std::size_t r = 0; r < R; ++r) preds[r] = forward(net, x, true, seeds[r])[0];
  const auto [mu, sigma] = ensemble_moments(preds);
  const Interval expected = gaussian_interval(mu, sigma, 0.1);
  CHECK(a.lower == doctest::Approx(expected.lower).epsilon(1e-15));
  CHECK(a.upper == doctest::Approx(expected.upper).epsilon(1e-15));
  CHECK(est.point(x) == doctest::Approx(mu).epsilon(1e-15));
}

TEST_CASE("mve estimator with zero log-variance head reduces to unit sigma") {
  NetParams net = NetParams::init(1, 2, 1e-12, 13, 8);
  // zero the second output head entirely: log var = 0 -> variance 1
  for (std::size_t u = 0; u < net.hidden_dim; ++u) {
    net.flat[net.w2_off() + net.hidden_dim + u] = 0.0;
  }
  net.flat[net.b2_off() + 1] = 0.0;
  const IntervalEstimator est = mve_estimator(net, 8, 0.1, 21);
  const std::vector<double> x = {0.3};
  const double mean = forward(net, x)[0];
  const Interval expected = gaussian_interval(mean, 1.0, 0.1);
  const Interval got = est.interval(x);
  CHECK(got.lower == doctest::Approx(expected.lower).epsilon(1e-9));
  CHECK(got.upper == doctest::Approx(expected.upper).epsilon(1e-9));
}

TEST_CASE("mve intervals are strictly wider than dropout intervals on the same net") {
  NetParams net = NetParams::init(2, 2, 0.3, 17, 16);
  const std::uint64_t seed = 31;
  const IntervalEstimator drop = dropout_estimator(net, 20, 0.1, seed);
  const IntervalEstimator mve = mve_estimator(net, 20, 0.1, seed);
  Rng rng(37);
  for (int k = 0; k < 50; ++k) {
    const std::vector<double> x = {rng.uniform() * 2.0 - 1.0,
                                   rng.uniform() * 2.0 - 1.0};
    CHECK(mve.interval(x).width() > drop.interval(x).width());
  }
}

TEST_CASE("mve estimator matches a hand-applied moment computation") {
  NetParams net = NetParams::init(1, 2, 0.5, 23, 8);
  const std::size_t R = 2;
  const std::uint64_t seed = 41;
  const IntervalEstimator est = mve_estimator(net, R, 0.1, seed);
  const std::vector<double> x = {-0.6};

  const auto seeds = derive_stream_seeds(seed, R);
  std::vector<double> means(R), vars(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto out = forward(net, x, true, seeds[r]);
    means[r] = out[0];
    vars[r] = std::exp(out[1]);
  }
  const auto [mu, sigma] = mve_moments(means, vars);
  const Interval expected = gaussian_interval(mu, sigma, 0.1);
  const Interval got = est.interval(x);
  CHECK(got.lower == doctest::Approx(expected.lower).epsilon(1e-15));
  CHECK(got.upper == doctest::Approx(expected.upper).epsilon(1e-15));
}

TEST_CASE("deep ensemble of identical nets reduces to the aleatoric head") {
  NetParams net = NetParams::init(1, 2, 0.0, 43, 8);
  std::vector<NetParams> nets = {net, net, net};
  const IntervalEstimator est = deep_ensemble_estimator(nets, 0.1);
  const std::vector<double> x = {0.8};
  const auto out = forward(net, x);
  const double sigma = std::sqrt(std::exp(out[1]));
  const Interval expected = gaussian_interval(out[0], sigma, 0.1);
  const Interval got = est.interval(x);
  CHECK(got.lower == doctest::Approx(expected.lower).epsilon(1e-12));
  CHECK(got.upper == doctest::Approx(expected.upper).epsilon(1e-12));
}

TEST_CASE("deep ensemble width dominates the mean aleatoric width") {
  std::vector<NetParams> nets;
  for (std::uint64_t s = 0; s < 4; ++s) {
    nets.push_back(NetParams::init(2, 2, 0.0, 100 + s, 8));
  }
  const IntervalEstimator est = deep_ensemble_estimator(nets, 0.1);
  Rng rng(47);
  for (int k = 0; k < 30; ++k) {
    const std::vector<double> x = {rng.uniform(), rng.uniform()};
    std::vector<double> means, vars;
    for (const auto& n : nets) {
      const auto out = forward(n, x);
      means.push_back(out[0]);
      vars.push_back(std::exp(out[1]));
    }
    const double aleatoric = std::sqrt(oracles::sample_mean(vars));
    const Interval expected_floor = gaussian_interval(0.0, aleatoric, 0.1);
    CHECK(est.interval(x).width() >= expected_floor.width() - 1e-12);
    // and the recompute oracle agrees exactly
    const auto [mu, sigma] = mve_moments(means, vars);
    const Interval expected = gaussian_interval(mu, sigma, 0.1);
    CHECK(est.interval(x).lower == doctest::Approx(expected.lower).epsilon(1e-15));
  }
  CHECK_THROWS(deep_ensemble_estimator({}, 0.1));
}

TEST_CASE("oob interval estimator shifts the full-forest prediction") {
  const Dataset ds = sine_data(120, 51);
  ForestConfig cfg;
  cfg.n_trees = 100;
  cfg.seed = 53;
  auto forest = std::make_shared<const Forest>(fit_forest(ds, cfg));
  const IntervalEstimator est = oob_interval_estimator(forest, ds, 0.1);

  // recompute the residual multiset and shifts
  std::vector<double> residuals;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!forest->has_oob(i)) continue;
    residuals.push_back(ds.target(i) - forest->predict_oob(ds.row(i), i));
  }
  const auto [lo_shift, hi_shift] = oob_shifts(residuals, 0.1);

  const Dataset probes = sine_data(20, 57);
  double first_width = -1.0;
  for (std::size_t i = 0; i < probes.n(); ++i) {
    const double y_hat = forest->predict(probes.row(i));
    const Interval iv = est.interval(probes.row(i));
    CHECK(iv.lower == doctest::Approx(y_hat + lo_shift).epsilon(1e-15));
    CHECK(iv.upper == doctest::Approx(y_hat + hi_shift).epsilon(1e-15));
    if (first_width < 0.0) first_width = iv.width();
    CHECK(iv.width() == doctest::Approx(first_width).epsilon(1e-12));  // constant width
  }
}

TEST_CASE("qr and qd estimators swap crossing heads") {
  NetParams net = NetParams::init(1, 2, 0.0, 61, 8);
  // force head 0 > head 1 everywhere: zero weights, biases (2, -1)
  std::fill(net.flat.begin(), net.flat.end(), 0.0);
  net.flat[net.b2_off()] = 2.0;
  net.flat[net.b2_off() + 1] = -1.0;
  const std::vector<double> x = {0.1};
  const Interval qr = qr_estimator(net, 0.1, 2.0).interval(x);
  CHECK(qr.lower == -1.0);
  CHECK(qr.upper == 2.0);
  const Interval qd = qd_estimator(net, 0.1).interval(x);
  CHECK(qd.lower == -1.0);
  CHECK(qd.upper == 2.0);
}

TEST_CASE("equal heads give a zero-width interval") {
  NetParams net = NetParams::init(1, 2, 0.0, 61, 8);
  std::fill(net.flat.begin(), net.flat.end(), 0.0);
  net.flat[net.b2_off()] = 0.7;
  net.flat[net.b2_off() + 1] = 0.7;
  const Interval iv = qr_estimator(net, 0.1, 2.0).interval(std::vector<double>{0.0});
  CHECK(iv.width() == 0.0);
}

TEST_CASE("untrained qd estimator still yields finite intervals everywhere") {
  NetParams net = NetParams::init(2, 2, 0.0, 67, 16);
  const IntervalEstimator est = qd_estimator(net, 0.1);
  Rng rng(71);
  for (int k = 0; k < 1000; ++k) {
    const std::vector<double> x = {rng.uniform() * 4.0 - 2.0,
                                   rng.uniform() * 4.0 - 2.0};
    const Interval iv = est.interval(x);
    CHECK(std::isfinite(iv.lower));
    CHECK(std::isfinite(iv.upper));
    CHECK(iv.lower <= iv.upper);
  }
}

TEST_CASE("trained qr widths track the true noise scale (Spearman > 0.5)") {
  const Dataset ds = sine_data(600, 73, 0.5);
  const auto [lo, hi] = qr_levels(0.1, 2.0);
  NetParams net = NetParams::init(1, 2, 0.0, 79, 64);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.epochs = 400;
  cfg.seed = 83;
  const NetParams trained =
      train(net, ds, nullptr, cfg, LossKind::pinball({lo, hi}, 0.1));
  const IntervalEstimator est = qr_estimator(trained, 0.1, 2.0);

  Rng rng(89);
  std::vector<double> widths, noise;
  for (int k = 0; k < 300; ++k) {
    const double xv = rng.uniform() * 2.0 - 1.0;
    const std::vector<double> x = {xv};
    widths.push_back(est.interval(x).width());
    noise.push_back(1.0 + std::abs(xv));  // true sd profile up to a constant
  }
  CHECK(spearman(widths, noise) > 0.5);
}

TEST_CASE("qd training reduces the hard loss by at least 20% on linear data") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::linear_homoscedastic;
  spec.n = 400;
  spec.d = 1;
  spec.noise_scale = 0.3;
  const Dataset ds = gen_synthetic(spec, 91);

  const LossKind loss = LossKind::qd(0.1, 0.05, 20.0);
  NetParams net = NetParams::init(1, 2, 0.0, 97, 64);

  auto hard_loss = [&](const NetParams& p) {
    std::vector<double> l(ds.n()), u(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
      const auto out = forward(p, ds.row(i));
      l[i] = std::min(out[0], out[1]);
      u[i] = std::max(out[0], out[1]);
    }
    return loss_qd_hard(l, u, ds.targets(), 0.1, 0.05);
  };

  const double before = hard_loss(net);
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.epochs = 300;
  cfg.seed = 101;
  const NetParams trained = train(net, ds, nullptr, cfg, loss);
  const double after = hard_loss(trained);
  CHECK(after <= 0.8 * before);
}

TEST_CASE("gp estimator: prior-width far field, tighter at the data") {
  const Dataset ds = sine_data(40, 103, 0.2);
  GPHyper h{0.5, 1.0, 0.05};
  auto gp = std::make_shared<const GPModel>(ds, h);
  const IntervalEstimator est = gp_estimator(gp, 0.1);

  const std::vector<double> far = {100.0};
  const double z = two_tailed_z(0.1);
  const double expected_far = 2.0 * z * std::sqrt(h.signal_variance + h.noise_variance);
  CHECK(est.interval(far).width() == doctest::Approx(expected_far).epsilon(1e-6));
  CHECK(est.interval(ds.row(0)).width() <= est.interval(far).width());
  CHECK(est.has_point());
}

TEST_CASE("gp estimator reaches near-nominal coverage on Gaussian data") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::linear_homoscedastic;
  spec.n = 2000;
  spec.d = 1;
  spec.noise_scale = 0.3;
  const Dataset ds = gen_synthetic(spec, 107);
  std::vector<std::size_t> train_idx(400), test_idx(1600);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::iota(test_idx.begin(), test_idx.end(), 400);
  const Dataset train_ds = ds.subset(train_idx);
  const Dataset test_ds = ds.subset(test_idx);
  const GPModel fitted = fit_gp(train_ds, GPHyper{1.0, 1.0, 0.2}, 30);
  auto gp = std::make_shared<const GPModel>(fitted);
  const IntervalEstimator est = gp_estimator(gp, 0.1);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < test_ds.n(); ++i) {
    if (est.interval(test_ds.row(i)).contains(test_ds.target(i))) ++covered;
  }
  const double cov = static_cast<double>(covered) / static_cast<double>(test_ds.n());
  CHECK(cov >= 0.87);
  CHECK(cov <= 0.93);
}

TEST_CASE("estimators keep lower <= upper over many random probes") {
  const Dataset ds = sine_data(100, 109);
  ForestConfig fcfg;
  fcfg.n_trees = 50;
  fcfg.seed = 113;
  auto forest = std::make_shared<const Forest>(fit_forest(ds, fcfg));
  const IntervalEstimator oob = oob_interval_estimator(forest, ds, 0.1);
  NetParams net = NetParams::init(1, 2, 0.0, 127, 16);
  const IntervalEstimator qd = qd_estimator(net, 0.1);

  Rng rng(131);
  for (int k = 0; k < 10000; ++k) {
    const std::vector<double> x = {rng.uniform() * 6.0 - 3.0};
    const Interval a = oob.interval(x);
    REQUIRE(a.lower <= a.upper);
    const Interval b = qd.interval(x);
    REQUIRE(b.lower <= b.upper);
  }
}
