#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "predint/dataset.hpp"

namespace predint {

// RBF kernel hyperparameters plus observation noise; all strictly positive
// and optimized in log-space.
struct GPHyper {
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double noise_variance = 0.1;
};

double rbf(std::span<const double> x1, std::span<const double> x2,
           const GPHyper& hyper);

// Exact zero-mean GP regression model. Construction factorizes K + sn^2 I
// once (Cholesky, with a jitter ladder from 1e-10*s^2 to 1e-4*s^2 on
// failure); posterior queries are cheap afterwards and safe to run
// concurrently.
class GPModel {
 public:
  GPModel(const Dataset& ds, const GPHyper& hyper);

  const GPHyper& hyper() const { return hyper_; }
  std::size_t n() const { return n_; }

  // Predictive mean and variance at x; the variance includes the observation
  // noise sn^2 and is always positive.
  std::pair<double, double> posterior(std::span<const double> x) const;

  double log_marginal_likelihood() const { return lml_; }

 private:
  friend GPModel fit_gp(const Dataset& ds, const GPHyper& init, std::size_t iters);
  void factorize();
  std::vector<double> kernel_vector(std::span<const double> x) const;

  GPHyper hyper_;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> features_;  // row-major n x dim
  std::vector<double> targets_;
  std::vector<double> chol_;      // lower Cholesky factor of K + sn^2 I, row-major
  std::vector<double> alpha_;     // (K + sn^2 I)^{-1} y
  double lml_ = 0.0;
};

// Gradient ascent on the log marginal likelihood over log-hyperparameters
// with backtracking line search; `iters` accepted-or-exhausted outer steps.
// iters == 0 returns the model at `init` unchanged.
GPModel fit_gp(const Dataset& ds, const GPHyper& init, std::size_t iters = 50);

}  // namespace predint
