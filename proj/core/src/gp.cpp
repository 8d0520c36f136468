#include "predint/gp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace predint {

namespace {

constexpr std::size_t kMaxExactRows = 20000;

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

Eigen::MatrixXd kernel_matrix(const std::vector<double>& features, std::size_t n,
                              std::size_t dim, const GPHyper& h) {
  Eigen::MatrixXd K(n, n);
  const double inv_2l2 = 1.0 / (2.0 * h.lengthscale * h.lengthscale);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> xi{features.data() + i * dim, dim};
    K(i, i) = h.signal_variance;
    for (std::size_t j = i + 1; j < n; ++j) {
      std::span<const double> xj{features.data() + j * dim, dim};
      const double v = h.signal_variance * std::exp(-sq_dist(xi, xj) * inv_2l2);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

}  // namespace

double rbf(std::span<const double> x1, std::span<const double> x2,
           const GPHyper& hyper) {
  if (x1.size() != x2.size()) throw std::invalid_argument("rbf: length mismatch");
  return hyper.signal_variance *
         std::exp(-sq_dist(x1, x2) / (2.0 * hyper.lengthscale * hyper.lengthscale));
}

GPModel::GPModel(const Dataset& ds, const GPHyper& hyper)
    : hyper_(hyper),
      n_(ds.n()),
      dim_(ds.dim()),
      features_(ds.features().begin(), ds.features().end()),
      targets_(ds.targets().begin(), ds.targets().end()) {
  if (n_ < 1) throw std::invalid_argument("GPModel: empty dataset");
  if (n_ > kMaxExactRows) {
    throw std::invalid_argument(
        "GPModel: exact inference is cubic in n; refusing n > 20000");
  }
  if (!(hyper_.lengthscale > 0.0 && hyper_.signal_variance > 0.0 &&
        hyper_.noise_variance > 0.0)) {
    throw std::invalid_argument("GPModel: hyperparameters must be strictly positive");
  }
  factorize();
}

void GPModel::factorize() {
  Eigen::MatrixXd K = kernel_matrix(features_, n_, dim_, hyper_);
  const double base_noise = hyper_.noise_variance;
  double jitter = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd Kn = K;
    Kn.diagonal().array() += base_noise + jitter;
    llt.compute(Kn);
    if (llt.info() == Eigen::Success) break;
    if (attempt == 0) {
      jitter = 1e-10 * hyper_.signal_variance;
    } else {
      jitter *= 100.0;
    }
    if (jitter > 1e-4 * hyper_.signal_variance) {
      throw std::runtime_error(
          "GPModel: Cholesky failed after max jitter; data is ill-conditioned");
    }
  }

  const Eigen::MatrixXd L = llt.matrixL();
  chol_.assign(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j <= i; ++j) chol_[i * n_ + j] = L(i, j);
  }

  Eigen::Map<const Eigen::VectorXd> y(targets_.data(), n_);
  Eigen::VectorXd a = llt.solve(y);
  alpha_.assign(a.data(), a.data() + n_);

  double logdet = 0.0;
  for (std::size_t i = 0; i < n_; ++i) logdet += std::log(chol_[i * n_ + i]);
  logdet *= 2.0;
  lml_ = -0.5 * y.dot(a) - 0.5 * logdet -
         0.5 * static_cast<double>(n_) * std::log(2.0 * M_PI);
}

std::vector<double> GPModel::kernel_vector(std::span<const double> x) const {
  std::vector<double> k(n_);
  const double inv_2l2 = 1.0 / (2.0 * hyper_.lengthscale * hyper_.lengthscale);
  for (std::size_t i = 0; i < n_; ++i) {
    std::span<const double> xi{features_.data() + i * dim_, dim_};
    k[i] = hyper_.signal_variance * std::exp(-sq_dist(xi, x) * inv_2l2);
  }
  return k;
}

std::pair<double, double> GPModel::posterior(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("GPModel::posterior: bad dimension");
  const std::vector<double> k = kernel_vector(x);

  double mean = 0.0;
  for (std::size_t i = 0; i < n_; ++i) mean += k[i] * alpha_[i];

  // v = L^{-1} k by forward substitution; predictive var = k** + sn^2 - |v|^2.
  std::vector<double> v(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    double s = k[i];
    for (std::size_t j = 0; j < i; ++j) s -= chol_[i * n_ + j] * v[j];
    v[i] = s / chol_[i * n_ + i];
  }
  double q = 0.0;
  for (std::size_t i = 0; i < n_; ++i) q += v[i] * v[i];

  double var = hyper_.signal_variance + hyper_.noise_variance - q;
  const double floor =
      1e-15 * (hyper_.signal_variance + hyper_.noise_variance);
  if (var < floor) var = floor;
  return {mean, var};
}

namespace {

struct LmlGrad {
  double value = 0.0;
  // Gradient in (log lengthscale, log signal_variance, log noise_variance).
  double g_logl = 0.0;
  double g_logs2 = 0.0;
  double g_logn2 = 0.0;
  bool ok = false;
};

LmlGrad lml_with_grad(const std::vector<double>& features, std::size_t n,
                      std::size_t dim, const std::vector<double>& targets,
                      const GPHyper& h) {
  LmlGrad out;
  Eigen::MatrixXd K = kernel_matrix(features, n, dim, h);
  Eigen::MatrixXd Kn = K;
  Kn.diagonal().array() += h.noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(Kn);
  if (llt.info() != Eigen::Success) return out;

  Eigen::Map<const Eigen::VectorXd> y(targets.data(), n);
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd Kinv =
      llt.solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(n)));

  double logdet = 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  for (Eigen::Index i = 0; i < L.rows(); ++i) logdet += std::log(L(i, i));
  logdet *= 2.0;
  out.value = -0.5 * y.dot(alpha) - 0.5 * logdet -
              0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);

  // dLML/dtheta = 0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)
  const Eigen::MatrixXd W = alpha * alpha.transpose() - Kinv;

  // dK/dlog(l): K_rbf .* (d^2 / l^2); dK/dlog(s2): K_rbf; dK/dlog(n2): n2 I.
  const double inv_l2 = 1.0 / (h.lengthscale * h.lengthscale);
  double gl = 0.0;
  double gs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    gs += W(i, i) * K(i, i);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      std::span<const double> xi{features.data() + i * dim, dim};
      std::span<const double> xj{features.data() + j * dim, dim};
      const double d2 = sq_dist(xi, xj);
      gl += W(i, j) * K(i, j) * d2 * inv_l2;
      gs += W(i, j) * K(i, j);
    }
  }
  out.g_logl = 0.5 * gl;
  out.g_logs2 = 0.5 * gs;
  out.g_logn2 = 0.5 * h.noise_variance * W.trace();
  out.ok = true;
  return out;
}

}  // namespace

GPModel fit_gp(const Dataset& ds, const GPHyper& init, std::size_t iters) {
  if (ds.n() < 2) throw std::invalid_argument("fit_gp: need at least 2 rows");
  if (iters == 0) return GPModel(ds, init);

  const std::size_t n = ds.n();
  const std::size_t dim = ds.dim();
  const std::vector<double> features(ds.features().begin(), ds.features().end());
  const std::vector<double> targets(ds.targets().begin(), ds.targets().end());

  GPHyper h = init;
  LmlGrad cur = lml_with_grad(features, n, dim, targets, h);
  if (!cur.ok) return GPModel(ds, init);  // construction applies the jitter ladder

  for (std::size_t it = 0; it < iters; ++it) {
    double step = 0.1;
    bool accepted = false;
    while (step > 1e-6) {
      GPHyper cand;
      cand.lengthscale = std::exp(std::log(h.lengthscale) + step * cur.g_logl);
      cand.signal_variance =
          std::exp(std::log(h.signal_variance) + step * cur.g_logs2);
      cand.noise_variance =
          std::exp(std::log(h.noise_variance) + step * cur.g_logn2);
      const LmlGrad next = lml_with_grad(features, n, dim, targets, cand);
      if (next.ok && next.value > cur.value) {
        h = cand;
        cur = next;
        accepted = true;
        break;
      }
      step /= 2.0;
    }
    if (!accepted) break;
  }
  return GPModel(ds, h);
}

}  // namespace predint
