#include "predint/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "predint/rng.hpp"

namespace predint {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_loss_dims(const LossKind& loss, std::size_t out_dim) {
  if (loss.out_dim() != out_dim) {
    throw std::invalid_argument("loss expects " + std::to_string(loss.out_dim()) +
                                " output heads, net has " + std::to_string(out_dim));
  }
}

}  // namespace

NetParams NetParams::init(std::size_t in, std::size_t out, double dropout,
                          std::uint64_t seed, std::size_t hidden) {
  if (in == 0 || out == 0 || hidden == 0) {
    throw std::invalid_argument("NetParams::init: zero layer width");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("NetParams::init: dropout_prob must lie in [0,1)");
  }
  NetParams net;
  net.in_dim = in;
  net.hidden_dim = hidden;
  net.out_dim = out;
  net.dropout_prob = dropout;
  net.flat.assign(hidden * in + hidden + out * hidden + out, 0.0);

  Rng rng(seed);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t i = net.w1_off(); i < net.w2_off(); ++i) {
    net.flat[i] = (rng.uniform() * 2.0 - 1.0) * s1;
  }
  for (std::size_t i = net.w2_off(); i < net.flat.size(); ++i) {
    net.flat[i] = (rng.uniform() * 2.0 - 1.0) * s2;
  }
  return net;
}

std::string serialize_net(const NetParams& net) {
  std::ostringstream os;
  os.precision(17);
  os << "predint-net 1 " << net.in_dim << ' ' << net.hidden_dim << ' '
     << net.out_dim << ' ' << net.dropout_prob << '\n';
  for (std::size_t i = 0; i < net.flat.size(); ++i) {
    os << net.flat[i] << (i + 1 == net.flat.size() ? '\n' : ' ');
  }
  return os.str();
}

NetParams deserialize_net(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  int version = 0;
  NetParams net;
  is >> magic >> version >> net.in_dim >> net.hidden_dim >> net.out_dim >>
      net.dropout_prob;
  if (!is || magic != "predint-net" || version != 1) {
    throw std::runtime_error("deserialize_net: bad header");
  }
  const std::size_t count =
      net.hidden_dim * net.in_dim + net.hidden_dim + net.out_dim * net.hidden_dim +
      net.out_dim;
  net.flat.resize(count);
  for (auto& v : net.flat) {
    if (!(is >> v)) throw std::runtime_error("deserialize_net: truncated parameters");
  }
  return net;
}

LossKind LossKind::pinball(std::vector<double> levels, double alpha) {
  if (levels.empty()) throw std::invalid_argument("pinball: needs at least one level");
  for (double t : levels) {
    if (!(t > 0.0 && t < 1.0)) {
      throw std::invalid_argument("pinball: levels must lie in (0,1)");
    }
  }
  LossKind k;
  k.tag = LossTag::pinball;
  k.levels = std::move(levels);
  k.alpha = alpha;
  return k;
}

LossKind LossKind::qd(double alpha, double lambda_qd, double softness) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("qd: alpha must lie in (0,1)");
  }
  if (!(softness > 0.0)) throw std::invalid_argument("qd: softness must be positive");
  LossKind k;
  k.tag = LossTag::qd;
  k.alpha = alpha;
  k.lambda_qd = lambda_qd;
  k.softness = softness;
  return k;
}

std::size_t LossKind::out_dim() const {
  switch (tag) {
    case LossTag::mse:
      return 1;
    case LossTag::gauss_nll:
      return 2;
    case LossTag::pinball:
      return levels.size();
    case LossTag::qd:
      return 2;
  }
  return 0;
}

double loss_gauss_nll(double mean, double log_var, double y) {
  const double inv_var = std::exp(-log_var);
  const double r = y - mean;
  return r * r * inv_var / 2.0 + log_var / 2.0;
}

double loss_pinball(double q_hat, double y, double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("loss_pinball: level must lie in (0,1)");
  }
  return std::max((1.0 - level) * (q_hat - y), level * (y - q_hat));
}

namespace {

// Shared QD evaluation. Soft containment uses sig(s(y-l))*sig(s(u-y)); the
// hard variant uses the exact indicator. The captured-width denominator gets
// a denormal-scale epsilon so an empty capture set yields 0 without changing
// any value of interest.
double qd_eval(std::span<const double> l, std::span<const double> u,
               std::span<const double> y, double alpha, double lambda_qd,
               double softness, bool hard) {
  const std::size_t n = y.size();
  if (n == 0) throw std::invalid_argument("loss_qd: empty batch");
  if (l.size() != n || u.size() != n) {
    throw std::invalid_argument("loss_qd: length mismatch");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("loss_qd: alpha must lie in (0,1)");
  }
  double sum_k = 0.0;
  double sum_wk = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double k;
    if (hard) {
      k = (l[i] <= y[i] && y[i] <= u[i]) ? 1.0 : 0.0;
    } else {
      k = sigmoid(softness * (y[i] - l[i])) * sigmoid(softness * (u[i] - y[i]));
    }
    sum_k += k;
    sum_wk += (u[i] - l[i]) * k;
  }
  const double captured = sum_k > 0.0 ? sum_wk / sum_k : 0.0;
  const double coverage = sum_k / static_cast<double>(n);
  const double shortfall = std::max(0.0, (1.0 - alpha) - coverage);
  const double penalty = lambda_qd * static_cast<double>(n) /
                         (alpha * (1.0 - alpha)) * shortfall * shortfall;
  return captured + penalty;
}

}  // namespace

double loss_qd(std::span<const double> lower, std::span<const double> upper,
               std::span<const double> y, double alpha, double lambda_qd,
               double softness) {
  if (!(softness > 0.0)) throw std::invalid_argument("loss_qd: softness must be positive");
  return qd_eval(lower, upper, y, alpha, lambda_qd, softness, /*hard=*/false);
}

double loss_qd_hard(std::span<const double> lower, std::span<const double> upper,
                    std::span<const double> y, double alpha, double lambda_qd) {
  return qd_eval(lower, upper, y, alpha, lambda_qd, 0.0, /*hard=*/true);
}

double loss_lube(std::span<const double> lower, std::span<const double> upper,
                 std::span<const double> y, double alpha, double lambda,
                 double range) {
  const std::size_t n = y.size();
  if (n == 0) throw std::invalid_argument("loss_lube: empty batch");
  if (!(range > 0.0)) throw std::invalid_argument("loss_lube: range must be positive");
  double mpiw = 0.0;
  double covered = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mpiw += std::abs(upper[i] - lower[i]);
    if (lower[i] <= y[i] && y[i] <= upper[i]) covered += 1.0;
  }
  mpiw /= static_cast<double>(n);
  const double coverage = covered / static_cast<double>(n);
  return mpiw / range *
         (1.0 + std::exp(lambda * std::max(0.0, (1.0 - alpha) - coverage)));
}

namespace {

struct Workspace {
  std::vector<double> h_pre;
  std::vector<double> h;
  std::vector<double> out;
};

// mask: empty (no dropout) or hidden_dim multipliers (0 or 1/(1-p)).
void forward_ws(const NetParams& net, std::span<const double> x,
                std::span<const double> mask, Workspace& ws) {
  const std::size_t H = net.hidden_dim;
  const std::size_t D = net.in_dim;
  const std::size_t O = net.out_dim;
  const double* w1 = net.flat.data() + net.w1_off();
  const double* b1 = net.flat.data() + net.b1_off();
  const double* w2 = net.flat.data() + net.w2_off();
  const double* b2 = net.flat.data() + net.b2_off();

  ws.h_pre.resize(H);
  ws.h.resize(H);
  ws.out.resize(O);
  for (std::size_t u = 0; u < H; ++u) {
    double a = b1[u];
    const double* row = w1 + u * D;
    for (std::size_t j = 0; j < D; ++j) a += row[j] * x[j];
    ws.h_pre[u] = a;
    double act = a > 0.0 ? a : 0.0;
    if (!mask.empty()) act *= mask[u];
    ws.h[u] = act;
  }
  for (std::size_t o = 0; o < O; ++o) {
    double a = b2[o];
    const double* row = w2 + o * H;
    for (std::size_t u = 0; u < H; ++u) a += row[u] * ws.h[u];
    ws.out[o] = a;
  }
}

// Accumulates parameter gradients for one sample given dL/dout; optionally
// writes dL/dx.
void backward_ws(const NetParams& net, std::span<const double> x,
                 std::span<const double> mask, const Workspace& ws,
                 std::span<const double> dout, std::vector<double>& grad,
                 double* dx) {
  const std::size_t H = net.hidden_dim;
  const std::size_t D = net.in_dim;
  const std::size_t O = net.out_dim;
  const double* w1 = net.flat.data() + net.w1_off();
  const double* w2 = net.flat.data() + net.w2_off();
  double* gw1 = grad.data() + net.w1_off();
  double* gb1 = grad.data() + net.b1_off();
  double* gw2 = grad.data() + net.w2_off();
  double* gb2 = grad.data() + net.b2_off();

  std::vector<double> dpre(H, 0.0);
  for (std::size_t o = 0; o < O; ++o) {
    gb2[o] += dout[o];
    double* grow = gw2 + o * H;
    const double* wrow = w2 + o * H;
    for (std::size_t u = 0; u < H; ++u) {
      grow[u] += dout[o] * ws.h[u];
      dpre[u] += dout[o] * wrow[u];
    }
  }
  for (std::size_t u = 0; u < H; ++u) {
    if (!mask.empty()) dpre[u] *= mask[u];
    if (ws.h_pre[u] <= 0.0) dpre[u] = 0.0;
  }
  for (std::size_t u = 0; u < H; ++u) {
    if (dpre[u] == 0.0) continue;
    gb1[u] += dpre[u];
    double* grow = gw1 + u * D;
    for (std::size_t j = 0; j < D; ++j) grow[j] += dpre[u] * x[j];
  }
  if (dx != nullptr) {
    for (std::size_t j = 0; j < D; ++j) dx[j] = 0.0;
    for (std::size_t u = 0; u < H; ++u) {
      if (dpre[u] == 0.0) continue;
      const double* wrow = w1 + u * D;
      for (std::size_t j = 0; j < D; ++j) dx[j] += dpre[u] * wrow[j];
    }
  }
}

std::vector<double> draw_mask(const NetParams& net, Rng& rng) {
  std::vector<double> mask;
  if (net.dropout_prob <= 0.0) return mask;
  mask.resize(net.hidden_dim);
  const double keep_scale = 1.0 / (1.0 - net.dropout_prob);
  for (auto& m : mask) {
    m = rng.uniform() < net.dropout_prob ? 0.0 : keep_scale;
  }
  return mask;
}

// Per-sample loss value and dL/dout for the pointwise losses.
double sample_loss_grad(const LossKind& loss, std::span<const double> out, double y,
                        std::vector<double>& dout) {
  dout.assign(out.size(), 0.0);
  switch (loss.tag) {
    case LossTag::mse: {
      const double r = out[0] - y;
      dout[0] = 2.0 * r;
      return r * r;
    }
    case LossTag::gauss_nll: {
      const double m = out[0];
      const double v = out[1];
      const double inv_var = std::exp(-v);
      const double r = y - m;
      dout[0] = -r * inv_var;
      dout[1] = -r * r * inv_var / 2.0 + 0.5;
      return loss_gauss_nll(m, v, y);
    }
    case LossTag::pinball: {
      double total = 0.0;
      for (std::size_t h = 0; h < loss.levels.size(); ++h) {
        const double tau = loss.levels[h];
        total += loss_pinball(out[h], y, tau);
        dout[h] = out[h] >= y ? (1.0 - tau) : -tau;
      }
      return total;
    }
    case LossTag::qd:
      throw std::logic_error("qd is a batch-level loss");
  }
  return 0.0;
}

// dL/d(lower_i, upper_i) for the soft QD objective.
void qd_soft_grad(std::span<const double> l, std::span<const double> u,
                  std::span<const double> y, double alpha, double lambda_qd,
                  double softness, std::vector<double>& dl, std::vector<double>& du) {
  const std::size_t n = y.size();
  std::vector<double> a(n), b(n), k(n);
  double sum_k = 0.0;
  double sum_wk = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = sigmoid(softness * (y[i] - l[i]));
    b[i] = sigmoid(softness * (u[i] - y[i]));
    k[i] = a[i] * b[i];
    sum_k += k[i];
    sum_wk += (u[i] - l[i]) * k[i];
  }
  const double denom = sum_k > 0.0 ? sum_k : std::numeric_limits<double>::min();
  const double coverage = sum_k / static_cast<double>(n);
  const double shortfall = std::max(0.0, (1.0 - alpha) - coverage);
  const double dpen_dC = -2.0 * lambda_qd * static_cast<double>(n) /
                         (alpha * (1.0 - alpha)) * shortfall;

  dl.assign(n, 0.0);
  du.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = u[i] - l[i];
    const double dcap_dk = w / denom - sum_wk / (denom * denom);
    const double dL_dk = dcap_dk + dpen_dC / static_cast<double>(n);
    const double dk_dl = -softness * a[i] * (1.0 - a[i]) * b[i];
    const double dk_du = softness * b[i] * (1.0 - b[i]) * a[i];
    dl[i] = -k[i] / denom + dL_dk * dk_dl;
    du[i] = k[i] / denom + dL_dk * dk_du;
  }
}

// Core batch pass. masks may be empty (no dropout) or hold one mask per row.
// Any of grad/dx may be null.
double batch_pass(const NetParams& net, std::span<const double> features,
                  std::size_t n_rows, std::span<const double> y,
                  const LossKind& loss,
                  const std::vector<std::vector<double>>* masks,
                  std::vector<double>* grad, std::vector<double>* dx) {
  check_loss_dims(loss, net.out_dim);
  const std::size_t D = net.in_dim;
  if (n_rows == 0) throw std::invalid_argument("batch_pass: empty batch");
  if (features.size() != n_rows * D || y.size() != n_rows) {
    throw std::invalid_argument("batch_pass: shape mismatch");
  }
  if (grad != nullptr) grad->assign(net.flat.size(), 0.0);
  if (dx != nullptr) dx->assign(n_rows * D, 0.0);

  const bool want_backward = grad != nullptr || dx != nullptr;
  std::vector<double> grad_sink;
  if (want_backward && grad == nullptr) grad_sink.assign(net.flat.size(), 0.0);
  std::vector<double>& gout = grad != nullptr ? *grad : grad_sink;

  auto mask_of = [&](std::size_t i) -> std::span<const double> {
    if (masks == nullptr || masks->empty()) return {};
    return (*masks)[i];
  };

  if (loss.tag == LossTag::qd) {
    std::vector<double> lower(n_rows), upper(n_rows);
    std::vector<Workspace> tapes(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
      forward_ws(net, features.subspan(i * D, D), mask_of(i), tapes[i]);
      lower[i] = tapes[i].out[0];
      upper[i] = tapes[i].out[1];
    }
    const double value =
        loss_qd(lower, upper, y, loss.alpha, loss.lambda_qd, loss.softness);
    if (want_backward) {
      std::vector<double> dl, du;
      qd_soft_grad(lower, upper, y, loss.alpha, loss.lambda_qd, loss.softness, dl, du);
      for (std::size_t i = 0; i < n_rows; ++i) {
        const double dout[2] = {dl[i], du[i]};
        backward_ws(net, features.subspan(i * D, D), mask_of(i), tapes[i],
                    std::span<const double>(dout, 2), gout,
                    dx != nullptr ? dx->data() + i * D : nullptr);
      }
    }
    return value;
  }

  Workspace ws;
  double total = 0.0;
  std::vector<double> dout;
  const double inv_n = 1.0 / static_cast<double>(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    forward_ws(net, features.subspan(i * D, D), mask_of(i), ws);
    total += sample_loss_grad(loss, ws.out, y[i], dout);
    if (want_backward) {
      for (auto& g : dout) g *= inv_n;
      backward_ws(net, features.subspan(i * D, D), mask_of(i), ws, dout, gout,
                  dx != nullptr ? dx->data() + i * D : nullptr);
    }
  }
  return total * inv_n;
}

}  // namespace

std::vector<double> forward(const NetParams& net, std::span<const double> x,
                            bool dropout_active, std::uint64_t seed) {
  if (x.size() != net.in_dim) {
    throw std::invalid_argument("forward: feature length does not match in_dim");
  }
  Workspace ws;
  std::vector<double> mask;
  if (dropout_active && net.dropout_prob > 0.0) {
    Rng rng(seed);
    mask = draw_mask(net, rng);
  }
  forward_ws(net, x, mask, ws);
  return ws.out;
}

double batch_loss(const NetParams& net, std::span<const double> features,
                  std::size_t n_rows, std::span<const double> y,
                  const LossKind& loss) {
  return batch_pass(net, features, n_rows, y, loss, nullptr, nullptr, nullptr);
}

double batch_loss_grad(const NetParams& net, std::span<const double> features,
                       std::size_t n_rows, std::span<const double> y,
                       const LossKind& loss, std::vector<double>& grad) {
  return batch_pass(net, features, n_rows, y, loss, nullptr, &grad, nullptr);
}

std::vector<double> fgsm_perturb(const NetParams& net,
                                 std::span<const double> features,
                                 std::size_t n_rows, std::span<const double> y,
                                 std::span<const double> eta,
                                 const LossKind& loss) {
  if (eta.size() != net.in_dim) {
    throw std::invalid_argument("fgsm_perturb: eta length does not match in_dim");
  }
  for (double e : eta) {
    if (!(e >= 0.0)) throw std::invalid_argument("fgsm_perturb: eta must be >= 0");
  }
  std::vector<double> dx;
  batch_pass(net, features, n_rows, y, loss, nullptr, nullptr, &dx);
  std::vector<double> out(features.begin(), features.end());
  const std::size_t D = net.in_dim;
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t j = 0; j < D; ++j) {
      const double g = dx[i * D + j];
      const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
      out[i * D + j] += eta[j] * s;
    }
  }
  return out;
}

namespace {

struct IntervalScore {
  bool feasible = false;
  double width = std::numeric_limits<double>::infinity();
  double coverage = -1.0;

  // Lexicographic: feasibility first, then width; infeasible compare by
  // coverage (higher better), ties by width.
  bool better_than(const IntervalScore& o) const {
    if (feasible != o.feasible) return feasible;
    if (feasible) return width < o.width;
    if (coverage != o.coverage) return coverage > o.coverage;
    return width < o.width;
  }
};

IntervalScore interval_validation_score(const NetParams& net, const Dataset& val,
                                        double alpha) {
  IntervalScore s;
  double width_sum = 0.0;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < val.n(); ++i) {
    const auto out = forward(net, val.row(i));
    double lo = out[0];
    double hi = out[1];
    if (lo > hi) std::swap(lo, hi);
    width_sum += hi - lo;
    if (lo <= val.target(i) && val.target(i) <= hi) ++covered;
  }
  s.width = width_sum / static_cast<double>(val.n());
  s.coverage = static_cast<double>(covered) / static_cast<double>(val.n());
  s.feasible = s.coverage >= 1.0 - alpha;
  return s;
}

}  // namespace

NetParams train(const NetParams& net, const Dataset& train_ds, const Dataset* val_ds,
                const TrainConfig& cfg, const LossKind& loss) {
  check_loss_dims(loss, net.out_dim);
  if (train_ds.dim() != net.in_dim) {
    throw std::invalid_argument("train: dataset dim does not match net");
  }
  if (cfg.epochs == 0) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) {
    throw std::invalid_argument("train: learning_rate must be non-negative");
  }
  const bool stopping = cfg.early_stopping != TrainConfig::Stopping::none;
  if (stopping && (val_ds == nullptr || val_ds->n() == 0)) {
    throw std::invalid_argument("train: early stopping requires a validation set");
  }
  if (cfg.early_stopping == TrainConfig::Stopping::interval) {
    if (net.out_dim != 2) {
      throw std::invalid_argument("train: interval stopping needs a 2-head net");
    }
    if (!(loss.alpha > 0.0 && loss.alpha < 1.0)) {
      throw std::invalid_argument("train: interval stopping needs loss.alpha in (0,1)");
    }
  }

  const std::size_t n = train_ds.n();
  const std::size_t D = net.in_dim;
  std::size_t batch = cfg.batch_size;
  if (batch == 0) batch = n <= 1024 ? n : 256;
  batch = std::min(batch, n);

  std::vector<double> eta;
  if (cfg.adversarial) {
    eta.assign(D, 0.0);
    for (std::size_t j = 0; j < D; ++j) {
      double lo = train_ds.row(0)[j];
      double hi = lo;
      for (std::size_t i = 1; i < n; ++i) {
        lo = std::min(lo, train_ds.row(i)[j]);
        hi = std::max(hi, train_ds.row(i)[j]);
      }
      eta[j] = cfg.adversarial_eta_scale * (hi - lo);
    }
  }

  NetParams current = net;
  std::vector<double> m(current.flat.size(), 0.0);
  std::vector<double> v(current.flat.size(), 0.0);
  std::size_t step = 0;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;

  const auto seeds = derive_stream_seeds(cfg.seed, 2);
  Rng shuffle_rng(seeds[0]);
  Rng dropout_rng(seeds[1]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  NetParams best = current;
  double best_loss = std::numeric_limits<double>::infinity();
  IntervalScore best_interval;
  std::size_t stale = 0;

  std::vector<double> bx;
  std::vector<double> by;
  std::vector<double> grad, grad2;
  std::vector<std::vector<double>> masks;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng.below(i));
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      bx.resize(count * D);
      by.resize(count);
      for (std::size_t r = 0; r < count; ++r) {
        const auto row = train_ds.row(order[start + r]);
        std::copy(row.begin(), row.end(), bx.begin() + r * D);
        by[r] = train_ds.target(order[start + r]);
      }
      masks.clear();
      if (current.dropout_prob > 0.0) {
        masks.resize(count);
        for (auto& mk : masks) mk = draw_mask(current, dropout_rng);
      }

      double value = batch_pass(current, bx, count, by, loss,
                                masks.empty() ? nullptr : &masks, &grad, nullptr);
      if (cfg.adversarial) {
        std::vector<double> adv = fgsm_perturb(current, bx, count, by, eta, loss);
        value += batch_pass(current, adv, count, by, loss,
                            masks.empty() ? nullptr : &masks, &grad2, nullptr);
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += grad2[i];
      }
      if (cfg.l2_lambda != 0.0) {
        double sq = 0.0;
        for (std::size_t i = 0; i < current.flat.size(); ++i) {
          sq += current.flat[i] * current.flat[i];
          grad[i] += 2.0 * cfg.l2_lambda * current.flat[i];
        }
        value += cfg.l2_lambda * sq;
      }
      if (!std::isfinite(value)) {
        throw std::runtime_error("train: non-finite loss at epoch " +
                                 std::to_string(epoch));
      }

      ++step;
      const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < current.flat.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        current.flat[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + adam_eps);
      }
    }

    if (cfg.epoch_observer) cfg.epoch_observer(epoch, current);

    if (cfg.early_stopping == TrainConfig::Stopping::loss) {
      const double vl = batch_loss(current, val_ds->features(), val_ds->n(),
                                   val_ds->targets(), loss);
      if (vl < best_loss) {
        best_loss = vl;
        best = current;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    } else if (cfg.early_stopping == TrainConfig::Stopping::interval) {
      const IntervalScore s = interval_validation_score(current, *val_ds, loss.alpha);
      if (s.better_than(best_interval)) {
        best_interval = s;
        best = current;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        break;
      }
    }
  }

  return stopping ? best : current;
}

}  // namespace predint
