#include "predint/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "predint/rng.hpp"

namespace predint {

namespace {

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;
};

struct TreeBuilder {
  const Dataset& ds;
  const ForestConfig& cfg;
  Rng& rng;
  std::vector<Forest::Node> nodes;

  // samples carry bootstrap multiplicity (repeated indices).
  std::int32_t build(std::vector<std::size_t>& samples, std::size_t begin,
                     std::size_t end, std::size_t depth) {
    const std::size_t count = end - begin;
    double sum = 0.0;
    double tmin = ds.target(samples[begin]);
    double tmax = tmin;
    for (std::size_t k = begin; k < end; ++k) {
      const double t = ds.target(samples[k]);
      sum += t;
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    const double mean = sum / static_cast<double>(count);

    const std::int32_t id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes[id].value = mean;

    if (depth >= cfg.max_depth || count < 2 * cfg.min_leaf || count < 2 ||
        tmin == tmax) {
      return id;
    }
    const SplitChoice best = find_split(samples, begin, end);
    if (!best.found) return id;

    // Partition in place, preserving relative order for determinism.
    std::vector<std::size_t> left, right;
    left.reserve(count);
    right.reserve(count);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = samples[k];
      if (ds.row(i)[best.feature] <= best.threshold) {
        left.push_back(i);
      } else {
        right.push_back(i);
      }
    }
    std::copy(left.begin(), left.end(), samples.begin() + begin);
    std::copy(right.begin(), right.end(), samples.begin() + begin + left.size());

    nodes[id].feature = static_cast<int>(best.feature);
    nodes[id].threshold = best.threshold;
    const std::size_t mid = begin + left.size();
    const std::int32_t l = build(samples, begin, mid, depth + 1);
    nodes[id].left = l;
    const std::int32_t r = build(samples, mid, end, depth + 1);
    nodes[id].right = r;
    return id;
  }

  SplitChoice find_split(const std::vector<std::size_t>& samples, std::size_t begin,
                         std::size_t end) {
    const std::size_t count = end - begin;
    const std::size_t d = ds.dim();
    std::size_t mtry = cfg.features_per_split == 0
                           ? d
                           : std::min(cfg.features_per_split, d);

    std::vector<std::size_t> feats(d);
    std::iota(feats.begin(), feats.end(), 0);
    if (mtry < d) {
      for (std::size_t i = 0; i < mtry; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(d - i));
        std::swap(feats[i], feats[j]);
      }
      feats.resize(mtry);
      std::sort(feats.begin(), feats.end());  // tie-break by lowest feature index
    }

    std::vector<std::pair<double, double>> vals(count);  // (feature value, target)
    SplitChoice best;
    for (std::size_t f : feats) {
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = samples[begin + k];
        vals[k] = {ds.row(i)[f], ds.target(i)};
      }
      std::sort(vals.begin(), vals.end());

      // Prefix sums over the sorted order; candidate thresholds sit at
      // midpoints between distinct consecutive feature values.
      double total_sum = 0.0;
      for (const auto& [_, t] : vals) total_sum += t;

      double left_sum = 0.0;
      for (std::size_t k = 0; k + 1 < count; ++k) {
        left_sum += vals[k].second;
        if (vals[k].first == vals[k + 1].first) continue;
        const std::size_t nl = k + 1;
        const std::size_t nr = count - nl;
        if (nl < cfg.min_leaf || nr < cfg.min_leaf) continue;
        const double right_sum = total_sum - left_sum;
        // Variance reduction up to constants: sum of squared means weighted
        // by child sizes (parent SSE minus child SSE).
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr);
        double thr = (vals[k].first + vals[k + 1].first) / 2.0;
        if (!(thr < vals[k + 1].first)) thr = vals[k].first;  // fp midpoint guard
        // Features and thresholds are scanned in ascending order, so keeping
        // the first strict improvement breaks ties by lowest feature index,
        // then lowest threshold.
        if (!best.found || gain > best.gain) best = {true, f, thr, gain};
      }
    }
    return best;
  }
};

}  // namespace

Forest fit_forest(const Dataset& ds, const ForestConfig& cfg) {
  if (ds.n() < 2) throw std::invalid_argument("fit_forest: need at least 2 rows");
  if (cfg.n_trees == 0) throw std::invalid_argument("fit_forest: n_trees must be >= 1");
  if (cfg.min_leaf == 0) throw std::invalid_argument("fit_forest: min_leaf must be >= 1");

  Forest forest;
  forest.n_train_ = ds.n();
  forest.dim_ = ds.dim();
  forest.train_targets_.assign(ds.targets().begin(), ds.targets().end());
  forest.sorted_by_target_.resize(ds.n());
  std::iota(forest.sorted_by_target_.begin(), forest.sorted_by_target_.end(), 0);
  std::stable_sort(forest.sorted_by_target_.begin(), forest.sorted_by_target_.end(),
                   [&](std::size_t a, std::size_t b) {
                     return forest.train_targets_[a] < forest.train_targets_[b];
                   });

  const auto tree_seeds = derive_stream_seeds(cfg.seed, cfg.n_trees);
  forest.trees_.resize(cfg.n_trees);
  const std::size_t n = ds.n();

  for (std::size_t t = 0; t < cfg.n_trees; ++t) {
    Rng rng(tree_seeds[t]);
    Forest::Tree& tree = forest.trees_[t];
    tree.inbag.assign(n, 0);
    std::vector<std::size_t> samples(n);
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.below(n));
      samples[k] = i;
      ++tree.inbag[i];
    }

    TreeBuilder builder{ds, cfg, rng, {}};
    builder.build(samples, 0, n, 0);
    tree.nodes = std::move(builder.nodes);

    // Assign leaf ids, then route every training row (once per distinct
    // index) to collect leaf membership.
    std::int32_t next_leaf = 0;
    for (auto& node : tree.nodes) {
      if (node.feature < 0) node.leaf_id = next_leaf++;
    }
    tree.leaves.assign(static_cast<std::size_t>(next_leaf), {});
    for (std::size_t i = 0; i < n; ++i) {
      const std::int32_t leaf = forest.tree_leaf(tree, ds.row(i));
      tree.leaves[static_cast<std::size_t>(leaf)].push_back(i);
    }
  }
  return forest;
}

std::int32_t Forest::tree_leaf(const Tree& t, std::span<const double> x) const {
  std::int32_t id = 0;
  while (t.nodes[id].feature >= 0) {
    const Node& nd = t.nodes[id];
    id = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return t.nodes[id].leaf_id >= 0 ? t.nodes[id].leaf_id : id;
}

double Forest::tree_value(const Tree& t, std::span<const double> x) const {
  std::int32_t id = 0;
  while (t.nodes[id].feature >= 0) {
    const Node& nd = t.nodes[id];
    id = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return t.nodes[id].value;
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("Forest::predict: bad dimension");
  double s = 0.0;
  for (const auto& t : trees_) s += tree_value(t, x);
  return s / static_cast<double>(trees_.size());
}

bool Forest::has_oob(std::size_t i) const {
  for (const auto& t : trees_) {
    if (t.inbag[i] == 0) return true;
  }
  return false;
}

double Forest::predict_oob(std::span<const double> x, std::size_t i) const {
  if (x.size() != dim_) throw std::invalid_argument("Forest::predict_oob: bad dimension");
  if (i >= n_train_) throw std::out_of_range("Forest::predict_oob: bad index");
  double s = 0.0;
  std::size_t count = 0;
  for (const auto& t : trees_) {
    if (t.inbag[i] == 0) {
      s += tree_value(t, x);
      ++count;
    }
  }
  if (count == 0) {
    throw std::runtime_error("Forest::predict_oob: no out-of-bag tree for index " +
                             std::to_string(i));
  }
  return s / static_cast<double>(count);
}

std::vector<double> Forest::tree_predictions(std::span<const double> x) const {
  std::vector<double> out(trees_.size());
  for (std::size_t t = 0; t < trees_.size(); ++t) out[t] = tree_value(trees_[t], x);
  return out;
}

void Forest::qrf_weights(std::span<const double> x, std::vector<double>& w) const {
  w.assign(n_train_, 0.0);
  const double inv_trees = 1.0 / static_cast<double>(trees_.size());
  for (const auto& t : trees_) {
    const std::int32_t leaf = tree_leaf(t, x);
    const auto& members = t.leaves[static_cast<std::size_t>(leaf)];
    const double share = inv_trees / static_cast<double>(members.size());
    for (std::size_t i : members) w[i] += share;
  }
}

double Forest::qrf_cdf(std::span<const double> x, double y) const {
  std::vector<double> w;
  qrf_weights(x, w);
  double acc = 0.0;
  for (std::size_t i : sorted_by_target_) {
    if (train_targets_[i] > y) break;
    acc += w[i];
  }
  return acc;
}

double Forest::qrf_quantile(std::span<const double> x, double beta) const {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw std::invalid_argument("qrf_quantile: beta must lie in (0,1)");
  }
  std::vector<double> w;
  qrf_weights(x, w);

  // Walk the target grid in ascending order, accumulating all weight at each
  // distinct value before testing so ties behave as a proper step CDF. The
  // accumulation order matches qrf_cdf, which makes the quantile/CDF pair
  // exactly consistent.
  double acc = 0.0;
  const std::size_t n = sorted_by_target_.size();
  std::size_t k = 0;
  while (k < n) {
    const double value = train_targets_[sorted_by_target_[k]];
    while (k < n && train_targets_[sorted_by_target_[k]] == value) {
      acc += w[sorted_by_target_[k]];
      ++k;
    }
    if (acc >= beta) return value;
  }
  return train_targets_[sorted_by_target_.back()];
}

}  // namespace predint
