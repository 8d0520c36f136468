#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "predint/dataset.hpp"

namespace predint {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = std::numeric_limits<std::size_t>::max();  // 0 = stump
  std::size_t min_leaf = 1;
  std::size_t features_per_split = 0;  // 0 = all features
  std::uint64_t seed = 0;
};

// Bagged regression forest with greedy variance-reduction splitting. Each
// tree keeps its bootstrap multiplicities (inbag) and, for the quantile
// machinery, the leaf membership of every training row (each distinct index
// counted once, regardless of bootstrap multiplicity).
class Forest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;       // inbag target mean (leaves)
    std::int32_t leaf_id = -1;
  };

  struct Tree {
    std::vector<Node> nodes;
    std::vector<std::uint32_t> inbag;              // per training index, with multiplicity
    std::vector<std::vector<std::size_t>> leaves;  // leaf_id -> member training indices
  };

  std::size_t n_trees() const { return trees_.size(); }
  std::size_t n_train() const { return n_train_; }
  const Tree& tree(std::size_t t) const { return trees_[t]; }
  double train_target(std::size_t i) const { return train_targets_[i]; }

  // Mean prediction over all trees.
  double predict(std::span<const double> x) const;
  // Mean over the subensemble whose bootstrap sample excludes training
  // index i; throws if that subensemble is empty.
  double predict_oob(std::span<const double> x, std::size_t i) const;
  bool has_oob(std::size_t i) const;
  // Per-tree predictions, for ensemble-moment intervals.
  std::vector<double> tree_predictions(std::span<const double> x) const;

  // Weighted conditional CDF estimate at y: sum_i w_i(x) 1(y_i <= y), where
  // w_i(x) averages 1/|leaf| over trees for rows sharing x's leaf.
  double qrf_cdf(std::span<const double> x, double y) const;
  // Smallest training target whose weighted CDF reaches beta, beta in (0,1).
  double qrf_quantile(std::span<const double> x, double beta) const;

  friend Forest fit_forest(const Dataset& ds, const ForestConfig& cfg);

 private:
  double tree_value(const Tree& t, std::span<const double> x) const;
  std::int32_t tree_leaf(const Tree& t, std::span<const double> x) const;
  // Accumulates QRF weights for x into a buffer indexed by training row.
  void qrf_weights(std::span<const double> x, std::vector<double>& w) const;

  std::vector<Tree> trees_;
  std::vector<double> train_targets_;
  std::vector<std::size_t> sorted_by_target_;  // training indices, ascending target
  std::size_t n_train_ = 0;
  std::size_t dim_ = 0;
};

Forest fit_forest(const Dataset& ds, const ForestConfig& cfg);

}  // namespace predint
