#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace predint {

// Immutable regression dataset: row-major feature matrix plus targets.
// Construction validates shape and rejects non-finite entries.
class Dataset {
 public:
  Dataset(std::vector<double> features, std::vector<double> targets,
          std::size_t dim, std::vector<std::string> column_names = {},
          std::string target_name = "y");

  std::size_t n() const { return targets_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  double target(std::size_t i) const { return targets_[i]; }
  std::span<const double> targets() const { return targets_; }
  std::span<const double> features() const { return features_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const std::string& target_name() const { return target_name_; }

  // New dataset holding the given rows, in order. Indices may repeat.
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<double> features_;  // n x dim, row-major
  std::vector<double> targets_;
  std::size_t dim_;
  std::vector<std::string> column_names_;
  std::string target_name_;
};

// Per-column standardization statistics. Entry d (the last one) is for the
// target column. Columns with zero spread record std 1 so the transform is
// always invertible.
struct ScalerParams {
  std::vector<double> means;  // size dim + 1
  std::vector<double> stds;   // size dim + 1, all > 0
};

struct SplitTriple {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> cal_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

enum class SyntheticKind { linear_homoscedastic, sine_heteroscedastic, lognormal_skewed };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::linear_homoscedastic;
  std::size_t n = 0;
  std::size_t d = 1;
  double noise_scale = 1.0;
};

SyntheticKind parse_synthetic_kind(const std::string& name);
std::string synthetic_kind_name(SyntheticKind kind);

// Either a column name or a zero-based column index.
using TargetColumn = std::variant<std::string, std::size_t>;

// Reads a comma-separated file with one header row; every cell after the
// header must be numeric. The selected column becomes the target, the rest
// become features in file order.
Dataset load_csv(const std::string& path, const TargetColumn& target_column);

ScalerParams fit_scaler(const Dataset& ds);
Dataset apply_scaler(const Dataset& ds, const ScalerParams& p);
Dataset invert_scaler(const Dataset& ds, const ScalerParams& p);

// Centers every column (features and target) to mean 0 and scales to
// population std 1; zero-spread columns pass through with recorded std 1.
std::pair<Dataset, ScalerParams> standardize(const Dataset& ds);

// Deterministic three-way split: a seeded Fisher-Yates shuffle of the index
// range followed by contiguous slicing. Test gets floor(n*test_frac) rows,
// calibration floor((n-test)*cal_frac), the rest is the proper-train set.
SplitTriple split(const Dataset& ds, std::uint64_t seed, double test_frac,
                  double cal_frac);

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace predint
