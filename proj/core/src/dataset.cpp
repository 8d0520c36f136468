#include "predint/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "predint/rng.hpp"

namespace predint {

Dataset::Dataset(std::vector<double> features, std::vector<double> targets,
                 std::size_t dim, std::vector<std::string> column_names,
                 std::string target_name)
    : features_(std::move(features)),
      targets_(std::move(targets)),
      dim_(dim),
      column_names_(std::move(column_names)),
      target_name_(std::move(target_name)) {
  if (targets_.empty()) throw std::invalid_argument("Dataset: needs at least one row");
  if (dim_ == 0) throw std::invalid_argument("Dataset: needs at least one feature");
  if (features_.size() != targets_.size() * dim_) {
    throw std::invalid_argument("Dataset: feature matrix shape does not match targets");
  }
  if (column_names_.empty()) {
    column_names_.resize(dim_);
    for (std::size_t j = 0; j < dim_; ++j) column_names_[j] = "x" + std::to_string(j);
  } else if (column_names_.size() != dim_) {
    throw std::invalid_argument("Dataset: column_names size does not match dim");
  }
  for (double v : features_) {
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite feature entry");
  }
  for (double v : targets_) {
    if (!std::isfinite(v)) throw std::invalid_argument("Dataset: non-finite target entry");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw std::invalid_argument("Dataset::subset: empty index set");
  std::vector<double> f;
  std::vector<double> t;
  f.reserve(indices.size() * dim_);
  t.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= n()) throw std::out_of_range("Dataset::subset: index out of range");
    const auto r = row(i);
    f.insert(f.end(), r.begin(), r.end());
    t.push_back(targets_[i]);
  }
  return Dataset(std::move(f), std::move(t), dim_, column_names_, target_name_);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const TargetColumn& target_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file: " + path);
  std::vector<std::string> header = split_line(line);
  for (auto& h : header) h = trim(h);
  const std::size_t n_cols = header.size();
  if (n_cols < 2) throw std::runtime_error("load_csv: need at least two columns");

  std::size_t target_idx = n_cols;
  if (std::holds_alternative<std::string>(target_column)) {
    const auto& name = std::get<std::string>(target_column);
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (header[j] == name) {
        target_idx = j;
        break;
      }
    }
    if (target_idx == n_cols) {
      throw std::runtime_error("load_csv: target column '" + name + "' not found");
    }
  } else {
    target_idx = std::get<std::size_t>(target_column);
    if (target_idx >= n_cols) {
      throw std::runtime_error("load_csv: target column index " +
                               std::to_string(target_idx) + " out of range");
    }
  }

  std::vector<double> features;
  std::vector<double> targets;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < n_cols; ++j) {
    if (j != target_idx) names.push_back(header[j]);
  }

  std::size_t file_row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++file_row;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != n_cols) {
      throw std::runtime_error("load_csv: row " + std::to_string(file_row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(n_cols));
    }
    for (std::size_t j = 0; j < n_cols; ++j) {
      const std::string cell = trim(cells[j]);
      std::size_t pos = 0;
      double value = 0.0;
      bool ok = true;
      try {
        value = std::stod(cell, &pos);
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok || pos != cell.size()) {
        throw std::runtime_error("load_csv: non-numeric cell at row " +
                                 std::to_string(file_row) + ", column " + header[j]);
      }
      if (j == target_idx) {
        targets.push_back(value);
      } else {
        features.push_back(value);
      }
    }
  }
  if (targets.empty()) throw std::runtime_error("load_csv: no data rows in " + path);
  return Dataset(std::move(features), std::move(targets), n_cols - 1, std::move(names),
                 header[target_idx]);
}

ScalerParams fit_scaler(const Dataset& ds) {
  const std::size_t d = ds.dim();
  const std::size_t n = ds.n();
  ScalerParams p;
  p.means.assign(d + 1, 0.0);
  p.stds.assign(d + 1, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) p.means[j] += r[j];
    p.means[d] += ds.target(i);
  }
  for (auto& m : p.means) m /= static_cast<double>(n);

  std::vector<double> ss(d + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = ds.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - p.means[j];
      ss[j] += c * c;
    }
    const double c = ds.target(i) - p.means[d];
    ss[d] += c * c;
  }
  for (std::size_t j = 0; j <= d; ++j) {
    const double sd = std::sqrt(ss[j] / static_cast<double>(n));
    p.stds[j] = sd > 0.0 ? sd : 1.0;
  }
  return p;
}

Dataset apply_scaler(const Dataset& ds, const ScalerParams& p) {
  const std::size_t d = ds.dim();
  if (p.means.size() != d + 1 || p.stds.size() != d + 1) {
    throw std::invalid_argument("apply_scaler: params do not match dataset dim");
  }
  std::vector<double> f(ds.features().begin(), ds.features().end());
  std::vector<double> t(ds.targets().begin(), ds.targets().end());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      f[i * d + j] = (f[i * d + j] - p.means[j]) / p.stds[j];
    }
    t[i] = (t[i] - p.means[d]) / p.stds[d];
  }
  return Dataset(std::move(f), std::move(t), d, ds.column_names(), ds.target_name());
}

Dataset invert_scaler(const Dataset& ds, const ScalerParams& p) {
  const std::size_t d = ds.dim();
  if (p.means.size() != d + 1 || p.stds.size() != d + 1) {
    throw std::invalid_argument("invert_scaler: params do not match dataset dim");
  }
  std::vector<double> f(ds.features().begin(), ds.features().end());
  std::vector<double> t(ds.targets().begin(), ds.targets().end());
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      f[i * d + j] = f[i * d + j] * p.stds[j] + p.means[j];
    }
    t[i] = t[i] * p.stds[d] + p.means[d];
  }
  return Dataset(std::move(f), std::move(t), d, ds.column_names(), ds.target_name());
}

std::pair<Dataset, ScalerParams> standardize(const Dataset& ds) {
  ScalerParams p = fit_scaler(ds);
  return {apply_scaler(ds, p), std::move(p)};
}

SplitTriple split(const Dataset& ds, std::uint64_t seed, double test_frac,
                  double cal_frac) {
  if (!(test_frac > 0.0 && test_frac < 1.0)) {
    throw std::invalid_argument("split: test_frac must lie in (0,1)");
  }
  if (!(cal_frac >= 0.0 && cal_frac < 1.0)) {
    throw std::invalid_argument("split: cal_frac must lie in [0,1)");
  }
  const std::size_t n = ds.n();
  const std::size_t n_test = static_cast<std::size_t>(
      std::floor(static_cast<double>(n) * test_frac));
  const std::size_t n_rest = n - n_test;
  const std::size_t n_cal = static_cast<std::size_t>(
      std::floor(static_cast<double>(n_rest) * cal_frac));
  const std::size_t n_train = n_rest - n_cal;
  if (n_test == 0) throw std::invalid_argument("split: empty test partition");
  if (n_train == 0) throw std::invalid_argument("split: empty train partition");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }

  SplitTriple out;
  out.seed = seed;
  out.test_idx.assign(idx.begin(), idx.begin() + n_test);
  out.cal_idx.assign(idx.begin() + n_test, idx.begin() + n_test + n_cal);
  out.train_idx.assign(idx.begin() + n_test + n_cal, idx.end());
  return out;
}

SyntheticKind parse_synthetic_kind(const std::string& name) {
  if (name == "linear_homoscedastic") return SyntheticKind::linear_homoscedastic;
  if (name == "sine_heteroscedastic") return SyntheticKind::sine_heteroscedastic;
  if (name == "lognormal_skewed") return SyntheticKind::lognormal_skewed;
  throw std::invalid_argument("unknown synthetic kind: " + name);
}

std::string synthetic_kind_name(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::linear_homoscedastic:
      return "linear_homoscedastic";
    case SyntheticKind::sine_heteroscedastic:
      return "sine_heteroscedastic";
    case SyntheticKind::lognormal_skewed:
      return "lognormal_skewed";
  }
  return "";
}

Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.n == 0) throw std::invalid_argument("gen_synthetic: n must be positive");
  if (spec.d == 0) throw std::invalid_argument("gen_synthetic: d must be positive");
  if (!(spec.noise_scale >= 0.0)) {
    throw std::invalid_argument("gen_synthetic: noise_scale must be non-negative");
  }

  Rng rng(seed);
  std::vector<double> beta(spec.d);
  for (auto& b : beta) b = rng.uniform() * 2.0 - 1.0;

  std::vector<double> f(spec.n * spec.d);
  std::vector<double> t(spec.n);
  const double two_pi = 2.0 * M_PI;
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < spec.d; ++j) {
      f[i * spec.d + j] = rng.uniform() * 2.0 - 1.0;  // features on [-1,1)
    }
    const double* x = f.data() + i * spec.d;
    double y = 0.0;
    switch (spec.kind) {
      case SyntheticKind::linear_homoscedastic: {
        for (std::size_t j = 0; j < spec.d; ++j) y += beta[j] * x[j];
        y += spec.noise_scale * rng.normal();
        break;
      }
      case SyntheticKind::sine_heteroscedastic: {
        y = std::sin(two_pi * x[0]) +
            spec.noise_scale * (1.0 + std::abs(x[0])) * rng.normal();
        break;
      }
      case SyntheticKind::lognormal_skewed: {
        for (std::size_t j = 0; j < spec.d; ++j) y += beta[j] * x[j];
        const double eps = spec.noise_scale * rng.normal();
        const double sigma2 = spec.noise_scale * spec.noise_scale;
        y += std::exp(eps) - std::exp(sigma2 / 2.0);
        break;
      }
    }
    t[i] = y;
  }
  return Dataset(std::move(f), std::move(t), spec.d);
}

}  // namespace predint
