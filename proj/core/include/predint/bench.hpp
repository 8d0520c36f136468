#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "predint/dataset.hpp"
#include "predint/intervals.hpp"
#include "predint/metrics.hpp"

namespace predint {

// One benchmark method: a registered name plus numeric hyperparameter
// overrides (booleans encoded as 0/1). See list_methods() for the roster.
struct MethodSpec {
  std::string name;
  std::map<std::string, double> params;

  double get(const std::string& key, double fallback) const;
};

struct DataConfig {
  bool use_csv = false;
  std::string csv_path;
  std::string csv_target;                 // column name; empty -> use index
  std::size_t csv_target_index = 0;
  SyntheticSpec synthetic;
};

struct ExperimentConfig {
  DataConfig data;
  std::vector<MethodSpec> methods;
  double alpha = 0.1;
  std::size_t n_splits = 50;
  double test_frac = 0.2;
  double cal_frac = 0.5;
  std::uint64_t base_seed = 0;
  bool unsafe_train_calibration = false;  // calibrate on the training slice
  double time_budget_s = 600.0;           // per method per split
};

enum class RowStatus { ok, oot, oor, error };
std::string row_status_name(RowStatus s);

struct ResultRow {
  std::string method;
  std::size_t split = 0;
  MetricsReport metrics;
  double wall_ms = 0.0;
  RowStatus status = RowStatus::ok;
  std::string detail;  // error text or tuning note; not part of the CSV schema
};

struct AggregateRow {
  std::string method;
  std::size_t n_rows = 0;      // rows included in the aggregates
  std::size_t n_excluded = 0;  // sentinel / errored rows left out
  double coverage_mean = 0.0, coverage_std = 0.0;
  double width_mean = 0.0, width_std = 0.0;
  double relwidth_mean = 0.0, relwidth_std = 0.0;
  double r2_mean = 0.0, r2_std = 0.0;  // NaN when no method row carries an R^2
  double wall_ms_mean = 0.0;
};

struct ResultsTable {
  std::vector<ResultRow> rows;
  std::vector<AggregateRow> aggregates;
};

// Versioned JSON config (see README for the schema).
ExperimentConfig load_config(const std::string& path);

// Full protocol: per split, re-split and re-standardize on the proper-train
// slice, build every method, and evaluate on the test slice. Method failures
// become per-row sentinels; the run never aborts. Deterministic for a fixed
// config (wall_ms excepted).
ResultsTable run(const ExperimentConfig& config);

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);

struct BuiltMethod {
  IntervalEstimator estimator;
  std::string detail;  // e.g. tuned hyperparameter values
};

// Builds one method on (already standardized) train/cal slices. Exposed for
// tests and custom harnesses; run() goes through this.
BuiltMethod build_method(const MethodSpec& spec, const Dataset& train,
                         const Dataset& cal, double alpha, std::uint64_t seed);

// (name, one-line description) for every registered method.
std::vector<std::pair<std::string, std::string>> list_methods();

std::string rows_csv(const ResultsTable& table);
std::string aggregate_csv(const ResultsTable& table);
void write_rows_csv(const ResultsTable& table, const std::string& path);
void write_aggregate_csv(const ResultsTable& table, const std::string& path);

// Writes a dataset in the CSV dialect load_csv reads (x0..x{d-1},y header).
void write_dataset_csv(const Dataset& ds, const std::string& path);

}  // namespace predint
