#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fourthdown/kernels.hpp"
#include "json.hpp"

namespace fourthdown {

/// Dense row-major feature matrix.
struct FeatureMatrix {
  std::size_t cols = 0;
  std::vector<double> values;

  std::size_t rows() const { return cols == 0 ? 0 : values.size() / cols; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  void push_row(std::span<const double> r);
};

struct GbtParams {
  int max_depth = 4;
  double learning_rate = 0.1;
  double min_child_weight = 100.0;  // minimum hessian mass per child
  double lambda = 1.0;              // L2 on leaf weights
  int n_trees = 100;                // upper bound when early stopping
  int early_stopping_rounds = 50;
  int max_bins = 256;
  std::vector<int> monotone;  // per feature: +1, -1 or 0; empty = unconstrained
  bool parallel = true;       // histogram kernel choice
};

/// Flat node arrays. A node is a leaf when feature < 0; rows with x >= threshold go right
/// (NaN goes left).
struct Tree {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left, right;
  std::vector<double> value;  // leaf output, learning rate already applied
  std::vector<double> gain;   // split gain, 0 on leaves

  double predict(std::span<const double> x) const;
  bool operator==(const Tree&) const = default;
};

struct GbtModel {
  std::size_t n_features = 0;
  double base_score = 0.0;  // margin
  double learning_rate = 0.1;
  std::vector<int> monotone;
  std::vector<Tree> trees;

  double margin(std::span<const double> x) const;
  /// sigmoid(margin); always inside (0, 1).
  double predict(std::span<const double> x) const;
  /// Per-feature share of total split gain.
  std::vector<double> gain_importance() const;
  bool operator==(const GbtModel&) const = default;
};

struct TrainReport {
  int best_iteration = 0;  // trees kept
  double best_tune_logloss = 0.0;
  std::vector<double> tune_curve;
};

struct TuneSet {
  const FeatureMatrix* x = nullptr;
  std::span<const double> y;
  std::span<const double> w;  // may be empty
};

/// Logistic boosting. With a tune set, stops after `early_stopping_rounds` rounds without
/// improvement and truncates to the best round. Weights may be empty.
GbtModel train_gbt(const FeatureMatrix& x, std::span<const double> y, std::span<const double> w,
                   const GbtParams& params, const TuneSet* tune = nullptr, TrainReport* report = nullptr);

/// Bin edges (ascending, finite) per feature: at most max_bins - 1 thresholds each.
std::vector<std::vector<double>> compute_cuts(const FeatureMatrix& x, int max_bins);
BinnedMatrix bin_features(const FeatureMatrix& x, const std::vector<std::vector<double>>& cuts);

/// Structural check: for every split on a constrained feature, every leaf below the
/// left child is <= (for +1) every leaf below the right child. Fills `why` on failure.
bool audit_monotone(const GbtModel& model, std::string* why = nullptr);

double log_loss(std::span<const double> p, std::span<const double> y, std::span<const double> w = {});

inline constexpr int kGbtFormatVersion = 1;
void to_json(nlohmann::json& j, const GbtModel& m);
void from_json(const nlohmann::json& j, GbtModel& m);

}  // namespace fourthdown
