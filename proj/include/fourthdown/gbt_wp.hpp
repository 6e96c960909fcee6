#pragma once

#include <span>
#include <string>
#include <vector>

#include "fourthdown/data_ingest.hpp"
#include "fourthdown/gbt.hpp"
#include "json.hpp"

namespace fourthdown {

/// Raw game-state inputs shared by all feature sets. Derived features are
/// computed from these on demand, never stored.
struct WpInput {
  double score_differential = 0.0;
  double game_seconds_remaining = 3600.0;
  double posteam_spread = 0.0;
  double yardline = 75.0;
  double receive_2h_ko = 0.0;
  double posteam_timeouts = 3.0;
  double defteam_timeouts = 3.0;
  double total_score = 0.0;
  double down = 1.0;
  double ydstogo = 10.0;
  double home = 0.0;
};

WpInput wp_input(const PlayRecord& play);

double score_time_ratio(const WpInput& in);
double adjusted_score(const WpInput& in);
/// spread * exp(-4 (1 - 3600 / t)), evaluated as printed (overflows near t = 0).
double spread_time(const WpInput& in);
double diff_time_ratio(const WpInput& in);

enum class FeatureSet { proposed, lock_nettleton, baldwin };

std::string_view to_string(FeatureSet set);
FeatureSet feature_set_from(std::string_view name);
std::vector<std::string> feature_names(FeatureSet set);
std::vector<int> monotone_constraints(FeatureSet set);
std::vector<double> features(FeatureSet set, const WpInput& in);
/// The proposed set trains on first downs only, the baselines on every down.
bool trains_on_first_downs_only(FeatureSet set);

struct WpModel {
  FeatureSet set = FeatureSet::proposed;
  GbtModel gbt;

  double predict(const WpInput& in) const;
};

void to_json(nlohmann::json& j, const WpModel& m);
void from_json(const nlohmann::json& j, WpModel& m);

struct GridPoint {
  int max_depth = 4;
  double learning_rate = 0.1;
  double min_child_weight = 100.0;
};

/// depth {3,4,5} x learning rate {0.05, 0.1} x min child weight {100, 500}.
std::vector<GridPoint> default_grid();

struct GridResult {
  GridPoint point;
  int trees = 0;
  double tune_logloss = 0.0;
};

struct WpTuneResult {
  WpModel model;         // fit on the training rows, truncated at the selected round count
  GbtParams params;      // selected hyperparameters with n_trees fixed
  std::vector<GridResult> table;
};

struct WpTuneOptions {
  std::vector<GridPoint> grid = default_grid();
  int max_trees = 1000;
  int patience = 50;
  double lambda = 1.0;
};

FeatureMatrix feature_matrix(FeatureSet set, std::span<const PlayRecord> plays, std::span<const std::size_t> rows);
std::vector<double> labels(std::span<const PlayRecord> plays, std::span<const std::size_t> rows);

/// Selects the grid point minimising tune log-loss. Empty grid -> InvalidInput;
/// a grid that never beats a fair coin logs a warning and still returns the best point.
WpTuneResult tune_wp(FeatureSet set, std::span<const PlayRecord> plays, std::span<const std::size_t> train_rows,
                     std::span<const std::size_t> tune_rows, const WpTuneOptions& options = {});

/// Fixed-hyperparameter fit (no early stopping); weights may be empty.
WpModel fit_wp(FeatureSet set, std::span<const PlayRecord> plays, std::span<const std::size_t> rows,
               std::span<const double> weights, const GbtParams& params);

/// Game-level logistic regression of win/loss on the pre-game spread (one row per game).
struct SpreadOnlyModel {
  double intercept = 0.0;
  double slope = 0.0;
  double predict(double spread) const;
};
SpreadOnlyModel fit_spread_only(std::span<const PlayRecord> plays, std::span<const std::size_t> rows);

struct ContestEntry {
  std::string name;
  std::string learner;
  std::string training_plays;
  std::vector<double> predictions;  // aligned with the test labels
};

struct ContestRow {
  std::string name;
  std::string learner;
  std::string training_plays;
  double logloss = 0.0;
  double reduction = 0.0;  // percent, relative to a fair coin
};

/// Scores entries on shared labels, appends the fair coin, sorts ascending by log-loss.
std::vector<ContestRow> prediction_contest(std::vector<ContestEntry> entries, std::span<const double> y);

/// Log-loss contest on a game split: proposed / Lock-Nettleton features /
/// Baldwin features under the boosted learner, the spread-only logistic and a fair coin.
std::vector<ContestRow> run_contest(std::span<const PlayRecord> plays, const DatasetSplit& split,
                                    const WpTuneOptions& options = {});

void write_contest(std::ostream& out, std::span<const ContestRow> rows);

}  // namespace fourthdown
