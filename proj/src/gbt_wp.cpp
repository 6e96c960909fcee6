#include "fourthdown/gbt_wp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "fourthdown/common.hpp"
#include "fourthdown/csv.hpp"
#include "fourthdown/spline_glm.hpp"

namespace fourthdown {

WpInput wp_input(const PlayRecord& p) {
  WpInput in;
  in.score_differential = p.score_differential;
  in.game_seconds_remaining = p.game_seconds_remaining;
  in.posteam_spread = p.posteam_spread;
  in.yardline = p.yardline;
  in.receive_2h_ko = p.receive_2h_ko;
  in.posteam_timeouts = p.posteam_timeouts;
  in.defteam_timeouts = p.defteam_timeouts;
  in.total_score = p.total_score;
  in.down = p.down;
  in.ydstogo = p.ydstogo;
  in.home = p.home;
  return in;
}

double score_time_ratio(const WpInput& in) { return in.score_differential / (0.01 + in.game_seconds_remaining); }

double adjusted_score(const WpInput& in) { return in.score_differential / std::sqrt(1.0 + in.game_seconds_remaining); }

namespace {

double time_decay(double t) { return std::exp(-4.0 * (1.0 - 3600.0 / t)); }

}  // namespace

double spread_time(const WpInput& in) { return in.posteam_spread * time_decay(in.game_seconds_remaining); }

double diff_time_ratio(const WpInput& in) { return in.score_differential * time_decay(in.game_seconds_remaining); }

std::string_view to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::proposed: return "proposed";
    case FeatureSet::lock_nettleton: return "lock_nettleton";
    case FeatureSet::baldwin: return "baldwin";
  }
  return "";
}

FeatureSet feature_set_from(std::string_view name) {
  for (auto s : {FeatureSet::proposed, FeatureSet::lock_nettleton, FeatureSet::baldwin})
    if (to_string(s) == name) return s;
  throw SchemaError("unknown feature set " + std::string(name));
}

std::vector<std::string> feature_names(FeatureSet set) {
  switch (set) {
    case FeatureSet::proposed:
      return {"score_differential", "game_seconds_remaining", "posteam_spread", "yardline", "receive_2h_ko",
              "posteam_timeouts", "defteam_timeouts", "total_score", "score_time_ratio"};
    case FeatureSet::lock_nettleton:
      return {"score_differential", "game_seconds_remaining", "yardline", "down", "ydstogo",
              "posteam_timeouts", "defteam_timeouts", "posteam_spread", "total_score", "adjusted_score"};
    case FeatureSet::baldwin:
      return {"score_differential", "game_seconds_remaining", "half_seconds_remaining", "yardline", "down",
              "ydstogo", "home", "receive_2h_ko", "posteam_timeouts", "defteam_timeouts", "spread_time",
              "diff_time_ratio"};
  }
  return {};
}

std::vector<int> monotone_constraints(FeatureSet set) {
  switch (set) {
    case FeatureSet::proposed: return {1, 0, -1, -1, 0, 1, -1, 0, 1};
    case FeatureSet::lock_nettleton: return std::vector<int>(10, 0);
    case FeatureSet::baldwin: return {1, 0, 0, -1, -1, -1, 0, 0, 1, -1, -1, 1};
  }
  return {};
}

std::vector<double> features(FeatureSet set, const WpInput& in) {
  switch (set) {
    case FeatureSet::proposed:
      return {in.score_differential, in.game_seconds_remaining, in.posteam_spread, in.yardline,
              in.receive_2h_ko,      in.posteam_timeouts,       in.defteam_timeouts, in.total_score,
              score_time_ratio(in)};
    case FeatureSet::lock_nettleton:
      return {in.score_differential, in.game_seconds_remaining, in.yardline,      in.down,
              in.ydstogo,            in.posteam_timeouts,       in.defteam_timeouts, in.posteam_spread,
              in.total_score,        adjusted_score(in)};
    case FeatureSet::baldwin: {
      const double half = in.game_seconds_remaining > 1800 ? in.game_seconds_remaining - 1800
                                                           : in.game_seconds_remaining;
      return {in.score_differential, in.game_seconds_remaining, half, in.yardline, in.down, in.ydstogo, in.home,
              in.receive_2h_ko, in.posteam_timeouts, in.defteam_timeouts, spread_time(in), diff_time_ratio(in)};
    }
  }
  return {};
}

bool trains_on_first_downs_only(FeatureSet set) { return set == FeatureSet::proposed; }

double WpModel::predict(const WpInput& in) const { return gbt.predict(features(set, in)); }

void to_json(nlohmann::json& j, const WpModel& m) {
  j = {{"feature_set", std::string(to_string(m.set))}, {"features", feature_names(m.set)}, {"gbt", m.gbt}};
}

void from_json(const nlohmann::json& j, WpModel& m) {
  m.set = feature_set_from(j.at("feature_set").get<std::string>());
  m.gbt = j.at("gbt").get<GbtModel>();
  if (m.gbt.n_features != feature_names(m.set).size()) throw SchemaError("WP model feature count mismatch");
}

std::vector<GridPoint> default_grid() {
  std::vector<GridPoint> grid;
  for (int depth : {3, 4, 5})
    for (double lr : {0.05, 0.1})
      for (double mcw : {100.0, 500.0}) grid.push_back({depth, lr, mcw});
  return grid;
}

FeatureMatrix feature_matrix(FeatureSet set, std::span<const PlayRecord> plays, std::span<const std::size_t> rows) {
  FeatureMatrix x;
  x.cols = feature_names(set).size();
  x.values.reserve(rows.size() * x.cols);
  for (auto i : rows) x.push_row(features(set, wp_input(plays[i])));
  return x;
}

std::vector<double> labels(std::span<const PlayRecord> plays, std::span<const std::size_t> rows) {
  std::vector<double> y;
  y.reserve(rows.size());
  for (auto i : rows) y.push_back(plays[i].win_loss);
  return y;
}

namespace {

std::vector<std::size_t> usable_rows(FeatureSet set, std::span<const PlayRecord> plays,
                                     std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  for (auto i : rows) {
    const auto& p = plays[i];
    if (p.yardline <= 0 || p.yardline >= 100) continue;
    if (trains_on_first_downs_only(set) && p.down != 1) continue;
    out.push_back(i);
  }
  return out;
}

GbtParams params_for(FeatureSet set, const GridPoint& g, int trees, double lambda) {
  GbtParams p;
  p.max_depth = g.max_depth;
  p.learning_rate = g.learning_rate;
  p.min_child_weight = g.min_child_weight;
  p.n_trees = trees;
  p.lambda = lambda;
  p.monotone = monotone_constraints(set);
  return p;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

WpTuneResult tune_wp(FeatureSet set, std::span<const PlayRecord> plays, std::span<const std::size_t> train_rows,
                     std::span<const std::size_t> tune_rows, const WpTuneOptions& options) {
  if (options.grid.empty()) throw InvalidInput("hyperparameter grid is empty");
  const auto tr = usable_rows(set, plays, train_rows);
  const auto tu = usable_rows(set, plays, tune_rows);
  if (tr.empty()) throw FitError("WP model: no training rows");
  if (tu.empty()) throw FitError("WP model: no tuning rows");
  const auto x = feature_matrix(set, plays, tr);
  const auto y = labels(plays, tr);
  const auto xt = feature_matrix(set, plays, tu);
  const auto yt = labels(plays, tu);
  TuneSet ts{&xt, yt, {}};

  WpTuneResult result;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& g : options.grid) {
    auto p = params_for(set, g, options.max_trees, options.lambda);
    p.early_stopping_rounds = options.patience;
    TrainReport rep;
    auto model = train_gbt(x, y, {}, p, &ts, &rep);
    result.table.push_back({g, rep.best_iteration, rep.best_tune_logloss});
    log(LogLevel::debug, "grid depth=" + std::to_string(g.max_depth) + " lr=" + fmt(g.learning_rate) +
                             " mcw=" + fmt(g.min_child_weight) + " trees=" + std::to_string(rep.best_iteration) +
                             " tune_logloss=" + fmt(rep.best_tune_logloss));
    if (rep.best_tune_logloss < best) {
      best = rep.best_tune_logloss;
      result.model = WpModel{set, std::move(model)};
      result.params = p;
      result.params.n_trees = rep.best_iteration;
    }
  }
  if (!(best < std::log(2.0)))
    log_warn("no grid point beats a fair coin on the tune set (best log-loss " + fmt(best) + ")");
  return result;
}

WpModel fit_wp(FeatureSet set, std::span<const PlayRecord> plays, std::span<const std::size_t> rows,
               std::span<const double> weights, const GbtParams& params) {
  std::vector<std::size_t> kept;
  std::vector<double> w;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& p = plays[rows[k]];
    if (p.yardline <= 0 || p.yardline >= 100) continue;
    if (trains_on_first_downs_only(set) && p.down != 1) continue;
    kept.push_back(rows[k]);
    if (!weights.empty()) w.push_back(weights[k]);
  }
  if (kept.empty()) throw FitError("WP model: no training rows");
  const auto x = feature_matrix(set, plays, kept);
  const auto y = labels(plays, kept);
  GbtParams p = params;
  p.monotone = monotone_constraints(set);
  return WpModel{set, train_gbt(x, y, w, p)};
}

double SpreadOnlyModel::predict(double spread) const {
  const double eta = intercept + slope * spread;
  return 1.0 / (1.0 + std::exp(-eta));
}

SpreadOnlyModel fit_spread_only(std::span<const PlayRecord> plays, std::span<const std::size_t> rows) {
  std::map<std::string, std::size_t> first_play;
  for (auto i : rows) first_play.try_emplace(plays[i].game_id, i);
  if (first_play.empty()) throw FitError("spread-only model: no games");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(first_play.size()), 2);
  Eigen::VectorXd y(X.rows());
  Eigen::Index r = 0;
  for (const auto& [game, i] : first_play) {
    X(r, 0) = 1.0;
    X(r, 1) = plays[i].posteam_spread;
    y[r] = plays[i].win_loss;
    ++r;
  }
  const auto fit = fit_logistic(X, y);
  return {fit.coefficients[0], fit.coefficients[1]};
}

std::vector<ContestRow> prediction_contest(std::vector<ContestEntry> entries, std::span<const double> y) {
  entries.push_back({"Fair coin", "constant", "", std::vector<double>(y.size(), 0.5)});
  const double coin = std::log(2.0);
  std::vector<ContestRow> rows;
  for (const auto& e : entries) {
    if (e.predictions.size() != y.size()) throw InvalidInput("contest entry " + e.name + " has wrong length");
    const double ll = log_loss(e.predictions, y);
    rows.push_back({e.name, e.learner, e.training_plays, ll, 100.0 * (coin - ll) / coin});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.logloss < b.logloss; });
  return rows;
}

std::vector<ContestRow> run_contest(std::span<const PlayRecord> plays, const DatasetSplit& split,
                                    const WpTuneOptions& options) {
  const auto train = split_rows(plays, split, DatasetSplit::Part::train);
  const auto tune = split_rows(plays, split, DatasetSplit::Part::tune);
  const auto test_all = split_rows(plays, split, DatasetSplit::Part::test);
  std::vector<std::size_t> test;
  for (auto i : test_all)
    if (plays[i].yardline > 0 && plays[i].yardline < 100) test.push_back(i);
  if (test.empty()) throw FitError("contest: empty test set");
  const auto y = labels(plays, test);

  std::vector<ContestEntry> entries;
  const std::pair<FeatureSet, const char*> sets[] = {{FeatureSet::proposed, "Proposed (first-down model)"},
                                                     {FeatureSet::lock_nettleton, "Lock-Nettleton features"},
                                                     {FeatureSet::baldwin, "Baldwin features"}};
  for (const auto& [set, name] : sets) {
    const auto tuned = tune_wp(set, plays, train, tune, options);
    ContestEntry e{name, "boosted trees", trains_on_first_downs_only(set) ? "first downs" : "all downs", {}};
    for (auto i : test) e.predictions.push_back(tuned.model.predict(wp_input(plays[i])));
    entries.push_back(std::move(e));
  }
  const auto spread = fit_spread_only(plays, train);
  ContestEntry s{"Pre-game point spread only", "logistic regression", "games", {}};
  for (auto i : test) s.predictions.push_back(spread.predict(plays[i].posteam_spread));
  entries.push_back(std::move(s));
  return prediction_contest(std::move(entries), y);
}

void write_contest(std::ostream& out, std::span<const ContestRow> rows) {
  out << "model,learner,training_plays,logloss,reduction_pct\n";
  for (const auto& r : rows)
    out << csv::escape(r.name) << ',' << csv::escape(r.learner) << ',' << csv::escape(r.training_plays) << ','
        << std::fixed << std::setprecision(4) << r.logloss << ',' << std::setprecision(2) << r.reduction
        << std::defaultfloat << '\n';
}

}  // namespace fourthdown
