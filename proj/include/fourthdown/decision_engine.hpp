#pragma once

#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fourthdown/gbt_wp.hpp"
#include "fourthdown/quality_metrics.hpp"
#include "fourthdown/transition_models.hpp"
#include "json.hpp"

namespace fourthdown {

/// A fourth-down game state from the possession team's side. Quality fields
/// are standardized; opp_kq / opp_pq belong to the defending team's specialists.
struct FourthDownState {
  int yardline = 50;
  int ydstogo = 5;
  int game_seconds_remaining = 1800;
  int score_differential = 0;
  int total_score = 0;
  double posteam_spread = 0.0;
  double total_points_line = 44.0;
  int posteam_timeouts = 3;
  int defteam_timeouts = 3;
  int receive_2h_ko = 0;
  int home = 0;
  double kq = 0.0;
  double pq = 0.0;
  double delta_tq_off = 0.0;
  double delta_tq_def = 0.0;
  double opp_kq = 0.0;
  double opp_pq = 0.0;

  bool operator==(const FourthDownState&) const = default;
};

struct FieldError {
  std::string field;
  std::string message;
};

std::vector<FieldError> validation_errors(const FourthDownState& s);
/// Throws InvalidInput listing every field error.
void validate(const FourthDownState& s);

/// Swaps every possession-relative field. flip(flip(s)) == s.
FourthDownState flip(const FourthDownState& s);

/// The opponent's first down after a change of possession: `points` are the
/// points the current offense just scored, `next_yardline` is in the opponent's frame.
FourthDownState opponent_first_down(const FourthDownState& s, int points, double next_yardline);

/// First-down WP query; yardline is clamped into [1, 99] and ydstogo = min(10, yardline).
WpInput first_down_input(const FourthDownState& s, double yardline);

using WpFunction = std::function<double(const WpInput&)>;

/// The five transition quantities the composition needs.
struct TransitionFunctions {
  std::function<double(double yardline, double pq)> expected_punt_yardline;
  std::function<double(double yardline, double kq)> p_make;
  std::function<double(double ydstogo, double down, double delta_tq)> p_convert;
  std::function<double(double ydstogo, double down, double yardline, double delta_tq)> gain_success;
  std::function<double(double ydstogo, double down, double delta_tq)> gain_failure;
};

TransitionFunctions transition_functions(const TransitionBundle& bundle);

enum class Decision { go, field_goal, punt };
std::string_view to_string(Decision d);
Decision decision_from(std::string_view name);
inline constexpr Decision kDecisions[] = {Decision::go, Decision::field_goal, Decision::punt};

struct Availability {
  int punt_above = 30;  // punt iff yardline > punt_above
  int fg_at_most = 50;  // field goal iff yardline <= fg_at_most

  bool punt(int yardline) const { return yardline > punt_above; }
  bool field_goal(int yardline) const { return yardline <= fg_at_most; }
};

struct GoBranches {
  double p_convert = 0.0;
  double gain_success = 0.0;  // clamped to at least ydstogo
  double gain_failure = 0.0;  // clamped to at most ydstogo - 1
  double success_yardline = 0.0;
  double failure_yardline = 0.0;  // opponent frame
  bool touchdown = false;
  double wp_success = 0.0;
  double wp_failure = 0.0;
  double wp = 0.0;
};

struct FgBranches {
  double p_make = 0.0;
  double miss_yardline = 0.0;  // opponent frame
  double wp_make = 0.0;
  double wp_miss = 0.0;
  double wp = 0.0;
};

struct PuntBranch {
  double next_yardline = 0.0;  // opponent frame
  double wp = 0.0;
};

/// Opponent's yardline after a missed kick from `yardline`: min{80, 100 - (y + 7)}.
double fg_miss_yardline(double yardline);

GoBranches wp_go(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1);
FgBranches wp_fg(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1);
PuntBranch wp_punt(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1);

struct DecisionValues {
  GoBranches go;
  std::optional<FgBranches> fg;
  std::optional<PuntBranch> punt;
  Decision best = Decision::go;
  std::optional<double> effect_size;  // best minus runner-up; empty when Go is the only option

  double wp_go() const { return go.wp; }
  std::optional<double> wp(Decision d) const;
};

/// Argmax and effect size over the available decisions.
void rank_decisions(DecisionValues& v);
/// WP of `d` minus the best available alternative; empty if `d` is unavailable
/// or has no alternative.
std::optional<double> signed_gain(const DecisionValues& v, Decision d);

DecisionValues evaluate(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1,
                        const Availability& availability = {});

/// A fitted WP model, transitions and the quality scales needed to build states.
struct DecisionModel {
  WpModel wp;
  TransitionBundle transitions;
  Standardizer tq_scale;
  std::map<std::string, double> kicker_quality;  // standardized, after all recorded attempts
  std::map<std::string, double> punter_quality;
  Availability availability;

  DecisionValues evaluate(const FourthDownState& s) const;
  /// Standardized off/def edges from the pre-game lines.
  TeamQuality team_quality(double spread, double total_line) const;
};

void to_json(nlohmann::json& j, const DecisionModel& m);
void from_json(const nlohmann::json& j, DecisionModel& m);

/// State of a fourth-down play using precomputed per-play quality; the opponent's
/// specialists default to league average.
FourthDownState state_from_play(const PlayRecord& p, const QualityTables& q, std::size_t index);

struct DecisionConfig {
  FeatureSet feature_set = FeatureSet::proposed;
  GbtParams wp_params;
  TransitionOptions transitions;
  Availability availability;
};

/// Fits the WP model and the five transition models with fixed hyperparameters.
/// `weights` is indexed like `plays`; empty means unit weights.
DecisionModel fit_decision_model(std::span<const PlayRecord> plays, const TrainingPools& pools,
                                 const QualityTables& quality, std::span<const double> weights,
                                 const DecisionConfig& config);

// ---------------------------------------------------------------------------
// Grids

struct IntRange {
  int lo = 1;
  int hi = 1;
};

struct GridCell {
  int yardline = 0;
  int ydstogo = 0;
  bool feasible = false;
  Decision best = Decision::go;
  std::optional<double> effect_size;
  std::optional<double> boot_pct;
};

using CellEvaluator = std::function<GridCell(const FourthDownState&)>;

GridCell point_cell(const DecisionModel& m, const FourthDownState& s);

/// One cell per (y, z), yardline-major; cells with z > y are infeasible and left empty.
std::vector<GridCell> boundary_grid(const FourthDownState& tmpl, IntRange y, IntRange z,
                                    const CellEvaluator& eval, bool parallel = true);

void write_grid(std::ostream& out, std::span<const GridCell> cells);

/// Batch evaluation; the parallel path splits states across OpenMP threads.
std::vector<DecisionValues> evaluate_states_serial(const DecisionModel& m, std::span<const FourthDownState> states);
std::vector<DecisionValues> evaluate_states_parallel(const DecisionModel& m,
                                                     std::span<const FourthDownState> states);

/// Human-readable single-state table: decision, WP, success probability, branch WPs.
void write_decision_table(std::ostream& out, const DecisionValues& v);

}  // namespace fourthdown
