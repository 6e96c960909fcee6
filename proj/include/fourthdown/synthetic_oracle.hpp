#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fourthdown/data_ingest.hpp"
#include "fourthdown/decision_engine.hpp"
#include "json.hpp"

namespace fourthdown {

/// A small possession game on ten 10-yard buckets. The offense at bucket b sits
/// at yardline 10b + 5. Each first-down or third-down snap uses one of the
/// game's steps; the fourth-down choice uses none.
///
/// first down: a big play (prob big_play + big_play_edge * e) gains two buckets
///   and a new first down; otherwise the ball advances `advance_one` of the time
///   by one bucket and the offense faces third and z, z ~ z_probs over z_values
///   (capped at the yardline).
/// third down / go: converts with logit = intercept - conv_slope * log1p(z) + conv_edge * e,
///   gaining one bucket (10 yards) and a first down; failing gains nothing.
/// field goal: logit = fg_intercept - fg_slope * yardline; a miss hands over at
///   min{80, 93 - yardline}. Decisions may kick for b <= fg_max_bucket; the coach
///   also tries long kicks up to coach_fg_max_bucket.
/// punt (b >= punt_min_bucket): opponent takes over at punt_base - yardline.
/// Moving past the goal line scores a touchdown (7); scores restart the opponent
/// at bucket 7. Scores are clamped to [-max_score, max_score].
struct WorldConfig {
  int plays_per_game = 60;
  int max_score = 28;
  double big_play = 0.15;
  double big_play_edge = 0.05;
  double advance_one = 0.5;
  std::array<int, 3> z_values = {1, 3, 5};
  std::array<double, 3> z_probs = {0.3, 0.35, 0.35};
  double conv3_intercept = 1.2;
  double conv4_intercept = 1.0;
  double conv_slope = 0.9;
  double conv_edge = 0.25;
  double fg_intercept = 3.0;
  double fg_slope = 0.06;
  int fg_max_bucket = 4;
  int punt_min_bucket = 3;
  int punt_base = 130;
  // synthetic coach
  double coach_go_short = 0.6;  // go rate on 4th and 1
  double coach_go = 0.15;       // go rate otherwise
  double coach_fg_share = 0.6;  // share of kicks that are field goals when both kicks are open
  int coach_fg_max_bucket = 6;
  double spread_per_edge = 3.0;
  double total_line = 44.0;
  int teams = 32;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

struct OracleState {
  int edge = 0;    // possession team's edge in {-1, 0, 1}
  int bucket = 7;  // 0..9
  int z_index = 0; // third/fourth down only
  int score = 0;   // possession team's margin
  int steps = 60;  // snaps remaining
  int down = 1;    // 1, 3 or 4
};

struct OracleValues {
  double go = 0.0;
  std::optional<double> field_goal;
  std::optional<double> punt;

  std::optional<double> value(Decision d) const;
  Decision best() const;
};

class SyntheticWorld {
 public:
  /// Validates every transition row (sums to 1 within 1e-12) and solves the game.
  explicit SyntheticWorld(WorldConfig config);

  const WorldConfig& config() const { return config_; }

  int yardline(int bucket) const { return 10 * bucket + 5; }
  int ydstogo(int bucket, int z_index) const;
  int seconds(int steps) const;
  double spread(int edge) const { return -config_.spread_per_edge * edge; }

  /// Exact win probability of the possession team at a first-, third- or fourth-down state
  /// (fourth downs follow the synthetic coach).
  double true_wp(const OracleState& s) const;
  /// Exact WP of each fourth-down action a decision may choose (field goal for
  /// b <= fg_max_bucket, punt for b >= punt_min_bucket).
  OracleValues fourth_down_values(const OracleState& s) const;
  /// Exact WP of taking `d` at a fourth down, whether or not it is offered.
  double action_value(const OracleState& s, Decision d) const;
  /// Pre-kickoff WP of a team with edge `edge` (kickoff receiver by coin flip).
  double pregame_wp(int edge) const;

  /// Coach's action probabilities {go, fg, punt} at a fourth down.
  std::array<double, 3> coach_policy(int bucket, int z_index) const;

  /// Row sums of every categorical kernel, for inspection.
  std::vector<double> kernel_row_sums() const;

  /// Engine state for a fourth-down oracle state, standardizing the team edge with `tq_scale`.
  FourthDownState engine_state(const OracleState& s, int total_score, const Standardizer& tq_scale) const;
  WpInput wp_input(const OracleState& s, int total_score) const;

 private:
  struct Outcome {
    double p;
    int down;      // 1 = first down for the offense, 3 = third down, 4 = fourth down, 0 = opponent first down
    int bucket;
    int z_index;
    int points;    // scored by the current offense
    int dsteps;    // steps consumed
  };
  std::vector<Outcome> first_down_outcomes(int edge, int bucket) const;
  std::vector<Outcome> third_down_outcomes(int edge, int bucket, int z_index) const;
  std::vector<Outcome> action_outcomes(Decision d, int edge, int bucket, int z_index) const;

  std::size_t index(int edge, int bucket, int z_index, int score, int steps) const;
  double v1(int edge, int bucket, int score, int steps) const;
  double terminal(int score) const;
  double outcome_value(const Outcome& o, int edge, int score, int steps) const;
  void solve();

  WorldConfig config_;
  std::vector<double> v1_, v3_, v4_;
  friend struct WorldSimulator;
};

struct SimulatedHistory {
  std::vector<PlayRecord> plays;
  std::vector<OracleState> states;  // oracle state of each play, before the snap
};

/// Plays of `n_games` games; deterministic per seed.
SimulatedHistory simulate_history(const SyntheticWorld& world, int n_games, std::uint64_t seed);

}  // namespace fourthdown
