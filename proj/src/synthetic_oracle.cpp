#include "fourthdown/synthetic_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fourthdown/common.hpp"

namespace fourthdown {

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = {{"plays_per_game", c.plays_per_game},   {"max_score", c.max_score},
       {"big_play", c.big_play},               {"big_play_edge", c.big_play_edge},
       {"advance_one", c.advance_one},         {"z_values", c.z_values},
       {"z_probs", c.z_probs},                 {"conv3_intercept", c.conv3_intercept},
       {"conv4_intercept", c.conv4_intercept}, {"conv_slope", c.conv_slope},
       {"conv_edge", c.conv_edge},             {"fg_intercept", c.fg_intercept},
       {"fg_slope", c.fg_slope},               {"fg_max_bucket", c.fg_max_bucket},
       {"punt_min_bucket", c.punt_min_bucket}, {"punt_base", c.punt_base},
       {"coach_go_short", c.coach_go_short},   {"coach_go", c.coach_go},
       {"coach_fg_share", c.coach_fg_share},   {"coach_fg_max_bucket", c.coach_fg_max_bucket},
       {"spread_per_edge", c.spread_per_edge},
       {"total_line", c.total_line},           {"teams", c.teams}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  const nlohmann::json defaults = WorldConfig{};
  for (const auto& [key, _] : j.items())
    if (!defaults.contains(key)) throw SchemaError("unknown world config key '" + key + "'");
  nlohmann::json merged = defaults;
  merged.update(j);
  c.plays_per_game = merged["plays_per_game"].get<int>();
  c.max_score = merged["max_score"].get<int>();
  c.big_play = merged["big_play"].get<double>();
  c.big_play_edge = merged["big_play_edge"].get<double>();
  c.advance_one = merged["advance_one"].get<double>();
  c.z_values = merged["z_values"].get<std::array<int, 3>>();
  c.z_probs = merged["z_probs"].get<std::array<double, 3>>();
  c.conv3_intercept = merged["conv3_intercept"].get<double>();
  c.conv4_intercept = merged["conv4_intercept"].get<double>();
  c.conv_slope = merged["conv_slope"].get<double>();
  c.conv_edge = merged["conv_edge"].get<double>();
  c.fg_intercept = merged["fg_intercept"].get<double>();
  c.fg_slope = merged["fg_slope"].get<double>();
  c.fg_max_bucket = merged["fg_max_bucket"].get<int>();
  c.punt_min_bucket = merged["punt_min_bucket"].get<int>();
  c.punt_base = merged["punt_base"].get<int>();
  c.coach_go_short = merged["coach_go_short"].get<double>();
  c.coach_go = merged["coach_go"].get<double>();
  c.coach_fg_share = merged["coach_fg_share"].get<double>();
  c.coach_fg_max_bucket = merged["coach_fg_max_bucket"].get<int>();
  c.spread_per_edge = merged["spread_per_edge"].get<double>();
  c.total_line = merged["total_line"].get<double>();
  c.teams = merged["teams"].get<int>();
}

namespace {

constexpr int kBuckets = 10;
constexpr int kZ = 3;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

int bucket_of(double yardline) { return std::clamp(static_cast<int>(std::floor(yardline / 10.0)), 0, kBuckets - 1); }

void check_config(const WorldConfig& c) {
  auto fail = [](const std::string& m) { throw SchemaError("world config: " + m); };
  if (c.plays_per_game < 1 || c.plays_per_game > 120) fail("plays_per_game must be in [1, 120]");
  if (c.max_score < 7) fail("max_score must be at least 7");
  if (!is_prob(c.big_play - c.big_play_edge) || !is_prob(c.big_play + c.big_play_edge))
    fail("big_play +/- big_play_edge must stay in [0, 1]");
  if (!is_prob(c.advance_one)) fail("advance_one must be a probability");
  double zsum = 0.0;
  for (int k = 0; k < kZ; ++k) {
    if (!is_prob(c.z_probs[k])) fail("z_probs must be probabilities");
    if (c.z_values[k] < 1) fail("z_values must be positive");
    zsum += c.z_probs[k];
  }
  if (std::abs(zsum - 1.0) > 1e-12) fail("z_probs must sum to 1");
  for (double p : {c.coach_go_short, c.coach_go, c.coach_fg_share})
    if (!is_prob(p)) fail("coach rates must be probabilities");
  if (c.fg_max_bucket < -1 || c.fg_max_bucket >= kBuckets) fail("fg_max_bucket out of range");
  if (c.coach_fg_max_bucket < c.fg_max_bucket || c.coach_fg_max_bucket >= kBuckets)
    fail("coach_fg_max_bucket must lie in [fg_max_bucket, 9]");
  if (c.punt_min_bucket < 0 || c.punt_min_bucket > kBuckets) fail("punt_min_bucket out of range");
  if (c.teams < 2) fail("need at least two teams");
}

}  // namespace

std::optional<double> OracleValues::value(Decision d) const {
  switch (d) {
    case Decision::go: return go;
    case Decision::field_goal: return field_goal;
    case Decision::punt: return punt;
  }
  return std::nullopt;
}

Decision OracleValues::best() const {
  Decision b = Decision::go;
  double v = go;
  for (auto d : {Decision::field_goal, Decision::punt})
    if (auto w = value(d); w && *w > v) {
      v = *w;
      b = d;
    }
  return b;
}

SyntheticWorld::SyntheticWorld(WorldConfig config) : config_(config) {
  check_config(config_);
  for (double sum : kernel_row_sums())
    if (std::abs(sum - 1.0) > 1e-12) throw SchemaError("world kernel row does not sum to 1");
  solve();
}

int SyntheticWorld::ydstogo(int bucket, int z_index) const {
  return std::min(config_.z_values[static_cast<std::size_t>(z_index)], yardline(bucket));
}

int SyntheticWorld::seconds(int steps) const { return std::max(1, steps * 3600 / config_.plays_per_game); }

std::array<double, 3> SyntheticWorld::coach_policy(int bucket, int z_index) const {
  const bool fg = bucket <= config_.coach_fg_max_bucket, punt = bucket >= config_.punt_min_bucket;
  double go = ydstogo(bucket, z_index) == 1 ? config_.coach_go_short : config_.coach_go;
  if (!fg && !punt) return {1.0, 0.0, 0.0};
  const double kick = 1.0 - go;
  if (fg && punt) return {go, kick * config_.coach_fg_share, kick * (1.0 - config_.coach_fg_share)};
  return fg ? std::array<double, 3>{go, kick, 0.0} : std::array<double, 3>{go, 0.0, kick};
}

std::vector<SyntheticWorld::Outcome> SyntheticWorld::first_down_outcomes(int edge, int bucket) const {
  std::vector<Outcome> out;
  const double big = config_.big_play + config_.big_play_edge * edge;
  if (bucket - 2 < 0) out.push_back({big, 0, 7, 0, 7, 1});
  else out.push_back({big, 1, bucket - 2, 0, 0, 1});
  for (int k : {0, 1}) {
    const double pk = (1.0 - big) * (k == 1 ? config_.advance_one : 1.0 - config_.advance_one);
    const int b = bucket - k;
    if (b < 0) {
      out.push_back({pk, 0, 7, 0, 7, 1});
      continue;
    }
    for (int z = 0; z < kZ; ++z) out.push_back({pk * config_.z_probs[static_cast<std::size_t>(z)], 3, b, z, 0, 1});
  }
  return out;
}

std::vector<SyntheticWorld::Outcome> SyntheticWorld::third_down_outcomes(int edge, int bucket, int z_index) const {
  const double p = sigmoid(config_.conv3_intercept - config_.conv_slope * std::log1p(ydstogo(bucket, z_index)) +
                           config_.conv_edge * edge);
  std::vector<Outcome> out;
  if (bucket == 0) out.push_back({p, 0, 7, 0, 7, 1});
  else out.push_back({p, 1, bucket - 1, 0, 0, 1});
  out.push_back({1.0 - p, 4, bucket, z_index, 0, 1});
  return out;
}

std::vector<SyntheticWorld::Outcome> SyntheticWorld::action_outcomes(Decision d, int edge, int bucket,
                                                                     int z_index) const {
  const int y = yardline(bucket);
  std::vector<Outcome> out;
  switch (d) {
    case Decision::go: {
      const double p = sigmoid(config_.conv4_intercept - config_.conv_slope * std::log1p(ydstogo(bucket, z_index)) +
                               config_.conv_edge * edge);
      if (bucket == 0) out.push_back({p, 0, 7, 0, 7, 0});
      else out.push_back({p, 1, bucket - 1, 0, 0, 0});
      out.push_back({1.0 - p, 0, kBuckets - 1 - bucket, 0, 0, 0});
      break;
    }
    case Decision::field_goal: {
      const double p = sigmoid(config_.fg_intercept - config_.fg_slope * y);
      out.push_back({p, 0, 7, 0, 3, 0});
      out.push_back({1.0 - p, 0, bucket_of(std::min(80.0, 93.0 - y)), 0, 0, 0});
      break;
    }
    case Decision::punt:
      out.push_back({1.0, 0, bucket_of(config_.punt_base - y), 0, 0, 0});
      break;
  }
  return out;
}

std::vector<double> SyntheticWorld::kernel_row_sums() const {
  std::vector<double> sums;
  auto total = [](const std::vector<Outcome>& os) {
    double s = 0.0;
    for (const auto& o : os) s += o.p;
    return s;
  };
  for (int e = -1; e <= 1; ++e)
    for (int b = 0; b < kBuckets; ++b) {
      sums.push_back(total(first_down_outcomes(e, b)));
      for (int z = 0; z < kZ; ++z) {
        sums.push_back(total(third_down_outcomes(e, b, z)));
        for (auto d : kDecisions) sums.push_back(total(action_outcomes(d, e, b, z)));
        const auto pol = coach_policy(b, z);
        sums.push_back(pol[0] + pol[1] + pol[2]);
      }
    }
  return sums;
}

std::size_t SyntheticWorld::index(int edge, int bucket, int z_index, int score, int steps) const {
  const int S = 2 * config_.max_score + 1, T = config_.plays_per_game + 1;
  return ((((static_cast<std::size_t>(edge + 1) * kBuckets + bucket) * kZ + z_index) * S +
           (score + config_.max_score)) *
              T +
          steps);
}

double SyntheticWorld::terminal(int score) const { return score > 0 ? 1.0 : score < 0 ? 0.0 : 0.5; }

double SyntheticWorld::v1(int edge, int bucket, int score, int steps) const {
  return v1_[index(edge, bucket, 0, score, steps)];
}

double SyntheticWorld::outcome_value(const Outcome& o, int edge, int score, int steps) const {
  const int t = steps - o.dsteps;
  const int s = std::clamp(score + o.points, -config_.max_score, config_.max_score);
  switch (o.down) {
    case 0: return 1.0 - v1(-edge, o.bucket, -s, t);
    case 1: return v1(edge, o.bucket, s, t);
    case 3: return v3_[index(edge, o.bucket, o.z_index, s, t)];
    case 4: return v4_[index(edge, o.bucket, o.z_index, s, t)];
  }
  return 0.0;
}

void SyntheticWorld::solve() {
  const std::size_t n = index(1, kBuckets - 1, kZ - 1, config_.max_score, config_.plays_per_game) + 1;
  v1_.assign(n, 0.0);
  v3_.assign(n, 0.0);
  v4_.assign(n, 0.0);
  const int S = config_.max_score;
  for (int t = 0; t <= config_.plays_per_game; ++t) {
    for (int e = -1; e <= 1; ++e)
      for (int b = 0; b < kBuckets; ++b) {
        const auto outs = first_down_outcomes(e, b);
        for (int s = -S; s <= S; ++s) {
          double v = terminal(s);
          if (t > 0) {
            v = 0.0;
            for (const auto& o : outs) v += o.p * outcome_value(o, e, s, t);
          }
          v1_[index(e, b, 0, s, t)] = v;
        }
        for (int z = 0; z < kZ; ++z) {
          const auto outs3 = third_down_outcomes(e, b, z);
          for (int s = -S; s <= S; ++s) {
            double v = terminal(s);
            if (t > 0) {
              v = 0.0;
              for (const auto& o : outs3) v += o.p * outcome_value(o, e, s, t);
            }
            v3_[index(e, b, z, s, t)] = v;
          }
        }
      }
    // fourth downs use no steps, so they read first-down values at the same t
    for (int e = -1; e <= 1; ++e)
      for (int b = 0; b < kBuckets; ++b)
        for (int z = 0; z < kZ; ++z) {
          const auto pol = coach_policy(b, z);
          for (int s = -S; s <= S; ++s) {
            double v = 0.0;
            for (int a = 0; a < 3; ++a) {
              if (pol[static_cast<std::size_t>(a)] == 0.0) continue;
              double q = 0.0;
              for (const auto& o : action_outcomes(kDecisions[a], e, b, z)) q += o.p * outcome_value(o, e, s, t);
              v += pol[static_cast<std::size_t>(a)] * q;
            }
            v4_[index(e, b, z, s, t)] = v;
          }
        }
  }
}

namespace {

void check_state(const WorldConfig& c, const OracleState& s) {
  if (s.edge < -1 || s.edge > 1) throw InvalidInput("oracle edge must be in {-1, 0, 1}");
  if (s.bucket < 0 || s.bucket >= kBuckets) throw InvalidInput("oracle bucket must be in [0, 9]");
  if (s.z_index < 0 || s.z_index >= kZ) throw InvalidInput("oracle z index must be in [0, 2]");
  if (s.steps < 0 || s.steps > c.plays_per_game) throw InvalidInput("oracle steps out of range");
  if (s.down != 1 && s.down != 3 && s.down != 4) throw InvalidInput("oracle down must be 1, 3 or 4");
}

}  // namespace

double SyntheticWorld::true_wp(const OracleState& st) const {
  check_state(config_, st);
  const int s = std::clamp(st.score, -config_.max_score, config_.max_score);
  switch (st.down) {
    case 1: return v1(st.edge, st.bucket, s, st.steps);
    case 3: return v3_[index(st.edge, st.bucket, st.z_index, s, st.steps)];
    default: return v4_[index(st.edge, st.bucket, st.z_index, s, st.steps)];
  }
}

double SyntheticWorld::action_value(const OracleState& st, Decision d) const {
  check_state(config_, st);
  const int s = std::clamp(st.score, -config_.max_score, config_.max_score);
  double v = 0.0;
  for (const auto& o : action_outcomes(d, st.edge, st.bucket, st.z_index)) v += o.p * outcome_value(o, st.edge, s, st.steps);
  return v;
}

OracleValues SyntheticWorld::fourth_down_values(const OracleState& st) const {
  OracleValues out;
  out.go = action_value(st, Decision::go);
  if (st.bucket <= config_.fg_max_bucket) out.field_goal = action_value(st, Decision::field_goal);
  if (st.bucket >= config_.punt_min_bucket) out.punt = action_value(st, Decision::punt);
  return out;
}

double SyntheticWorld::pregame_wp(int edge) const {
  const int T = config_.plays_per_game;
  return 0.5 * v1(edge, 7, 0, T) + 0.5 * (1.0 - v1(-edge, 7, 0, T));
}

WpInput SyntheticWorld::wp_input(const OracleState& s, int total_score) const {
  WpInput in;
  in.score_differential = s.score;
  in.game_seconds_remaining = seconds(s.steps);
  in.posteam_spread = spread(s.edge);
  in.yardline = yardline(s.bucket);
  in.receive_2h_ko = 0;
  in.posteam_timeouts = 3;
  in.defteam_timeouts = 3;
  in.total_score = total_score;
  in.down = s.down;
  in.ydstogo = s.down == 1 ? std::min(10, yardline(s.bucket)) : ydstogo(s.bucket, s.z_index);
  in.home = 0;
  return in;
}

FourthDownState SyntheticWorld::engine_state(const OracleState& s, int total_score, const Standardizer& tq_scale) const {
  FourthDownState st;
  st.yardline = yardline(s.bucket);
  st.ydstogo = ydstogo(s.bucket, s.z_index);
  st.game_seconds_remaining = seconds(s.steps);
  st.score_differential = s.score;
  st.total_score = total_score;
  st.posteam_spread = spread(s.edge);
  st.total_points_line = config_.total_line;
  const auto tq = team_quality(st.posteam_spread, st.total_points_line, tq_scale);
  st.delta_tq_off = tq.delta_tq_off;
  st.delta_tq_def = tq.delta_tq_def;
  return st;
}

namespace {

template <class Outcomes>
std::size_t draw(Rng& rng, const Outcomes& outs) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < outs.size(); ++k) {
    acc += outs[k].p;
    if (u < acc) return k;
  }
  return outs.size() - 1;
}

std::string padded(const char* prefix, int v, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, v);
  return buf;
}

}  // namespace

struct WorldSimulator {
  const SyntheticWorld& w;

  void game(int g, Rng& rng, SimulatedHistory& out) const {
    const auto& c = w.config_;
    const int team_a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(c.teams)));
    int team_b = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(c.teams - 1)));
    if (team_b >= team_a) ++team_b;
    const int edge_a = static_cast<int>(uniform_index(rng, 3)) - 1;
    const std::string game_id = padded("g", g, 5);
    const int season = 2006 + g % 16;

    int pos = uniform01(rng) < 0.5 ? 0 : 1;  // 0 = team A
    int margin_a = 0, total = 0, steps = c.plays_per_game, bucket = 7, z = 0, down = 1;
    int drive = 0, play_index = 0;
    const std::size_t first = out.plays.size();
    std::vector<int> possessor;

    for (;;) {
      if (down != 4 && steps == 0) break;
      const int edge = pos == 0 ? edge_a : -edge_a;
      const int margin = pos == 0 ? margin_a : -margin_a;
      const int team = pos == 0 ? team_a : team_b;

      PlayRecord p;
      p.game_id = game_id;
      p.drive_id = game_id + padded("_d", drive, 3);
      p.play_index = play_index++;
      p.season = season;
      p.game_seconds_remaining = w.seconds(steps);
      p.score_differential = margin;
      p.total_score = total;
      p.posteam_spread = w.spread(edge);
      p.total_points_line = c.total_line;
      p.yardline = w.yardline(bucket);
      p.down = down;
      p.ydstogo = down == 1 ? std::min(10, p.yardline) : w.ydstogo(bucket, z);
      p.home = pos == 0 ? 1 : 0;
      p.posteam_coach = padded("coach_", team, 2);
      p.kicker_id = padded("K", team, 2);
      p.punter_id = padded("P", team, 2);
      OracleState st{edge, bucket, down == 1 ? 0 : z, margin, steps, down};

      std::vector<SyntheticWorld::Outcome> outs;
      if (down == 1) {
        outs = w.first_down_outcomes(edge, bucket);
        p.play_type = PlayType::other;
      } else if (down == 3) {
        outs = w.third_down_outcomes(edge, bucket, z);
        p.play_type = PlayType::go;
      } else {
        const auto pol = w.coach_policy(bucket, z);
        const double u = uniform01(rng);
        const Decision d = u < pol[0] ? Decision::go : u < pol[0] + pol[1] ? Decision::field_goal : Decision::punt;
        outs = w.action_outcomes(d, edge, bucket, z);
        p.play_type = d == Decision::go ? PlayType::go : d == Decision::field_goal ? PlayType::field_goal : PlayType::punt;
      }
      const auto& o = outs[draw(rng, outs)];
      if (p.play_type == PlayType::go) p.yards_gained = (o.down == 1 || o.points == 7) ? 10 : 0;
      if (p.play_type == PlayType::field_goal) p.fg_made = o.points == 3 ? 1 : 0;
      if (p.play_type == PlayType::punt) p.next_yardline_after_punt = c.punt_base - p.yardline;
      out.plays.push_back(std::move(p));
      out.states.push_back(st);
      possessor.push_back(pos);

      steps -= o.dsteps;
      total += o.points;
      const int new_margin = std::clamp(margin + o.points, -c.max_score, c.max_score);
      margin_a = pos == 0 ? new_margin : -new_margin;
      bucket = o.bucket;
      z = o.z_index;
      if (o.down == 0) {
        pos ^= 1;
        ++drive;
        down = 1;
      } else {
        down = o.down;
      }
    }
    int a_wins = margin_a > 0 ? 1 : margin_a < 0 ? 0 : (uniform01(rng) < 0.5 ? 1 : 0);
    for (std::size_t k = first; k < out.plays.size(); ++k)
      out.plays[k].win_loss = possessor[k - first] == 0 ? a_wins : 1 - a_wins;
  }
};

SimulatedHistory simulate_history(const SyntheticWorld& world, int n_games, std::uint64_t seed) {
  if (n_games < 1) throw InvalidInput("n_games must be at least 1");
  SimulatedHistory h;
  WorldSimulator sim{world};
  for (int g = 0; g < n_games; ++g) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(g)));
    sim.game(g, rng, h);
  }
  return h;
}

}  // namespace fourthdown
