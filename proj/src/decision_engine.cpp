#include "fourthdown/decision_engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fourthdown/common.hpp"

namespace fourthdown {

std::vector<FieldError> validation_errors(const FourthDownState& s) {
  std::vector<FieldError> errors;
  auto bad = [&](std::string field, std::string msg) { errors.push_back({std::move(field), std::move(msg)}); };
  if (s.yardline < 1 || s.yardline > 99) bad("yardline", "yardline must be in [1, 99]");
  if (s.ydstogo < 1) bad("ydstogo", "ydstogo must be at least 1");
  else if (s.ydstogo > s.yardline && s.yardline >= 1) bad("ydstogo", "ydstogo exceeds yardline");
  if (s.game_seconds_remaining < 1 || s.game_seconds_remaining > 3600)
    bad("game_seconds_remaining", "game_seconds_remaining must be in [1, 3600]");
  if (s.posteam_timeouts < 0 || s.posteam_timeouts > 3) bad("posteam_timeouts", "timeouts must be in {0..3}");
  if (s.defteam_timeouts < 0 || s.defteam_timeouts > 3) bad("defteam_timeouts", "timeouts must be in {0..3}");
  if (s.receive_2h_ko != 0 && s.receive_2h_ko != 1) bad("receive_2h_ko", "receive_2h_ko must be 0 or 1");
  if (s.home != 0 && s.home != 1) bad("home", "home must be 0 or 1");
  if (s.total_score < 0) bad("total_score", "total_score must be non-negative");
  const std::pair<const char*, double> reals[] = {{"posteam_spread", s.posteam_spread},
                                                  {"total_points_line", s.total_points_line},
                                                  {"kq", s.kq},
                                                  {"pq", s.pq},
                                                  {"delta_tq_off", s.delta_tq_off},
                                                  {"delta_tq_def", s.delta_tq_def},
                                                  {"opp_kq", s.opp_kq},
                                                  {"opp_pq", s.opp_pq}};
  for (const auto& [name, v] : reals)
    if (!std::isfinite(v)) bad(name, std::string(name) + " must be a finite number");
  return errors;
}

void validate(const FourthDownState& s) {
  const auto errors = validation_errors(s);
  if (errors.empty()) return;
  std::string msg;
  for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e.message;
  throw InvalidInput(msg);
}

FourthDownState flip(const FourthDownState& s) {
  FourthDownState f = s;
  f.score_differential = -s.score_differential;
  f.posteam_spread = -s.posteam_spread;
  f.posteam_timeouts = s.defteam_timeouts;
  f.defteam_timeouts = s.posteam_timeouts;
  f.receive_2h_ko = 1 - s.receive_2h_ko;
  f.home = 1 - s.home;
  f.delta_tq_off = s.delta_tq_def;
  f.delta_tq_def = s.delta_tq_off;
  f.kq = s.opp_kq;
  f.opp_kq = s.kq;
  f.pq = s.opp_pq;
  f.opp_pq = s.pq;
  return f;
}

namespace {

double clamp_yardline(double y) { return std::clamp(y, 1.0, 99.0); }

}  // namespace

FourthDownState opponent_first_down(const FourthDownState& s, int points, double next_yardline) {
  FourthDownState scored = s;
  scored.score_differential += points;
  scored.total_score += points;
  FourthDownState f = flip(scored);
  const double y = clamp_yardline(next_yardline);
  f.yardline = static_cast<int>(std::lround(y));
  f.ydstogo = std::min(10, f.yardline);
  return f;
}

WpInput first_down_input(const FourthDownState& s, double yardline) {
  WpInput in;
  in.score_differential = s.score_differential;
  in.game_seconds_remaining = s.game_seconds_remaining;
  in.posteam_spread = s.posteam_spread;
  in.yardline = clamp_yardline(yardline);
  in.receive_2h_ko = s.receive_2h_ko;
  in.posteam_timeouts = s.posteam_timeouts;
  in.defteam_timeouts = s.defteam_timeouts;
  in.total_score = s.total_score;
  in.down = 1;
  in.ydstogo = std::min(10.0, in.yardline);
  in.home = s.home;
  return in;
}

TransitionFunctions transition_functions(const TransitionBundle& b) {
  return {[&b](double y, double pq) { return b.expected_punt_yardline(y, pq); },
          [&b](double y, double kq) { return b.p_make(y, kq); },
          [&b](double z, double d, double tq) { return b.p_convert(z, d, tq); },
          [&b](double z, double d, double y, double tq) { return b.expected_gain_success(z, d, y, tq); },
          [&b](double z, double d, double tq) { return b.expected_gain_failure(z, d, tq); }};
}

std::string_view to_string(Decision d) {
  switch (d) {
    case Decision::go: return "Go";
    case Decision::field_goal: return "FG";
    case Decision::punt: return "Punt";
  }
  return "";
}

Decision decision_from(std::string_view name) {
  for (auto d : kDecisions)
    if (to_string(d) == name) return d;
  throw InvalidInput("unknown decision " + std::string(name));
}

double fg_miss_yardline(double yardline) { return std::min(80.0, 100.0 - (yardline + 7.0)); }

// WP of the offense after the opponent takes over at `next_yardline`.
static double after_turnover(const FourthDownState& s, int points, double next_yardline, const WpFunction& wp1) {
  const auto opp = opponent_first_down(s, points, next_yardline);
  return 1.0 - wp1(first_down_input(opp, clamp_yardline(next_yardline)));
}

GoBranches wp_go(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1) {
  GoBranches g;
  const double y = s.yardline, z = s.ydstogo;
  g.p_convert = t.p_convert(z, 4, s.delta_tq_off);
  g.gain_success = std::max(t.gain_success(z, 4, y, s.delta_tq_off), z);
  g.gain_failure = std::min(t.gain_failure(z, 4, s.delta_tq_off), z - 1.0);
  const double advanced = y - g.gain_success;
  g.touchdown = advanced < 1.0;
  if (g.touchdown) {
    g.success_yardline = 0.0;
    g.wp_success = after_turnover(s, 7, 75.0, wp1);
  } else {
    g.success_yardline = clamp_yardline(advanced);
    g.wp_success = wp1(first_down_input(s, g.success_yardline));
  }
  g.failure_yardline = clamp_yardline(100.0 - (y - g.gain_failure));
  g.wp_failure = after_turnover(s, 0, g.failure_yardline, wp1);
  g.wp = g.p_convert * g.wp_success + (1.0 - g.p_convert) * g.wp_failure;
  return g;
}

FgBranches wp_fg(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1) {
  FgBranches f;
  f.p_make = t.p_make(s.yardline, s.kq);
  f.miss_yardline = clamp_yardline(fg_miss_yardline(s.yardline));
  f.wp_make = after_turnover(s, 3, 75.0, wp1);
  f.wp_miss = after_turnover(s, 0, f.miss_yardline, wp1);
  f.wp = f.p_make * f.wp_make + (1.0 - f.p_make) * f.wp_miss;
  return f;
}

PuntBranch wp_punt(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1) {
  PuntBranch p;
  p.next_yardline = clamp_yardline(t.expected_punt_yardline(s.yardline, s.pq));
  p.wp = after_turnover(s, 0, p.next_yardline, wp1);
  return p;
}

std::optional<double> DecisionValues::wp(Decision d) const {
  switch (d) {
    case Decision::go: return go.wp;
    case Decision::field_goal: return fg ? std::optional<double>(fg->wp) : std::nullopt;
    case Decision::punt: return punt ? std::optional<double>(punt->wp) : std::nullopt;
  }
  return std::nullopt;
}

std::optional<double> signed_gain(const DecisionValues& v, Decision d) {
  const auto own = v.wp(d);
  if (!own) return std::nullopt;
  std::optional<double> other;
  for (auto a : kDecisions) {
    if (a == d) continue;
    if (auto w = v.wp(a)) other = other ? std::max(*other, *w) : *w;
  }
  if (!other) return std::nullopt;
  return *own - *other;
}

void rank_decisions(DecisionValues& v) {
  v.best = Decision::go;
  double best = v.go.wp;
  for (auto d : {Decision::field_goal, Decision::punt})
    if (auto w = v.wp(d); w && *w > best) {
      best = *w;
      v.best = d;
    }
  v.effect_size = signed_gain(v, v.best);
}

DecisionValues evaluate(const FourthDownState& s, const TransitionFunctions& t, const WpFunction& wp1,
                        const Availability& availability) {
  validate(s);
  DecisionValues v;
  v.go = wp_go(s, t, wp1);
  if (availability.field_goal(s.yardline)) v.fg = wp_fg(s, t, wp1);
  if (availability.punt(s.yardline)) v.punt = wp_punt(s, t, wp1);
  rank_decisions(v);
  return v;
}

DecisionValues DecisionModel::evaluate(const FourthDownState& s) const {
  const WpFunction wp1 = [this](const WpInput& in) { return wp.predict(in); };
  return fourthdown::evaluate(s, transition_functions(transitions), wp1, availability);
}

TeamQuality DecisionModel::team_quality(double spread, double total_line) const {
  return fourthdown::team_quality(spread, total_line, tq_scale);
}

void to_json(nlohmann::json& j, const DecisionModel& m) {
  j = {{"format_version", 1},
       {"wp", m.wp},
       {"transitions", m.transitions},
       {"tq_scale", m.tq_scale},
       {"kicker_quality", m.kicker_quality},
       {"punter_quality", m.punter_quality},
       {"availability", {{"punt_above", m.availability.punt_above}, {"fg_at_most", m.availability.fg_at_most}}}};
}

void from_json(const nlohmann::json& j, DecisionModel& m) {
  if (j.at("format_version").get<int>() != 1) throw SchemaError("unsupported decision model version");
  m.wp = j.at("wp").get<WpModel>();
  m.transitions = j.at("transitions").get<TransitionBundle>();
  m.tq_scale = j.at("tq_scale").get<Standardizer>();
  m.kicker_quality = j.at("kicker_quality").get<std::map<std::string, double>>();
  m.punter_quality = j.at("punter_quality").get<std::map<std::string, double>>();
  m.availability.punt_above = j.at("availability").at("punt_above").get<int>();
  m.availability.fg_at_most = j.at("availability").at("fg_at_most").get<int>();
}

FourthDownState state_from_play(const PlayRecord& p, const QualityTables& q, std::size_t index) {
  FourthDownState s;
  s.yardline = p.yardline;
  s.ydstogo = p.ydstogo;
  s.game_seconds_remaining = p.game_seconds_remaining;
  s.score_differential = p.score_differential;
  s.total_score = p.total_score;
  s.posteam_spread = p.posteam_spread;
  s.total_points_line = p.total_points_line;
  s.posteam_timeouts = p.posteam_timeouts;
  s.defteam_timeouts = p.defteam_timeouts;
  s.receive_2h_ko = p.receive_2h_ko;
  s.home = p.home;
  s.kq = q.kq.at(index);
  s.pq = q.pq.at(index);
  s.delta_tq_off = q.delta_tq_off.at(index);
  s.delta_tq_def = q.delta_tq_def.at(index);
  return s;
}

DecisionModel fit_decision_model(std::span<const PlayRecord> plays, const TrainingPools& pools,
                                 const QualityTables& quality, std::span<const double> weights,
                                 const DecisionConfig& config) {
  DecisionModel m;
  std::vector<std::size_t> rows(plays.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  m.wp = fit_wp(config.feature_set, plays, rows, weights, config.wp_params);
  m.transitions = fit_transitions(plays, pools, quality, weights, config.transitions);
  m.tq_scale = quality.tq_scale;
  for (const auto& [id, _] : quality.kickers) m.kicker_quality[id] = quality.kicker_quality(id);
  for (const auto& [id, _] : quality.punters) m.punter_quality[id] = quality.punter_quality(id);
  m.availability = config.availability;
  return m;
}

GridCell point_cell(const DecisionModel& m, const FourthDownState& s) {
  const auto v = m.evaluate(s);
  GridCell c;
  c.yardline = s.yardline;
  c.ydstogo = s.ydstogo;
  c.feasible = true;
  c.best = v.best;
  c.effect_size = v.effect_size;
  return c;
}

std::vector<GridCell> boundary_grid(const FourthDownState& tmpl, IntRange y, IntRange z, const CellEvaluator& eval,
                                    bool parallel) {
  if (y.hi < y.lo || z.hi < z.lo) throw InvalidInput("empty grid range");
  if (y.lo < 1 || y.hi > 99) throw InvalidInput("yardline range must lie in [1, 99]");
  if (z.lo < 1) throw InvalidInput("ydstogo range must start at 1 or above");
  const int ny = y.hi - y.lo + 1, nz = z.hi - z.lo + 1;
  std::vector<GridCell> cells(static_cast<std::size_t>(ny) * nz);
  const long total = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
  for (long k = 0; k < total; ++k) {
    const int yy = y.lo + static_cast<int>(k / nz), zz = z.lo + static_cast<int>(k % nz);
    GridCell& c = cells[static_cast<std::size_t>(k)];
    if (zz > yy) {
      c.yardline = yy;
      c.ydstogo = zz;
      continue;
    }
    FourthDownState s = tmpl;
    s.yardline = yy;
    s.ydstogo = zz;
    c = eval(s);
    c.yardline = yy;
    c.ydstogo = zz;
    c.feasible = true;
  }
  return cells;
}

void write_grid(std::ostream& out, std::span<const GridCell> cells) {
  out << "y,z,best,effect_size,boot_pct\n";
  out << std::setprecision(10);
  for (const auto& c : cells) {
    out << c.yardline << ',' << c.ydstogo << ',';
    if (c.feasible) {
      out << to_string(c.best) << ',';
      if (c.effect_size) out << *c.effect_size;
      out << ',';
      if (c.boot_pct) out << *c.boot_pct;
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

std::vector<DecisionValues> evaluate_states_serial(const DecisionModel& m, std::span<const FourthDownState> states) {
  std::vector<DecisionValues> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(m.evaluate(s));
  return out;
}

std::vector<DecisionValues> evaluate_states_parallel(const DecisionModel& m,
                                                     std::span<const FourthDownState> states) {
  std::vector<DecisionValues> out(states.size());
  const long n = static_cast<long>(states.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = m.evaluate(states[static_cast<std::size_t>(i)]);
  return out;
}

void write_decision_table(std::ostream& out, const DecisionValues& v) {
  auto pct = [](double p) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * p << '%';
    return os.str();
  };
  out << std::left << std::setw(10) << "decision" << std::setw(10) << "wp" << std::setw(12) << "success_p"
      << std::setw(14) << "wp_if_success" << "wp_if_fail\n";
  out << std::setw(10) << "Go" << std::setw(10) << pct(v.go.wp) << std::setw(12) << pct(v.go.p_convert)
      << std::setw(14) << pct(v.go.wp_success) << pct(v.go.wp_failure) << '\n';
  if (v.fg)
    out << std::setw(10) << "FG" << std::setw(10) << pct(v.fg->wp) << std::setw(12) << pct(v.fg->p_make)
        << std::setw(14) << pct(v.fg->wp_make) << pct(v.fg->wp_miss) << '\n';
  if (v.punt) out << std::setw(10) << "Punt" << pct(v.punt->wp) << '\n';
  out << "best: " << to_string(v.best);
  if (v.effect_size) out << " (+" << pct(*v.effect_size) << ')';
  out << '\n' << std::right;
}

}  // namespace fourthdown
