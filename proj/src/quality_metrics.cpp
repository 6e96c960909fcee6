#include "fourthdown/quality_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "fourthdown/common.hpp"
#include "fourthdown/csv.hpp"
#include "fourthdown/spline_glm.hpp"

namespace fourthdown {

namespace {

Eigen::RowVector4d cubic_row(double yardline) {
  const double u = yardline / 100.0;
  return {1.0, u, u * u, u * u * u};
}

}  // namespace

double BaselineFg::predict(double yardline) const {
  const double eta = cubic_row(yardline).dot(coefficients);
  return 1.0 / (1.0 + std::exp(-eta));
}

double BaselinePunt::predict(double yardline) const { return cubic_row(yardline).dot(coefficients); }

BaselineFg fit_baseline_fg(std::span<const PlayRecord> plays, std::span<const std::size_t> fg_pool) {
  if (fg_pool.empty()) throw FitError("baseline FG model: empty field goal pool");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(fg_pool.size()), 4);
  Eigen::VectorXd y(X.rows());
  for (std::size_t k = 0; k < fg_pool.size(); ++k) {
    const auto& p = plays[fg_pool[k]];
    X.row(static_cast<Eigen::Index>(k)) = cubic_row(p.yardline);
    y[static_cast<Eigen::Index>(k)] = p.fg_made.value_or(0) ? 1.0 : 0.0;
  }
  try {
    BaselineFg out;
    out.coefficients = fit_logistic(X, y).coefficients;
    return out;
  } catch (const FitError& e) {
    throw FitError(std::string("baseline FG model: ") + e.what());
  }
}

BaselinePunt fit_baseline_punt(std::span<const PlayRecord> plays, std::span<const std::size_t> punt_pool) {
  if (punt_pool.empty()) throw FitError("baseline punt model: empty punt pool");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(punt_pool.size()), 4);
  Eigen::VectorXd y(X.rows());
  for (std::size_t k = 0; k < punt_pool.size(); ++k) {
    const auto& p = plays[punt_pool[k]];
    X.row(static_cast<Eigen::Index>(k)) = cubic_row(p.yardline);
    y[static_cast<Eigen::Index>(k)] = p.next_yardline_after_punt.value_or(0);
  }
  BaselinePunt out;
  out.coefficients = fit_ols(X, y).coefficients;
  return out;
}

double fgpa(bool made, double yardline, const BaselineFg& baseline) {
  return (made ? 1.0 : 0.0) - baseline.predict(yardline);
}

double pyoe(double next_yardline, double yardline, const BaselinePunt& baseline) {
  return next_yardline - baseline.predict(yardline);
}

std::vector<double> rolling_quality(std::span<const double> residuals, QualityParams params) {
  if (!(params.gamma >= 0.0)) throw InvalidInput("gamma must be non-negative");
  if (!(params.alpha > 0.0 && params.alpha <= 1.0)) throw InvalidInput("alpha must lie in (0, 1]");
  std::vector<double> out(residuals.size(), 0.0);
  double num = 0.0, mass = 0.0;
  for (std::size_t n = 0; n < residuals.size(); ++n) {
    out[n] = n == 0 ? 0.0 : num / (params.gamma + mass);
    num = params.alpha * num + residuals[n];
    mass = params.alpha * mass + 1.0;
  }
  return out;
}

Standardizer Standardizer::fit(std::span<const double> values) {
  Standardizer s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / n);
  if (!(s.sd > 1e-12)) s.sd = 1.0;
  return s;
}

TeamQuality team_quality_raw(double spread, double total_line) {
  return {(total_line - spread) / 2.0, (total_line + spread) / 2.0};
}

TeamQuality team_quality(double spread, double total_line, const Standardizer& standardizer) {
  const auto raw = team_quality_raw(spread, total_line);
  return {standardizer.apply(raw.delta_tq_off), standardizer.apply(raw.delta_tq_def)};
}

namespace {

double current_quality(const std::map<std::string, PlayerTrajectory>& players, const std::string& id,
                       const Standardizer& scale) {
  auto it = players.find(id);
  if (it == players.end()) return 0.0;
  return scale.apply(it->second.raw.back());
}

// Quality trajectories for one specialist type. `residual(i)` is the residual of attempt play i.
template <class IdOf, class Residual>
std::map<std::string, PlayerTrajectory> trajectories(std::span<const PlayRecord> plays,
                                                     const std::vector<std::size_t>& chrono,
                                                     std::span<const std::size_t> attempts, IdOf id_of,
                                                     Residual residual, QualityParams params) {
  std::vector<char> is_attempt(plays.size(), 0);
  for (auto i : attempts) is_attempt[i] = 1;
  std::map<std::string, PlayerTrajectory> out;
  std::map<std::string, std::vector<double>> resid;
  for (auto i : chrono) {
    if (!is_attempt[i]) continue;
    const auto& id = id_of(plays[i]);
    if (!id) continue;
    out[*id].attempts.push_back(i);
    resid[*id].push_back(residual(i));
  }
  for (auto& [id, traj] : out) {
    auto& r = resid[id];
    traj.raw = rolling_quality(r, params);
    // quality after the final attempt
    double num = 0.0, mass = 0.0;
    for (double v : r) {
      num = params.alpha * num + v;
      mass = params.alpha * mass + 1.0;
    }
    traj.raw.push_back(num / (params.gamma + mass));
  }
  return out;
}

// Raw quality in effect at each play: before the first attempt not earlier than the play.
template <class IdOf>
std::vector<double> per_play_raw(std::span<const PlayRecord> plays, const std::vector<std::size_t>& rank,
                                 const std::map<std::string, PlayerTrajectory>& players, IdOf id_of,
                                 std::vector<char>& known) {
  std::vector<double> out(plays.size(), 0.0);
  known.assign(plays.size(), 0);
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& id = id_of(plays[i]);
    if (!id) continue;
    auto it = players.find(*id);
    if (it == players.end()) continue;
    const auto& att = it->second.attempts;
    const auto k = std::partition_point(att.begin(), att.end(), [&](std::size_t a) { return rank[a] < rank[i]; }) -
                   att.begin();
    out[i] = it->second.raw[static_cast<std::size_t>(k)];
    known[i] = 1;
  }
  return out;
}

}  // namespace

double QualityTables::kicker_quality(const std::string& id) const { return current_quality(kickers, id, kq_scale); }

double QualityTables::punter_quality(const std::string& id) const { return current_quality(punters, id, pq_scale); }

QualityTables compute_quality(std::span<const PlayRecord> plays, const TrainingPools& pools,
                              const QualityOptions& options) {
  QualityTables t;
  std::vector<std::size_t> chrono(plays.size());
  std::iota(chrono.begin(), chrono.end(), std::size_t{0});
  std::stable_sort(chrono.begin(), chrono.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(plays[a].season, plays[a].game_id, plays[a].play_index) <
           std::tie(plays[b].season, plays[b].game_id, plays[b].play_index);
  });
  std::vector<std::size_t> rank(plays.size());
  for (std::size_t r = 0; r < chrono.size(); ++r) rank[chrono[r]] = r;

  t.fg_baseline = fit_baseline_fg(plays, pools.field_goal);
  t.punt_baseline = fit_baseline_punt(plays, pools.punt);

  auto kicker_of = [](const PlayRecord& p) -> const std::optional<std::string>& { return p.kicker_id; };
  auto punter_of = [](const PlayRecord& p) -> const std::optional<std::string>& { return p.punter_id; };
  t.kickers = trajectories(
      plays, chrono, pools.field_goal, kicker_of,
      [&](std::size_t i) { return fgpa(plays[i].fg_made.value_or(0) != 0, plays[i].yardline, t.fg_baseline); },
      options.kicker);
  t.punters = trajectories(
      plays, chrono, pools.punt, punter_of,
      [&](std::size_t i) {
        return pyoe(*plays[i].next_yardline_after_punt, plays[i].yardline, t.punt_baseline);
      },
      options.punter);

  std::vector<char> kq_known, pq_known;
  const auto kq_raw = per_play_raw(plays, rank, t.kickers, kicker_of, kq_known);
  const auto pq_raw = per_play_raw(plays, rank, t.punters, punter_of, pq_known);

  std::vector<char> in_population(plays.size(), options.standardize_rows.empty() ? 1 : 0);
  for (auto i : options.standardize_rows) in_population[i] = 1;
  std::vector<double> kq_fit, pq_fit, tq_fit;
  for (auto i : pools.field_goal)
    if (in_population[i] && kq_known[i]) kq_fit.push_back(kq_raw[i]);
  for (auto i : pools.punt)
    if (in_population[i] && pq_known[i]) pq_fit.push_back(pq_raw[i]);
  for (std::size_t i = 0; i < plays.size(); ++i) {
    if (!in_population[i]) continue;
    const auto raw = team_quality_raw(plays[i].posteam_spread, plays[i].total_points_line);
    tq_fit.push_back(raw.delta_tq_off);
    tq_fit.push_back(raw.delta_tq_def);
  }
  t.kq_scale = Standardizer::fit(kq_fit);
  t.pq_scale = Standardizer::fit(pq_fit);
  t.tq_scale = Standardizer::fit(tq_fit);

  t.kq.assign(plays.size(), 0.0);
  t.pq.assign(plays.size(), 0.0);
  t.delta_tq_off.resize(plays.size());
  t.delta_tq_def.resize(plays.size());
  for (std::size_t i = 0; i < plays.size(); ++i) {
    if (kq_known[i]) t.kq[i] = t.kq_scale.apply(kq_raw[i]);
    if (pq_known[i]) t.pq[i] = t.pq_scale.apply(pq_raw[i]);
    const auto tq = team_quality(plays[i].posteam_spread, plays[i].total_points_line, t.tq_scale);
    t.delta_tq_off[i] = tq.delta_tq_off;
    t.delta_tq_def[i] = tq.delta_tq_def;
  }
  return t;
}

void write_quality_table(std::ostream& out, const std::map<std::string, PlayerTrajectory>& players,
                         const Standardizer& scale) {
  out << "player_id,attempt_index,quality\n";
  for (const auto& [id, traj] : players)
    for (std::size_t k = 0; k < traj.attempts.size(); ++k)
      out << csv::escape(id) << ',' << k << ',' << csv::format_double(scale.apply(traj.raw[k])) << '\n';
}

void to_json(nlohmann::json& j, const Standardizer& s) { j = {{"mean", s.mean}, {"sd", s.sd}}; }

void from_json(const nlohmann::json& j, Standardizer& s) {
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
}

}  // namespace fourthdown
