#pragma once

#include <Eigen/Dense>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fourthdown/data_ingest.hpp"
#include "json.hpp"

namespace fourthdown {

struct QualityParams {
  double gamma = 96.0;  // pseudo-count of zero-residual attempts
  double alpha = 0.985;
};

inline constexpr QualityParams kKickerQuality{96.0, 0.985};
inline constexpr QualityParams kPunterQuality{150.0, 0.99};

/// Kicker-agnostic make probability: logistic, cubic in yardline.
struct BaselineFg {
  Eigen::Vector4d coefficients = Eigen::Vector4d::Zero();
  double predict(double yardline) const;
};

/// Punter-agnostic expected next yardline: OLS, cubic in yardline.
struct BaselinePunt {
  Eigen::Vector4d coefficients = Eigen::Vector4d::Zero();
  double predict(double yardline) const;
};

/// Throws FitError on an empty or single-outcome pool.
BaselineFg fit_baseline_fg(std::span<const PlayRecord> plays, std::span<const std::size_t> fg_pool);
BaselinePunt fit_baseline_punt(std::span<const PlayRecord> plays, std::span<const std::size_t> punt_pool);

double fgpa(bool made, double yardline, const BaselineFg& baseline);
double pyoe(double next_yardline, double yardline, const BaselinePunt& baseline);

/// Quality before each attempt: out[0] = 0, out[n] uses residuals[0..n-1].
std::vector<double> rolling_quality(std::span<const double> residuals, QualityParams params);

struct Standardizer {
  double mean = 0.0;
  double sd = 1.0;

  /// Population sd; a constant sample only centres.
  static Standardizer fit(std::span<const double> values);
  double apply(double x) const { return (x - mean) / sd; }
};

struct TeamQuality {
  double delta_tq_off = 0.0;  // possession offense vs. opposing defense
  double delta_tq_def = 0.0;  // opposing offense vs. possession defense
};

TeamQuality team_quality_raw(double spread, double total_line);
TeamQuality team_quality(double spread, double total_line, const Standardizer& standardizer);

/// Per-player career trajectory, attempts in chronological order.
struct PlayerTrajectory {
  std::vector<std::size_t> attempts;  // play indices
  std::vector<double> raw;            // raw quality before attempt k, k = 0..n (n+1 entries)
};

/// Standardized kq / pq / delta-TQ for every play, plus what is needed to
/// score states outside the data.
struct QualityTables {
  std::vector<double> kq, pq, delta_tq_off, delta_tq_def;  // indexed like plays
  Standardizer kq_scale, pq_scale, tq_scale;
  BaselineFg fg_baseline;
  BaselinePunt punt_baseline;
  std::map<std::string, PlayerTrajectory> kickers, punters;

  /// Current (after all recorded attempts) standardized quality; 0 for unknown ids.
  double kicker_quality(const std::string& id) const;
  double punter_quality(const std::string& id) const;
};

struct QualityOptions {
  QualityParams kicker = kKickerQuality;
  QualityParams punter = kPunterQuality;
  /// Standardization population; empty means every play.
  std::vector<std::size_t> standardize_rows;
};

/// Chronological order is (season, game_id, play_index). kq at a play is the
/// kicker's quality before that play; plays without a kicker id get 0.
QualityTables compute_quality(std::span<const PlayRecord> plays, const TrainingPools& pools,
                              const QualityOptions& options = {});

/// CSV `player_id,attempt_index,quality` (standardized quality before each attempt).
void write_quality_table(std::ostream& out, const std::map<std::string, PlayerTrajectory>& players,
                         const Standardizer& scale);

void to_json(nlohmann::json& j, const Standardizer& s);
void from_json(const nlohmann::json& j, Standardizer& s);

}  // namespace fourthdown
