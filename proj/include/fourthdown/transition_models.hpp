#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fourthdown/data_ingest.hpp"
#include "fourthdown/quality_metrics.hpp"
#include "fourthdown/spline_glm.hpp"
#include "json.hpp"

namespace fourthdown {

// Design term lists; spline knots are placed at fit time.
std::vector<Term> punt_terms();
std::vector<Term> fg_terms();
std::vector<Term> conversion_terms();
std::vector<Term> success_terms();
std::vector<Term> failure_terms();

CovariateRow covariates(double yardline, double ydstogo, double down, double kq, double pq, double delta_tq);

struct TransitionOptions {
  int synthetic_misses = 500;
  int miss_yardline_lo = 51;
  int miss_yardline_hi = 99;
  std::uint64_t miss_seed = 0x5EEDF00DULL;
  double punt_yardline_floor = 31.0;  // punt inference clamps yardline into [31, 99]
  FitOptions glm;
};

/// Yardlines of the imputed misses: uniform integers in [lo, hi], from the seed alone.
std::vector<int> synthetic_miss_yardlines(const TransitionOptions& options);

struct TransitionBundle {
  GlmModel punt;     // identity: expected next yardline (receiving team's frame)
  GlmModel fg;       // logit: P(make)
  GlmModel conv;     // logit: P(convert)
  GlmModel success;  // identity: E[gain | converted]
  GlmModel failure;  // identity: E[gain | not converted]
  double punt_yardline_floor = 31.0;

  double expected_punt_yardline(double yardline, double pq) const;
  double p_make(double yardline, double kq) const;
  double p_convert(double ydstogo, double down, double delta_tq) const;
  double expected_gain_success(double ydstogo, double down, double yardline, double delta_tq) const;
  double expected_gain_failure(double ydstogo, double down, double delta_tq) const;
};

/// `weights` is indexed like `plays` (empty = unit weights). Pools must come from
/// filter_training_pools on the same plays.
GlmModel fit_punt(std::span<const PlayRecord> plays, std::span<const std::size_t> pool, std::span<const double> pq,
                  std::span<const double> weights, const FitOptions& options = {});
GlmModel fit_fg(std::span<const PlayRecord> plays, std::span<const std::size_t> pool, std::span<const double> kq,
                std::span<const double> weights, const TransitionOptions& options = {});
GlmModel fit_conversion(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                        std::span<const double> delta_tq, std::span<const double> weights,
                        const FitOptions& options = {});
GlmModel fit_success_yards(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                           std::span<const double> delta_tq, std::span<const double> weights,
                           const FitOptions& options = {});
GlmModel fit_failure_yards(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                           std::span<const double> delta_tq, std::span<const double> weights,
                           const FitOptions& options = {});

TransitionBundle fit_transitions(std::span<const PlayRecord> plays, const TrainingPools& pools,
                                 const QualityTables& quality, std::span<const double> weights,
                                 const TransitionOptions& options = {});

inline constexpr int kBundleFormatVersion = 1;
void to_json(nlohmann::json& j, const TransitionBundle& b);
void from_json(const nlohmann::json& j, TransitionBundle& b);

}  // namespace fourthdown
