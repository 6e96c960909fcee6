#pragma once

#include <array>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fourthdown/bootstrap_uq.hpp"
#include "fourthdown/gbt.hpp"

namespace fourthdown {

/// 0: 1999-2001, 1: 2002-2005, 2: 2006-2013, 3: 2014-2017, 4: 2018 on. Earlier seasons map to 0.
int coach_era(int season);

std::vector<std::string> coach_feature_names();
/// yardline, ydstogo, game_seconds_remaining, score_differential, posteam_spread, era.
std::vector<double> coach_features(const PlayRecord& p);

/// The decision actually taken on a fourth down, if it was one of the three.
std::optional<Decision> actual_decision(const PlayRecord& p);

/// One-vs-rest boosted trees over {Go, FG, Punt}, normalized with a softmax of the margins.
struct CoachModel {
  std::array<GbtModel, 3> one_vs_rest;  // indexed like kDecisions

  std::array<double, 3> probabilities(std::span<const double> features) const;
  std::array<double, 3> probabilities(const PlayRecord& p) const { return probabilities(coach_features(p)); }
  /// Mean gain share over the three learners, per feature.
  std::vector<double> importance() const;
};

void to_json(nlohmann::json& j, const CoachModel& m);
void from_json(const nlohmann::json& j, CoachModel& m);

struct CoachFitReport {
  std::array<double, 3> class_logloss{};  // one-vs-rest, training rows
  double multiclass_logloss = 0.0;
  std::array<std::size_t, 3> class_counts{};
};

/// Trains on the fourth-down plays in `pool` whose play type is go, field goal or punt.
/// A class with no plays raises FitError.
CoachModel fit_coach(std::span<const PlayRecord> plays, std::span<const std::size_t> pool, const GbtParams& params,
                     CoachFitReport* report = nullptr);

/// CSV `feature,gain_share`.
void write_importance(std::ostream& out, const CoachModel& m);

struct CoachAgreementRow {
  std::string coach;
  std::size_t confident_plays = 0;
  double agreement = 0.0;
};

struct CoachAgreement {
  std::vector<CoachAgreementRow> rows;  // sorted by coach
  std::vector<std::string> excluded;    // coaches with no confident plays
  std::size_t confident_plays = 0;
  double agreement = 0.0;
  std::optional<double> kick_agreement;  // among confident plays where the model says FG or Punt
  std::optional<double> go_agreement;    // ... where it says Go
  /// Mean coach-model probability of the recommended decision on confident plays; set when
  /// a coach model is supplied.
  std::optional<double> expected_agreement;
};

/// `reports` aligns with `plays`; only plays whose bin is confident and whose actual
/// decision is known count.
CoachAgreement coach_agreement(std::span<const PlayRecord> plays, std::span<const UncertaintyReport> reports,
                               const CoachModel* coach = nullptr);

/// CSV `coach,confident_plays,agreement`.
void write_coach_agreement(std::ostream& out, const CoachAgreement& a);

}  // namespace fourthdown
