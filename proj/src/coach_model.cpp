#include "fourthdown/coach_model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>

#include "fourthdown/common.hpp"

namespace fourthdown {

int coach_era(int season) {
  if (season >= 2018) return 4;
  if (season >= 2014) return 3;
  if (season >= 2006) return 2;
  if (season >= 2002) return 1;
  return 0;
}

std::vector<std::string> coach_feature_names() {
  return {"yardline", "ydstogo", "game_seconds_remaining", "score_differential", "posteam_spread", "era"};
}

std::vector<double> coach_features(const PlayRecord& p) {
  return {static_cast<double>(p.yardline),
          static_cast<double>(p.ydstogo),
          static_cast<double>(p.game_seconds_remaining),
          static_cast<double>(p.score_differential),
          p.posteam_spread,
          static_cast<double>(coach_era(p.season))};
}

std::optional<Decision> actual_decision(const PlayRecord& p) {
  switch (p.play_type) {
    case PlayType::go: return Decision::go;
    case PlayType::field_goal: return Decision::field_goal;
    case PlayType::punt: return Decision::punt;
    default: return std::nullopt;
  }
}

std::array<double, 3> CoachModel::probabilities(std::span<const double> features) const {
  std::array<double, 3> m{};
  for (std::size_t k = 0; k < 3; ++k) m[k] = one_vs_rest[k].margin(features);
  const double top = *std::max_element(m.begin(), m.end());
  double sum = 0.0;
  for (double& v : m) sum += (v = std::exp(v - top));
  for (double& v : m) v /= sum;
  return m;
}

std::vector<double> CoachModel::importance() const {
  std::vector<double> out(coach_feature_names().size(), 0.0);
  for (const auto& g : one_vs_rest) {
    const auto imp = g.gain_importance();
    for (std::size_t f = 0; f < out.size() && f < imp.size(); ++f) out[f] += imp[f] / 3.0;
  }
  return out;
}

void to_json(nlohmann::json& j, const CoachModel& m) {
  j = {{"format_version", 1}, {"features", coach_feature_names()}, {"one_vs_rest", nlohmann::json::array()}};
  for (const auto& g : m.one_vs_rest) j["one_vs_rest"].push_back(g);
}

void from_json(const nlohmann::json& j, CoachModel& m) {
  if (j.at("format_version").get<int>() != 1) throw SchemaError("unsupported coach model version");
  const auto& arr = j.at("one_vs_rest");
  if (arr.size() != 3) throw SchemaError("coach model needs three learners");
  for (std::size_t k = 0; k < 3; ++k) m.one_vs_rest[k] = arr[k].get<GbtModel>();
}

CoachModel fit_coach(std::span<const PlayRecord> plays, std::span<const std::size_t> pool, const GbtParams& params,
                     CoachFitReport* report) {
  FeatureMatrix x;
  x.cols = coach_feature_names().size();
  std::vector<Decision> label;
  for (auto i : pool) {
    const auto& p = plays[i];
    if (p.down != 4) continue;
    const auto d = actual_decision(p);
    if (!d) continue;
    x.push_row(coach_features(p));
    label.push_back(*d);
  }
  CoachFitReport r;
  for (auto d : label) ++r.class_counts[static_cast<std::size_t>(d)];
  for (std::size_t k = 0; k < 3; ++k)
    if (r.class_counts[k] == 0)
      throw FitError("coach model: no " + std::string(to_string(kDecisions[k])) + " plays in the fourth-down pool");

  CoachModel m;
  GbtParams p = params;
  p.monotone.clear();
  std::vector<double> y(label.size());
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < label.size(); ++i) y[i] = label[i] == kDecisions[k] ? 1.0 : 0.0;
    m.one_vs_rest[k] = train_gbt(x, y, {}, p);
    std::vector<double> pk(label.size());
    for (std::size_t i = 0; i < label.size(); ++i) pk[i] = m.one_vs_rest[k].predict(x.row(i));
    r.class_logloss[k] = log_loss(pk, y);
  }
  double ll = 0.0;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const auto probs = m.probabilities(x.row(i));
    ll -= std::log(std::max(probs[static_cast<std::size_t>(label[i])], 1e-15));
  }
  r.multiclass_logloss = ll / static_cast<double>(label.size());
  if (report) *report = r;
  return m;
}

void write_importance(std::ostream& out, const CoachModel& m) {
  const auto names = coach_feature_names();
  const auto imp = m.importance();
  out << "feature,gain_share\n" << std::setprecision(10);
  for (std::size_t f = 0; f < names.size(); ++f) out << names[f] << ',' << imp[f] << '\n';
}

CoachAgreement coach_agreement(std::span<const PlayRecord> plays, std::span<const UncertaintyReport> reports,
                               const CoachModel* coach) {
  if (plays.size() != reports.size()) throw InvalidInput("plays and reports differ in length");
  struct Tally {
    std::size_t n = 0, agree = 0;
  };
  std::map<std::string, Tally> by_coach;
  Tally all, kick, go;
  double expected = 0.0;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& p = plays[i];
    by_coach[p.posteam_coach];  // every coach appears, confident or not
    const auto d = actual_decision(p);
    if (!d || reports[i].bin != ConfidenceBin::confident) continue;
    const bool agree = *d == reports[i].decision;
    for (Tally* t : {&by_coach[p.posteam_coach], &all, reports[i].decision == Decision::go ? &go : &kick}) {
      ++t->n;
      t->agree += agree;
    }
    if (coach) expected += coach->probabilities(p)[static_cast<std::size_t>(reports[i].decision)];
  }
  auto share = [](const Tally& t) { return static_cast<double>(t.agree) / static_cast<double>(t.n); };
  CoachAgreement out;
  for (const auto& [name, t] : by_coach) {
    if (t.n == 0) {
      out.excluded.push_back(name);
      continue;
    }
    out.rows.push_back({name, t.n, share(t)});
  }
  out.confident_plays = all.n;
  if (all.n) {
    out.agreement = share(all);
    if (coach) out.expected_agreement = expected / static_cast<double>(all.n);
  }
  if (kick.n) out.kick_agreement = share(kick);
  if (go.n) out.go_agreement = share(go);
  return out;
}

void write_coach_agreement(std::ostream& out, const CoachAgreement& a) {
  out << "coach,confident_plays,agreement\n" << std::setprecision(10);
  for (const auto& r : a.rows) out << r.coach << ',' << r.confident_plays << ',' << r.agreement << '\n';
}

}  // namespace fourthdown
