#include "fourthdown/transition_models.hpp"

#include <algorithm>
#include <cmath>

#include "fourthdown/common.hpp"

namespace fourthdown {

namespace {

Term gated(Term t, Covariate var, bool equal, double value) {
  t.gate = Gate{var, equal, value};
  return t;
}

}  // namespace

std::vector<Term> punt_terms() {
  auto cross = linear_term("pq:yardline", Covariate::pq);
  cross.multiplier = Covariate::yardline;
  return {spline_term("bs(yardline)", Covariate::yardline, InputTransform::identity, 4),
          linear_term("pq", Covariate::pq), cross};
}

std::vector<Term> fg_terms() {
  return {spline_term("bs(yardline)", Covariate::yardline, InputTransform::identity, 5),
          linear_term("kq", Covariate::kq)};
}

std::vector<Term> conversion_terms() {
  return {gated(spline_term("4th:bs(log1p(ydstogo))", Covariate::ydstogo, InputTransform::log1p, 4),
                Covariate::down, true, 4.0),
          gated(spline_term("3rd:bs(log1p(ydstogo))", Covariate::ydstogo, InputTransform::log1p, 4),
                Covariate::down, true, 3.0),
          intercept_term(), linear_term("delta_tq", Covariate::delta_tq)};
}

std::vector<Term> success_terms() {
  return {gated(spline_term("4th:bs(log(ydstogo))", Covariate::ydstogo, InputTransform::log, 4),
                Covariate::down, true, 4.0),
          gated(spline_term("3rd:bs(log(ydstogo))", Covariate::ydstogo, InputTransform::log, 4),
                Covariate::down, true, 3.0),
          gated(spline_term("ydstogo==1:bs(yardline)", Covariate::yardline, InputTransform::identity, 3, 2),
                Covariate::ydstogo, true, 1.0),
          gated(spline_term("ydstogo!=1:bs(yardline)", Covariate::yardline, InputTransform::identity, 4),
                Covariate::ydstogo, false, 1.0),
          intercept_term(), linear_term("delta_tq", Covariate::delta_tq)};
}

std::vector<Term> failure_terms() {
  auto fourth = gated(linear_term("4th:log1p(ydstogo)", Covariate::ydstogo, InputTransform::log1p),
                      Covariate::down, true, 4.0);
  auto third = gated(linear_term("3rd:log1p(ydstogo)", Covariate::ydstogo, InputTransform::log1p),
                     Covariate::down, true, 3.0);
  return {fourth, third, intercept_term(), linear_term("delta_tq", Covariate::delta_tq)};
}

CovariateRow covariates(double yardline, double ydstogo, double down, double kq, double pq, double delta_tq) {
  return {yardline, ydstogo, down, kq, pq, delta_tq};
}

std::vector<int> synthetic_miss_yardlines(const TransitionOptions& options) {
  if (options.miss_yardline_hi < options.miss_yardline_lo) throw InvalidInput("empty synthetic miss range");
  Rng rng(options.miss_seed);
  const auto span = static_cast<std::size_t>(options.miss_yardline_hi - options.miss_yardline_lo + 1);
  std::vector<int> out(static_cast<std::size_t>(std::max(0, options.synthetic_misses)));
  for (auto& y : out) y = options.miss_yardline_lo + static_cast<int>(uniform_index(rng, span));
  return out;
}

namespace {

double weight_of(std::span<const double> weights, std::size_t i) { return weights.empty() ? 1.0 : weights[i]; }

CovariateRow row_of(const PlayRecord& p, double kq, double pq, double dtq) {
  return covariates(p.yardline, p.ydstogo, p.down, kq, pq, dtq);
}

GlmModel named_fit(const char* what, std::vector<Term> terms, const std::vector<CovariateRow>& rows,
                   const std::vector<double>& y, const std::vector<double>& w, Link link, const FitOptions& options) {
  double mass = 0.0;
  for (double v : w) mass += v;
  if (rows.empty() || !(mass > 0.0)) throw FitError(std::string(what) + " model: empty training pool");
  try {
    return fit_glm(std::move(terms), rows, y, w, link, options);
  } catch (const FitError& e) {
    throw FitError(std::string(what) + " model: " + e.what());
  }
}

}  // namespace

GlmModel fit_punt(std::span<const PlayRecord> plays, std::span<const std::size_t> pool, std::span<const double> pq,
                  std::span<const double> weights, const FitOptions& options) {
  std::vector<CovariateRow> rows;
  std::vector<double> y, w;
  for (auto i : pool) {
    rows.push_back(row_of(plays[i], 0.0, pq[i], 0.0));
    y.push_back(*plays[i].next_yardline_after_punt);
    w.push_back(weight_of(weights, i));
  }
  return named_fit("punt", punt_terms(), rows, y, w, Link::identity, options);
}

GlmModel fit_fg(std::span<const PlayRecord> plays, std::span<const std::size_t> pool, std::span<const double> kq,
                std::span<const double> weights, const TransitionOptions& options) {
  std::vector<CovariateRow> rows;
  std::vector<double> y, w;
  for (auto i : pool) {
    rows.push_back(row_of(plays[i], kq[i], 0.0, 0.0));
    y.push_back(*plays[i].fg_made ? 1.0 : 0.0);
    w.push_back(weight_of(weights, i));
  }
  for (int yard : synthetic_miss_yardlines(options)) {
    rows.push_back(covariates(yard, 10, 4, 0.0, 0.0, 0.0));
    y.push_back(0.0);
    w.push_back(1.0);
  }
  return named_fit("field goal", fg_terms(), rows, y, w, Link::logit, options.glm);
}

namespace {

template <class Keep>
void conversion_rows(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                     std::span<const double> delta_tq, std::span<const double> weights, Keep keep,
                     std::vector<CovariateRow>& rows, std::vector<double>& y, std::vector<double>& w, bool label) {
  for (auto i : pool) {
    const auto& p = plays[i];
    const bool converted = *p.yards_gained >= p.ydstogo;
    if (!keep(converted)) continue;
    rows.push_back(row_of(p, 0.0, 0.0, delta_tq[i]));
    y.push_back(label ? (converted ? 1.0 : 0.0) : static_cast<double>(*p.yards_gained));
    w.push_back(weight_of(weights, i));
  }
}

}  // namespace

GlmModel fit_conversion(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                        std::span<const double> delta_tq, std::span<const double> weights, const FitOptions& options) {
  std::vector<CovariateRow> rows;
  std::vector<double> y, w;
  conversion_rows(plays, pool, delta_tq, weights, [](bool) { return true; }, rows, y, w, true);
  return named_fit("conversion", conversion_terms(), rows, y, w, Link::logit, options);
}

GlmModel fit_success_yards(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                           std::span<const double> delta_tq, std::span<const double> weights,
                           const FitOptions& options) {
  std::vector<CovariateRow> rows;
  std::vector<double> y, w;
  conversion_rows(plays, pool, delta_tq, weights, [](bool c) { return c; }, rows, y, w, false);
  return named_fit("conversion success yards", success_terms(), rows, y, w, Link::identity, options);
}

GlmModel fit_failure_yards(std::span<const PlayRecord> plays, std::span<const std::size_t> pool,
                           std::span<const double> delta_tq, std::span<const double> weights,
                           const FitOptions& options) {
  std::vector<CovariateRow> rows;
  std::vector<double> y, w;
  conversion_rows(plays, pool, delta_tq, weights, [](bool c) { return !c; }, rows, y, w, false);
  return named_fit("conversion failure yards", failure_terms(), rows, y, w, Link::identity, options);
}

TransitionBundle fit_transitions(std::span<const PlayRecord> plays, const TrainingPools& pools,
                                 const QualityTables& quality, std::span<const double> weights,
                                 const TransitionOptions& options) {
  TransitionBundle b;
  b.punt_yardline_floor = options.punt_yardline_floor;
  b.punt = fit_punt(plays, pools.punt, quality.pq, weights, options.glm);
  b.fg = fit_fg(plays, pools.field_goal, quality.kq, weights, options);
  b.conv = fit_conversion(plays, pools.conversion, quality.delta_tq_off, weights, options.glm);
  b.success = fit_success_yards(plays, pools.conversion, quality.delta_tq_off, weights, options.glm);
  b.failure = fit_failure_yards(plays, pools.conversion, quality.delta_tq_off, weights, options.glm);
  return b;
}

double TransitionBundle::expected_punt_yardline(double yardline, double pq) const {
  const double y = std::clamp(yardline, punt_yardline_floor, 99.0);
  return punt.predict(covariates(y, 10, 4, 0, pq, 0));
}

double TransitionBundle::p_make(double yardline, double kq) const { return fg.predict(covariates(yardline, 10, 4, kq, 0, 0)); }

double TransitionBundle::p_convert(double ydstogo, double down, double delta_tq) const {
  return conv.predict(covariates(ydstogo, ydstogo, down, 0, 0, delta_tq));
}

double TransitionBundle::expected_gain_success(double ydstogo, double down, double yardline, double delta_tq) const {
  return success.predict(covariates(yardline, ydstogo, down, 0, 0, delta_tq));
}

double TransitionBundle::expected_gain_failure(double ydstogo, double down, double delta_tq) const {
  return failure.predict(covariates(ydstogo, ydstogo, down, 0, 0, delta_tq));
}

void to_json(nlohmann::json& j, const TransitionBundle& b) {
  j = {{"format_version", kBundleFormatVersion},
       {"punt_yardline_floor", b.punt_yardline_floor},
       {"punt", b.punt},
       {"field_goal", b.fg},
       {"conversion", b.conv},
       {"success_yards", b.success},
       {"failure_yards", b.failure}};
}

void from_json(const nlohmann::json& j, TransitionBundle& b) {
  if (j.at("format_version").get<int>() != kBundleFormatVersion)
    throw SchemaError("unsupported transition bundle version");
  b.punt_yardline_floor = j.at("punt_yardline_floor").get<double>();
  b.punt = j.at("punt").get<GlmModel>();
  b.fg = j.at("field_goal").get<GlmModel>();
  b.conv = j.at("conversion").get<GlmModel>();
  b.success = j.at("success_yards").get<GlmModel>();
  b.failure = j.at("failure_yards").get<GlmModel>();
}

}  // namespace fourthdown
