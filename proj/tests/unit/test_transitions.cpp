#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "fourthdown/transition_models.hpp"

using namespace fourthdown;

namespace {

struct Pool {
  std::vector<PlayRecord> plays;
  std::vector<std::size_t> rows;
  std::vector<double> q;  // kq, pq or delta_tq, indexed like plays
};

Pool punt_pool(std::mt19937_64& rng, int n) {
  Pool p;
  std::normal_distribution<double> nd;
  for (int i = 0; i < n; ++i) {
    PlayRecord r;
    r.play_type = PlayType::punt;
    r.down = 4;
    r.yardline = 31 + static_cast<int>(rng() % 69);
    const double q = nd(rng);
    r.next_yardline_after_punt =
        std::clamp(static_cast<int>(std::lround(140 - r.yardline + 3 * q + 6 * nd(rng))), 1, 99);
    p.plays.push_back(r);
    p.rows.push_back(i);
    p.q.push_back(q);
  }
  return p;
}

Pool fg_pool(std::mt19937_64& rng, int n, double kicker_effect) {
  Pool p;
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  for (int i = 0; i < n; ++i) {
    PlayRecord r;
    r.play_type = PlayType::field_goal;
    r.down = 4;
    r.yardline = 1 + static_cast<int>(rng() % 45);
    const double q = nd(rng);
    const double eta = 5.0 - 0.12 * r.yardline + kicker_effect * q;
    r.fg_made = u(rng) < 1 / (1 + std::exp(-eta)) ? 1 : 0;
    p.plays.push_back(r);
    p.rows.push_back(i);
    p.q.push_back(q);
  }
  return p;
}

// go attempts on third and fourth down; conversion truth logistic in log1p(z) and delta_tq
Pool conversion_pool(std::mt19937_64& rng, int n, double tq_effect) {
  Pool p;
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  for (int i = 0; i < n; ++i) {
    PlayRecord r;
    r.play_type = PlayType::go;
    r.down = i % 3 == 0 ? 4 : 3;
    r.ydstogo = std::max(1, static_cast<int>(std::exp(u(rng) * std::log(20.0))));
    r.yardline = std::min(99, r.ydstogo + static_cast<int>(rng() % 80));
    const double q = nd(rng);
    const double eta = 1.3 - 0.9 * std::log1p(r.ydstogo) + (r.down == 4 ? 0.2 : 0.0) + tq_effect * q;
    const bool conv = u(rng) < 1 / (1 + std::exp(-eta));
    if (conv)
      r.yards_gained = r.ydstogo + static_cast<int>(std::abs(nd(rng)) * 6);
    else
      r.yards_gained = r.ydstogo - 1 - static_cast<int>(std::abs(nd(rng)) * 3);
    p.plays.push_back(r);
    p.rows.push_back(i);
    p.q.push_back(q);
  }
  return p;
}

std::vector<CovariateRow> rows_of(const Pool& p, Covariate slot) {
  std::vector<CovariateRow> out;
  for (auto i : p.rows) {
    const auto& r = p.plays[i];
    CovariateRow c = covariates(r.yardline, r.ydstogo, r.down, 0, 0, 0);
    c[static_cast<int>(slot)] = p.q[i];
    out.push_back(c);
  }
  return out;
}

// Compares against the normal equations on the columns the fit kept; dropped columns must be zero.
void check_against_oracle(const GlmModel& m, const std::vector<CovariateRow>& rows, const oracle::Vector& y) {
  const auto X = design_matrix(m.terms, rows);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (std::find(m.dropped.begin(), m.dropped.end(), j) == m.dropped.end()) kept.push_back(j);
  oracle::Matrix xr(X.rows(), oracle::Vector(kept.size()));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (std::size_t k = 0; k < kept.size(); ++k) xr[i][k] = X(i, kept[k]);
  const auto beta = oracle::normal_equations(xr, y, {});
  for (std::size_t k = 0; k < kept.size(); ++k)
    CHECK(m.coefficients[kept[k]] == doctest::Approx(beta[k]).epsilon(1e-8).scale(1.0));
  for (int j : m.dropped) CHECK(m.coefficients[j] == 0.0);
}

// OLS with an intercept in the column space: prediction at the pool-mean design row equals the pool mean.
void check_mean_design_row(const GlmModel& m, const std::vector<CovariateRow>& rows, const std::vector<double>& y) {
  const auto X = design_matrix(m.terms, rows);
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  CHECK(mean.dot(m.coefficients) == doctest::Approx(ybar).epsilon(1e-6));
}

// Logit: the intercept score equation makes mean fitted probability equal the mean label.
void check_mean_probability(const GlmModel& m, const std::vector<CovariateRow>& rows, const std::vector<double>& y) {
  double pbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pbar += m.predict(rows[i]);
    ybar += y[i];
  }
  CHECK(pbar / rows.size() == doctest::Approx(ybar / rows.size()).epsilon(1e-6));
}

}  // namespace

TEST_CASE("punt model: OLS oracle, linear punter terms and the inference clamp") {
  std::mt19937_64 rng(21);
  const auto p = punt_pool(rng, 500);
  const auto m = fit_punt(p.plays, p.rows, p.q, {});
  const auto rows = rows_of(p, Covariate::pq);
  std::vector<double> y;
  for (const auto& r : p.plays) y.push_back(*r.next_yardline_after_punt);
  check_against_oracle(m, rows, y);
  check_mean_design_row(m, rows, y);

  TransitionBundle b;
  b.punt = m;
  const double b1 = m.coefficients[4], b2 = m.coefficients[5];
  for (double yard : {35.0, 50.0, 80.0}) {
    const double diff = b.expected_punt_yardline(yard, 1.0) - b.expected_punt_yardline(yard, -1.0);
    CHECK(diff == doctest::Approx(2 * (b1 + b2 * yard)).epsilon(1e-9));
    auto spline_only = m;
    spline_only.coefficients[4] = spline_only.coefficients[5] = 0.0;
    CHECK(b.expected_punt_yardline(yard, 0.0) == doctest::Approx(spline_only.predict(covariates(yard, 10, 4, 0, 0, 0))));
  }
  CHECK(b.expected_punt_yardline(5.0, 0.0) == b.expected_punt_yardline(31.0, 0.0));
  CHECK_THROWS_AS(fit_punt(p.plays, {}, p.q, {}), FitError);
}

TEST_CASE("field goal model: synthetic misses shrink long attempts, kicker sign recovered") {
  std::mt19937_64 rng(22);
  const auto p = fg_pool(rng, 3000, 0.6);
  TransitionOptions opt;
  const auto m = fit_fg(p.plays, p.rows, p.q, {}, opt);
  TransitionBundle b;
  b.fg = m;
  CHECK(b.p_make(85, 0.0) < 0.01);
  CHECK(m.coefficients[m.coefficients.size() - 1] > 0.0);
  for (int y = 1; y < 60; ++y) CHECK(b.p_make(y + 1, 0.0) <= b.p_make(y, 0.0) + 1e-12);
  for (int y = 1; y <= 99; ++y) {
    CHECK(b.p_make(y, 0.0) > 0.0);
    CHECK(b.p_make(y, 0.0) < 1.0);
  }

  const auto ys = synthetic_miss_yardlines(opt);
  REQUIRE(ys.size() == 500);
  CHECK(*std::min_element(ys.begin(), ys.end()) >= 51);
  CHECK(*std::max_element(ys.begin(), ys.end()) <= 99);
  CHECK(ys == synthetic_miss_yardlines(opt));
  CHECK(fit_fg(p.plays, p.rows, p.q, {}, opt).coefficients == m.coefficients);
  auto other = opt;
  other.miss_seed += 1;
  CHECK(synthetic_miss_yardlines(other) != ys);

  auto rows = rows_of(p, Covariate::kq);
  std::vector<double> y;
  for (const auto& r : p.plays) y.push_back(*r.fg_made);
  for (int v : ys) {
    rows.push_back(covariates(v, 10, 4, 0, 0, 0));
    y.push_back(0.0);
  }
  check_mean_probability(m, rows, y);

  auto all_made = p;
  for (auto& r : all_made.plays) r.fg_made = 1;
  opt.synthetic_misses = 0;
  CHECK_THROWS_AS(fit_fg(all_made.plays, all_made.rows, all_made.q, {}, opt), FitError);
}

TEST_CASE("conversion model: shape, team-quality sign, mean property") {
  std::mt19937_64 rng(23);
  const auto p = conversion_pool(rng, 4000, 0.5);
  const auto m = fit_conversion(p.plays, p.rows, p.q, {});
  TransitionBundle b;
  b.conv = m;
  CHECK(b.p_convert(1, 4, 0) > b.p_convert(10, 4, 0));
  CHECK(b.p_convert(1, 3, 0) > b.p_convert(10, 3, 0));
  CHECK(b.p_convert(3, 4, 1.0) > b.p_convert(3, 4, 0.0));
  for (int z = 1; z <= 30; ++z)
    for (int d : {3, 4}) {
      CHECK(b.p_convert(z, d, 0) > 0.0);
      CHECK(b.p_convert(z, d, 0) < 1.0);
    }
  // down enters only through the spline blocks: the team-quality shift is identical on both downs
  const auto logit = [](double q) { return std::log(q / (1 - q)); };
  CHECK(logit(b.p_convert(4, 4, 1)) - logit(b.p_convert(4, 4, 0)) ==
        doctest::Approx(logit(b.p_convert(7, 3, 1)) - logit(b.p_convert(7, 3, 0))).epsilon(1e-9));

  const auto rows = rows_of(p, Covariate::delta_tq);
  std::vector<double> y;
  for (const auto& r : p.plays) y.push_back(*r.yards_gained >= r.ydstogo ? 1.0 : 0.0);
  check_mean_probability(m, rows, y);
}

TEST_CASE("yards given success and failure: OLS oracles and model form") {
  std::mt19937_64 rng(24);
  const auto p = conversion_pool(rng, 4000, 0.5);
  const auto ms = fit_success_yards(p.plays, p.rows, p.q, {});
  const auto mf = fit_failure_yards(p.plays, p.rows, p.q, {});

  Pool succ, fail;
  for (auto i : p.rows) {
    auto& dst = *p.plays[i].yards_gained >= p.plays[i].ydstogo ? succ : fail;
    dst.rows.push_back(dst.plays.size());
    dst.plays.push_back(p.plays[i]);
    dst.q.push_back(p.q[i]);
  }
  for (auto* part : {&succ, &fail}) {
    const auto& m = part == &succ ? ms : mf;
    const auto rows = rows_of(*part, Covariate::delta_tq);
    std::vector<double> y;
    for (const auto& r : part->plays) y.push_back(*r.yards_gained);
    check_against_oracle(m, rows, y);
    check_mean_design_row(m, rows, y);
  }

  bool has_switch = false;
  for (const auto& t : ms.terms)
    if (t.gate && t.gate->var == Covariate::ydstogo && t.kind == TermKind::spline && t.spline.df == 3 &&
        t.spline.degree == 2)
      has_switch = true;
  CHECK(has_switch);

  TransitionBundle b;
  b.success = ms;
  b.failure = mf;
  CHECK(b.expected_gain_success(5, 4, 40, 0.3) == b.expected_gain_success(5, 4, 40, 0.3));
  for (int d : {3, 4}) {
    // linear in log1p(z): equal steps in log1p give zero second differences
    const double a = b.expected_gain_failure(std::expm1(1.0), d, 0.0);
    const double c = b.expected_gain_failure(std::expm1(2.0), d, 0.0);
    const double e = b.expected_gain_failure(std::expm1(3.0), d, 0.0);
    CHECK(std::abs(a - 2 * c + e) < 1e-9);
  }
}

TEST_CASE("bundle fit and JSON round trip") {
  std::mt19937_64 rng(25);
  auto punts = punt_pool(rng, 400);
  auto fgs = fg_pool(rng, 1500, 0.4);
  auto conv = conversion_pool(rng, 2000, 0.3);
  std::vector<PlayRecord> plays;
  QualityTables q;
  for (auto* part : {&punts, &fgs, &conv})
    for (std::size_t i = 0; i < part->plays.size(); ++i) {
      plays.push_back(part->plays[i]);
      q.kq.push_back(part == &fgs ? part->q[i] : 0.0);
      q.pq.push_back(part == &punts ? part->q[i] : 0.0);
      q.delta_tq_off.push_back(part == &conv ? part->q[i] : 0.0);
      q.delta_tq_def.push_back(0.0);
    }
  const auto pools = filter_training_pools(plays);
  const auto bundle = fit_transitions(plays, pools, q, {});
  const nlohmann::json j = bundle;
  const auto back = nlohmann::json::parse(j.dump()).get<TransitionBundle>();
  CHECK(nlohmann::json(back) == j);
  for (int y = 1; y <= 99; y += 7) {
    CHECK(back.p_make(y, 0.2) == bundle.p_make(y, 0.2));
    CHECK(back.expected_punt_yardline(y, 0.5) == bundle.expected_punt_yardline(y, 0.5));
    CHECK(back.p_convert(1 + y % 10, 4, 0.1) == bundle.p_convert(1 + y % 10, 4, 0.1));
    CHECK(back.expected_gain_success(1 + y % 10, 4, y, 0.1) == bundle.expected_gain_success(1 + y % 10, 4, y, 0.1));
    CHECK(back.expected_gain_failure(1 + y % 10, 3, 0.1) == bundle.expected_gain_failure(1 + y % 10, 3, 0.1));
  }
  auto bad = j;
  bad["format_version"] = 99;
  CHECK_THROWS_AS(bad.get<TransitionBundle>(), SchemaError);
}
