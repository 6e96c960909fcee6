#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <random>

#include "fourthdown/common.hpp"
#include "fourthdown/spline_glm.hpp"

using namespace fourthdown;

namespace {

std::vector<double> knot_vector(const SplineSpec& s) {
  std::vector<double> k(s.degree + 1, s.lower);
  k.insert(k.end(), s.interior_knots.begin(), s.interior_knots.end());
  k.insert(k.end(), s.degree + 1, s.upper);
  return k;
}

struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  oracle::Matrix xr;
  oracle::Vector yr;
};

Problem random_problem(std::mt19937_64& rng, int rows, int cols, bool binary) {
  std::normal_distribution<double> nd;
  Problem p;
  p.X.resize(rows, cols);
  p.y.resize(rows);
  std::vector<double> beta(cols);
  for (auto& b : beta) b = 0.7 * nd(rng);
  for (int i = 0; i < rows; ++i) {
    double eta = 0.0;
    p.X(i, 0) = 1.0;
    for (int j = 1; j < cols; ++j) p.X(i, j) = nd(rng);
    for (int j = 0; j < cols; ++j) eta += p.X(i, j) * beta[j];
    if (binary) {
      p.y[i] = std::uniform_real_distribution<double>()(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    } else {
      p.y[i] = eta + nd(rng);
    }
  }
  p.xr.assign(rows, oracle::Vector(cols));
  p.yr.assign(rows, 0.0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) p.xr[i][j] = p.X(i, j);
    p.yr[i] = p.y[i];
  }
  return p;
}

}  // namespace

TEST_CASE("knot count follows df = degree + 1 + interior") {
  std::vector<double> x;
  for (int i = 0; i < 100; ++i) x.push_back(i);
  CHECK(fit_spline_spec(x, InputTransform::identity, 4).interior_knots.empty());
  CHECK(fit_spline_spec(x, InputTransform::identity, 5).interior_knots.size() == 1);
  CHECK(fit_spline_spec(x, InputTransform::identity, 5).interior_knots[0] == doctest::Approx(49.5));
  CHECK_THROWS_AS(fit_spline_spec(x, InputTransform::identity, 3), InvalidInput);
  CHECK(fit_spline_spec(x, InputTransform::identity, 3, 2).interior_knots.empty());
}

TEST_CASE("basis matches Cox-de Boor reference and is a partition of unity") {
  std::mt19937_64 rng(3);
  std::vector<double> x;
  std::exponential_distribution<double> ed(0.1);
  for (int i = 0; i < 400; ++i) x.push_back(1.0 + std::floor(ed(rng)));
  for (int df : {4, 5, 6, 7}) {
    const auto spec = fit_spline_spec(x, InputTransform::log1p, df);
    const auto knots = knot_vector(spec);
    std::uniform_real_distribution<double> u(spec.lower, spec.upper);
    for (int t = 0; t < 1000; ++t) {
      const double v = t == 0 ? spec.lower : (t == 1 ? spec.upper : u(rng));
      const Eigen::VectorXd row = spline_basis_row(spec, std::expm1(v));
      double sum = 0.0;
      for (int j = 0; j < df; ++j) {
        CHECK(row[j] >= 0.0);
        sum += row[j];
        const double ref = oracle::cox_de_boor(knots, j, 3, std::log1p(std::expm1(v)), t == 1);
        CHECK(row[j] == doctest::Approx(ref).epsilon(1e-9));
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("boundary knots activate exactly one end basis function") {
  std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto spec = fit_spline_spec(x, InputTransform::identity, 6);
  const auto lo = spline_basis_row(spec, 1.0);
  const auto hi = spline_basis_row(spec, 10.0);
  CHECK(lo[0] == 1.0);
  CHECK(hi[5] == 1.0);
  CHECK(lo.sum() == 1.0);
  CHECK(hi.sum() == 1.0);
  // clamped outside the range
  CHECK(spline_basis_row(spec, -50.0) == lo);
  CHECK(spline_basis_row(spec, 500.0) == hi);
}

TEST_CASE("tied data falls back to evenly spaced knots") {
  std::vector<double> x(50, 1.0);
  x.push_back(9.0);
  const auto spec = fit_spline_spec(x, InputTransform::identity, 6);
  REQUIRE(spec.interior_knots.size() == 2);
  CHECK(spec.interior_knots[0] > spec.lower);
  CHECK(spec.interior_knots[1] < spec.upper);
  std::vector<double> same(5, 2.0);
  CHECK_THROWS_AS(fit_spline_spec(same, InputTransform::identity, 4), InvalidInput);
}

TEST_CASE("OLS matches normal equations oracle") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_problem(rng, 50 + 20 * rep, 2 + rep % 6, false);
    std::vector<double> w(p.y.size());
    for (auto& wi : w) wi = 0.5 + std::uniform_real_distribution<double>()(rng);
    const auto fit = fit_ols(p.X, p.y, w);
    const auto ref = oracle::normal_equations(p.xr, p.yr, w);
    for (std::size_t j = 0; j < ref.size(); ++j) CHECK(fit.coefficients[j] == doctest::Approx(ref[j]).epsilon(1e-8));
    // weighted residuals orthogonal to the design
    Eigen::VectorXd r = p.y - p.X * fit.coefficients;
    Eigen::VectorXd wr = r.cwiseProduct(Eigen::Map<Eigen::VectorXd>(w.data(), w.size()));
    CHECK((p.X.transpose() * wr).cwiseAbs().maxCoeff() < 1e-6 * p.X.cwiseAbs().maxCoeff() * r.cwiseAbs().maxCoeff() * p.X.rows());
  }
}

TEST_CASE("OLS exact fit and equal weights") {
  Eigen::MatrixXd X(6, 3);
  X << 1, 2, 5, 1, 3, 1, 1, 5, 4, 1, 7, 2, 1, 11, 9, 1, 13, 0;
  Eigen::VectorXd y = X.col(1);
  const auto fit = fit_ols(X, y);
  CHECK(std::abs(fit.coefficients[1] - 1.0) < 1e-10);
  CHECK(std::abs(fit.coefficients[0]) < 1e-10);
  CHECK(std::abs(fit.coefficients[2]) < 1e-10);
  std::vector<double> w(6, 3.5);
  Eigen::VectorXd y2(6);
  y2 << 1, 4, 2, 8, 5, 7;
  const auto a = fit_ols(X, y2);
  const auto b = fit_ols(X, y2, w);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("collinear columns are dropped left to right or rejected") {
  Eigen::MatrixXd X(5, 3);
  X << 1, 1, 2, 1, 2, 3, 1, 3, 4, 1, 4, 5, 1, 6, 7;
  Eigen::VectorXd y(5);
  y << 1, 2, 2, 4, 5;
  const auto fit = fit_ols(X, y);
  REQUIRE(fit.dropped.size() == 1);
  CHECK(fit.dropped[0] == 2);
  CHECK(fit.coefficients[2] == 0.0);
  FitOptions strict;
  strict.rank_policy = RankPolicy::error;
  CHECK_THROWS_AS(fit_ols(X, y, {}, strict), FitError);
}

TEST_CASE("logistic matches full Newton oracle") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = random_problem(rng, 200 + 10 * rep, 2 + rep % 5, true);
    std::vector<double> w(p.y.size());
    for (auto& wi : w) wi = 0.25 + std::uniform_real_distribution<double>()(rng);
    const auto fit = fit_logistic(p.X, p.y, w);
    CHECK(fit.converged);
    const auto ref = oracle::newton_logistic(p.xr, p.yr, w);
    for (std::size_t j = 0; j < ref.size(); ++j)
      CHECK(std::abs(fit.coefficients[j] - ref[j]) < 1e-6);
    // finite-difference gradient of the log-likelihood at the estimate
    std::vector<double> beta(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
    for (std::size_t j = 0; j < beta.size(); ++j) {
      auto up = beta, dn = beta;
      up[j] += 1e-6;
      dn[j] -= 1e-6;
      const double g = (oracle::logistic_loglik(p.xr, p.yr, w, up) - oracle::logistic_loglik(p.xr, p.yr, w, dn)) / 2e-6;
      CHECK(std::abs(g) < 1e-5 * p.y.size());
    }
  }
}

TEST_CASE("logistic intercept-only closed form") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(10, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(10);
  y.head(3).setOnes();
  const auto fit = fit_logistic(X, y);
  CHECK(std::abs(fit.coefficients[0] - std::log(0.3 / 0.7)) < 1e-8);
}

TEST_CASE("duplicated rows equal integer weights") {
  std::mt19937_64 rng(8);
  auto p = random_problem(rng, 60, 3, true);
  std::vector<double> w(60);
  std::vector<int> reps(60);
  int total = 0;
  for (int i = 0; i < 60; ++i) total += reps[i] = 1 + static_cast<int>(rng() % 3);
  Eigen::MatrixXd Xd(total, 3);
  Eigen::VectorXd yd(total);
  int r = 0;
  for (int i = 0; i < 60; ++i) {
    w[i] = reps[i];
    for (int k = 0; k < reps[i]; ++k, ++r) {
      Xd.row(r) = p.X.row(i);
      yd[r] = p.y[i];
    }
  }
  const auto a = fit_logistic(p.X, p.y, w);
  const auto b = fit_logistic(Xd, yd);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("logistic errors: missing class and separation") {
  Eigen::MatrixXd X(6, 2);
  X << 1, 1, 1, 2, 1, 3, 1, 4, 1, 5, 1, 6;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
  CHECK_THROWS_AS(fit_logistic(X, ones), FitError);
  Eigen::VectorXd sep(6);
  sep << 0, 0, 0, 1, 1, 1;
  CHECK_THROWS_AS(fit_logistic(X, sep), FitError);
}

TEST_CASE("column scaling is equivariant") {
  std::mt19937_64 rng(2);
  auto p = random_problem(rng, 300, 4, true);
  Eigen::MatrixXd Xs = p.X;
  Xs.col(2) *= 7.5;
  const auto a = fit_logistic(p.X, p.y);
  const auto b = fit_logistic(Xs, p.y);
  CHECK(b.coefficients[2] == doctest::Approx(a.coefficients[2] / 7.5).epsilon(1e-9));
  CHECK(((p.X * a.coefficients) - (Xs * b.coefficients)).cwiseAbs().maxCoeff() < 1e-10);
  auto q = random_problem(rng, 100, 3, false);
  Eigen::MatrixXd Qs = q.X;
  Qs.col(1) *= 0.01;
  const auto c = fit_ols(q.X, q.y);
  const auto d = fit_ols(Qs, q.y);
  CHECK(d.coefficients[1] == doctest::Approx(c.coefficients[1] * 100).epsilon(1e-9));
  CHECK(((q.X * c.coefficients) - (Qs * d.coefficients)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("glm terms, gates, prediction and JSON round trip") {
  std::mt19937_64 rng(21);
  std::vector<CovariateRow> rows;
  std::vector<double> y;
  for (int i = 0; i < 400; ++i) {
    CovariateRow r{};
    r[static_cast<int>(Covariate::yardline)] = 1 + static_cast<double>(rng() % 99);
    r[static_cast<int>(Covariate::ydstogo)] = 1 + static_cast<double>(rng() % 10);
    r[static_cast<int>(Covariate::down)] = 3 + static_cast<double>(rng() % 2);
    r[static_cast<int>(Covariate::delta_tq)] = std::normal_distribution<double>()(rng);
    rows.push_back(r);
    y.push_back(5 - 2 * std::log1p(r[1]) + 0.3 * r[5] + std::normal_distribution<double>()(rng));
  }
  std::vector<Term> terms;
  auto fourth = spline_term("4th:ydstogo", Covariate::ydstogo, InputTransform::log1p, 4);
  fourth.gate = Gate{Covariate::down, true, 4.0};
  auto third = spline_term("3rd:ydstogo", Covariate::ydstogo, InputTransform::log1p, 4);
  third.gate = Gate{Covariate::down, true, 3.0};
  terms.push_back(fourth);
  terms.push_back(third);
  terms.push_back(intercept_term());
  terms.push_back(linear_term("delta_tq", Covariate::delta_tq));
  const auto model = fit_glm(terms, rows, y, {}, Link::identity);
  CHECK(model.coefficients.size() == 10);
  REQUIRE(model.dropped.size() == 1);
  CHECK(model.dropped_terms()[0] == "(intercept)");
  CHECK(model.predict(rows[0]) == model.predict(rows[0]));

  nlohmann::json j = model;
  const auto text = j.dump();
  GlmModel back = nlohmann::json::parse(text).get<GlmModel>();
  CHECK(back.terms == model.terms);
  CHECK(back.coefficients == model.coefficients);
  for (const auto& r : rows) CHECK(back.predict(r) == model.predict(r));

  // mean response reproduced at training rows
  double mean_fit = 0.0, mean_y = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mean_fit += model.predict(rows[i]);
    mean_y += y[i];
  }
  CHECK(std::abs(mean_fit - mean_y) / rows.size() < 1e-9);
}
