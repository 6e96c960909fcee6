#pragma once

#include <Eigen/Dense>
#include "json.hpp"

#include "fourthdown/common.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fourthdown {

enum class InputTransform { identity, log1p, log };

double apply_transform(InputTransform t, double x);

/// Full (clamped-knot) B-spline basis: df = degree + 1 + #interior knots
/// columns, non-negative, summing to one on [lower, upper].
struct SplineSpec {
  InputTransform transform = InputTransform::identity;
  int degree = 3;
  int df = 4;
  std::vector<double> interior_knots;
  double lower = 0.0;
  double upper = 1.0;

  bool operator==(const SplineSpec&) const = default;
};

/// Boundary knots at the min/max of the transformed input, interior knots at
/// equally spaced quantiles. Only x with positive weight count (weights may be empty).
SplineSpec fit_spline_spec(std::span<const double> x, InputTransform transform, int df,
                           int degree = 3, std::span<const double> weights = {});

/// Basis values for one raw input, clamped into the boundary knots first.
Eigen::VectorXd spline_basis_row(const SplineSpec& spec, double x);
/// Basis block: rows = x.size(), cols = df. Throws InvalidInput for an
/// impossible (df, degree) pair or a degenerate knot range.
Eigen::MatrixXd build_basis(const SplineSpec& spec, std::span<const double> x);

// ---------------------------------------------------------------------------
// Design terms for the transition models.

enum class Covariate : int { yardline = 0, ydstogo, down, kq, pq, delta_tq };
inline constexpr std::size_t kCovariateCount = 6;
using CovariateRow = std::array<double, kCovariateCount>;

std::string_view to_string(Covariate c);

struct Gate {
  Covariate var = Covariate::down;
  bool equal = true;  // 1{var == value} when true, 1{var != value} otherwise
  double value = 0.0;

  bool passes(const CovariateRow& row) const;
  bool operator==(const Gate&) const = default;
};

enum class TermKind { intercept, linear, spline };

struct Term {
  std::string name;
  TermKind kind = TermKind::linear;
  Covariate var = Covariate::yardline;
  InputTransform transform = InputTransform::identity;
  std::optional<Covariate> multiplier;
  std::optional<Gate> gate;
  SplineSpec spline;  // knots are data-dependent; filled by prepare_terms

  int columns() const { return kind == TermKind::spline ? spline.df : 1; }
  bool operator==(const Term&) const = default;
};

Term intercept_term();
Term linear_term(std::string name, Covariate var, InputTransform t = InputTransform::identity);
Term spline_term(std::string name, Covariate var, InputTransform t, int df, int degree = 3);

/// Places spline knots from the rows each term is active on.
std::vector<Term> prepare_terms(std::vector<Term> terms, std::span<const CovariateRow> rows,
                                std::span<const double> weights = {});

int design_columns(std::span<const Term> terms);
void fill_design_row(std::span<const Term> terms, const CovariateRow& row,
                     Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out);
Eigen::MatrixXd design_matrix(std::span<const Term> terms, std::span<const CovariateRow> rows);

// ---------------------------------------------------------------------------
// Fitting.

enum class Link { identity, logit };

/// Separation detected in a logistic fit; `column` is the design column with the
/// largest coefficient at the point the fit was abandoned.
class SeparationError : public FitError {
 public:
  SeparationError(const std::string& msg, int column) : FitError(msg), column(column) {}
  int column;
};
enum class RankPolicy { drop_and_report, error };

struct FitOptions {
  RankPolicy rank_policy = RankPolicy::drop_and_report;
  double rank_tolerance = 1e-9;
  int max_iterations = 100;
  double score_tolerance = 1e-8;
  double deviance_tolerance = 1e-10;
};

struct LinearFit {
  Eigen::VectorXd coefficients;  // dropped columns hold 0
  std::vector<int> dropped;      // column indices removed as collinear
  int iterations = 0;
  bool converged = true;
  double deviance = 0.0;
};

/// Weighted least squares via Householder QR on sqrt(W)X. Weights may be empty.
LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  std::span<const double> weights = {}, const FitOptions& options = {});

/// Logistic regression via IRLS with step halving. Throws FitError on a
/// missing class, separation or hitting the iteration cap.
LinearFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       std::span<const double> weights = {}, const FitOptions& options = {});

struct GlmModel {
  std::vector<Term> terms;
  Eigen::VectorXd coefficients;
  std::vector<int> dropped;
  Link link = Link::identity;
  int iterations = 0;

  double predict(const CovariateRow& row) const;
  /// Names of the terms owning the dropped columns.
  std::vector<std::string> dropped_terms() const;
};

/// Knot placement, design construction and the fit in one step. Dropped
/// collinear columns are logged as warnings naming their term.
GlmModel fit_glm(std::vector<Term> terms, std::span<const CovariateRow> rows,
                 std::span<const double> y, std::span<const double> weights, Link link,
                 const FitOptions& options = {});

inline constexpr int kGlmFormatVersion = 1;

void to_json(nlohmann::json& j, const GlmModel& m);
void from_json(const nlohmann::json& j, GlmModel& m);

}  // namespace fourthdown
