#include "fourthdown/spline_glm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "fourthdown/common.hpp"

namespace fourthdown {

double apply_transform(InputTransform t, double x) {
  switch (t) {
    case InputTransform::identity: return x;
    case InputTransform::log1p: return std::log1p(x);
    case InputTransform::log: return std::log(x);
  }
  return x;
}

namespace {

double quantile_type7(const std::vector<double>& sorted, double prob) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

void validate(const SplineSpec& spec) {
  if (spec.degree < 0) throw InvalidInput("spline degree must be non-negative");
  if (spec.df < spec.degree + 1)
    throw InvalidInput("spline df=" + std::to_string(spec.df) + " is below degree+1=" +
                       std::to_string(spec.degree + 1));
  if (static_cast<int>(spec.interior_knots.size()) != spec.df - spec.degree - 1)
    throw InvalidInput("spline knot count does not match df");
  if (!(spec.lower < spec.upper)) throw InvalidInput("degenerate spline range");
}

}  // namespace

SplineSpec fit_spline_spec(std::span<const double> x, InputTransform transform, int df, int degree,
                           std::span<const double> weights) {
  SplineSpec spec;
  spec.transform = transform;
  spec.degree = degree;
  spec.df = df;
  const int interior = df - degree - 1;
  if (interior < 0)
    throw InvalidInput("spline df=" + std::to_string(df) + " is below degree+1=" +
                       std::to_string(degree + 1));
  std::vector<double> values;
  values.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!weights.empty() && !(weights[i] > 0.0)) continue;
    values.push_back(apply_transform(transform, x[i]));
  }
  if (values.empty()) throw InvalidInput("no data to place spline knots");
  std::sort(values.begin(), values.end());
  spec.lower = values.front();
  spec.upper = values.back();
  if (!(spec.lower < spec.upper)) throw InvalidInput("degenerate spline range");
  bool ok = true;
  for (int k = 1; k <= interior; ++k) {
    double q = quantile_type7(values, static_cast<double>(k) / (interior + 1));
    if (!(q > spec.lower && q < spec.upper)) ok = false;
    if (!spec.interior_knots.empty() && q < spec.interior_knots.back()) ok = false;
    spec.interior_knots.push_back(q);
  }
  if (!ok) {
    // Heavy ties put a quantile on a boundary knot; fall back to even spacing.
    for (int k = 1; k <= interior; ++k)
      spec.interior_knots[k - 1] =
          spec.lower + (spec.upper - spec.lower) * static_cast<double>(k) / (interior + 1);
  }
  return spec;
}

Eigen::VectorXd spline_basis_row(const SplineSpec& spec, double x) {
  validate(spec);
  const int p = spec.degree;
  const int n = spec.df - 1;  // last basis index
  std::vector<double> knots;
  knots.reserve(spec.df + p + 1);
  knots.insert(knots.end(), p + 1, spec.lower);
  knots.insert(knots.end(), spec.interior_knots.begin(), spec.interior_knots.end());
  knots.insert(knots.end(), p + 1, spec.upper);

  double u = apply_transform(spec.transform, x);
  if (!(u > spec.lower)) u = spec.lower;  // also catches NaN / -inf
  if (u > spec.upper) u = spec.upper;

  int span;
  if (u >= spec.upper) {
    span = n;
  } else {
    // U[span] <= u < U[span+1], span in [p, n]
    auto it = std::upper_bound(knots.begin() + p, knots.begin() + n + 1, u);
    span = static_cast<int>(it - knots.begin()) - 1;
  }

  std::vector<double> basis(p + 1), left(p + 1), right(p + 1);
  basis[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = basis[r] / (right[r + 1] + left[j - r]);
      basis[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    basis[j] = saved;
  }
  Eigen::VectorXd row = Eigen::VectorXd::Zero(spec.df);
  for (int r = 0; r <= p; ++r) row[span - p + r] = basis[r];
  return row;
}

Eigen::MatrixXd build_basis(const SplineSpec& spec, std::span<const double> x) {
  validate(spec);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), spec.df);
  for (std::size_t i = 0; i < x.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = spline_basis_row(spec, x[i]).transpose();
  return out;
}

std::string_view to_string(Covariate c) {
  switch (c) {
    case Covariate::yardline: return "yardline";
    case Covariate::ydstogo: return "ydstogo";
    case Covariate::down: return "down";
    case Covariate::kq: return "kq";
    case Covariate::pq: return "pq";
    case Covariate::delta_tq: return "delta_tq";
  }
  return "";
}

bool Gate::passes(const CovariateRow& row) const {
  const bool eq = row[static_cast<std::size_t>(var)] == value;
  return equal ? eq : !eq;
}

Term intercept_term() {
  Term t;
  t.name = "(intercept)";
  t.kind = TermKind::intercept;
  return t;
}

Term linear_term(std::string name, Covariate var, InputTransform transform) {
  Term t;
  t.name = std::move(name);
  t.kind = TermKind::linear;
  t.var = var;
  t.transform = transform;
  return t;
}

Term spline_term(std::string name, Covariate var, InputTransform transform, int df, int degree) {
  Term t;
  t.name = std::move(name);
  t.kind = TermKind::spline;
  t.var = var;
  t.transform = transform;
  t.spline.transform = transform;
  t.spline.df = df;
  t.spline.degree = degree;
  return t;
}

std::vector<Term> prepare_terms(std::vector<Term> terms, std::span<const CovariateRow> rows,
                                std::span<const double> weights) {
  for (auto& term : terms) {
    if (term.kind != TermKind::spline) continue;
    std::vector<double> x, w;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (term.gate && !term.gate->passes(rows[i])) continue;
      x.push_back(rows[i][static_cast<std::size_t>(term.var)]);
      w.push_back(weights.empty() ? 1.0 : weights[i]);
    }
    try {
      term.spline = fit_spline_spec(x, term.transform, term.spline.df, term.spline.degree, w);
    } catch (const InvalidInput& e) {
      throw FitError("term " + term.name + ": " + e.what());
    }
  }
  return terms;
}

int design_columns(std::span<const Term> terms) {
  int cols = 0;
  for (const auto& t : terms) cols += t.columns();
  return cols;
}

void fill_design_row(std::span<const Term> terms, const CovariateRow& row,
                     Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  Eigen::Index col = 0;
  for (const auto& term : terms) {
    const int width = term.columns();
    if (term.gate && !term.gate->passes(row)) {
      out.segment(col, width).setZero();
      col += width;
      continue;
    }
    switch (term.kind) {
      case TermKind::intercept:
        out[col] = 1.0;
        break;
      case TermKind::linear: {
        double v = apply_transform(term.transform, row[static_cast<std::size_t>(term.var)]);
        if (term.multiplier) v *= row[static_cast<std::size_t>(*term.multiplier)];
        out[col] = v;
        break;
      }
      case TermKind::spline:
        out.segment(col, width) =
            spline_basis_row(term.spline, row[static_cast<std::size_t>(term.var)]).transpose();
        break;
    }
    col += width;
  }
}

Eigen::MatrixXd design_matrix(std::span<const Term> terms, std::span<const CovariateRow> rows) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), design_columns(terms));
  for (std::size_t i = 0; i < rows.size(); ++i)
    fill_design_row(terms, rows[i], X.row(static_cast<Eigen::Index>(i)));
  return X;
}

namespace {

Eigen::VectorXd weight_vector(std::span<const double> weights, Eigen::Index n) {
  if (weights.empty()) return Eigen::VectorXd::Ones(n);
  if (static_cast<Eigen::Index>(weights.size()) != n)
    throw InvalidInput("weights length does not match rows");
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(weights[static_cast<std::size_t>(i)] >= 0.0)) throw InvalidInput("weights must be non-negative");
    w[i] = weights[static_cast<std::size_t>(i)];
  }
  return w;
}

// Greedy left-to-right rank detection on the weighted design (modified
// Gram-Schmidt with one re-orthogonalisation pass).
std::vector<int> independent_columns(const Eigen::MatrixXd& Xw, double tol) {
  std::vector<int> kept;
  Eigen::MatrixXd Q(Xw.rows(), 0);
  for (Eigen::Index j = 0; j < Xw.cols(); ++j) {
    Eigen::VectorXd v = Xw.col(j);
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < Q.cols(); ++k) v -= Q.col(k).dot(v) * Q.col(k);
    const double norm = v.norm();
    if (norm <= tol * norm0) continue;
    Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
    Q.col(Q.cols() - 1) = v / norm;
    kept.push_back(static_cast<int>(j));
  }
  return kept;
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& X, const std::vector<int>& cols) {
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = X.col(cols[k]);
  return out;
}

std::vector<int> complement(const std::vector<int>& kept, Eigen::Index cols) {
  std::vector<int> dropped;
  std::size_t k = 0;
  for (int j = 0; j < cols; ++j) {
    if (k < kept.size() && kept[k] == j) ++k;
    else dropped.push_back(j);
  }
  return dropped;
}

Eigen::VectorXd weighted_solve(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w) {
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
  const Eigen::VectorXd yw = sw.cwiseProduct(y);
  return Xw.colPivHouseholderQr().solve(yw);
}

std::vector<int> checked_columns(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                                 const FitOptions& options) {
  if (X.rows() < X.cols()) throw FitError("fewer rows than design columns");
  const Eigen::MatrixXd Xw = w.cwiseSqrt().asDiagonal() * X;
  auto kept = independent_columns(Xw, options.rank_tolerance);
  if (kept.empty()) throw FitError("design has no usable columns");
  if (options.rank_policy == RankPolicy::error && static_cast<Eigen::Index>(kept.size()) != X.cols())
    throw FitError("design is rank deficient");
  return kept;
}

Eigen::VectorXd scatter(const Eigen::VectorXd& sub, const std::vector<int>& kept, Eigen::Index cols) {
  Eigen::VectorXd full = Eigen::VectorXd::Zero(cols);
  for (std::size_t k = 0; k < kept.size(); ++k) full[kept[k]] = sub[static_cast<Eigen::Index>(k)];
  return full;
}

double log_sigmoid(double eta) { return eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta)); }

double sigmoid(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double logistic_deviance(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (w[i] == 0.0) continue;
    dev -= 2.0 * w[i] * (y[i] * log_sigmoid(eta[i]) + (1.0 - y[i]) * log_sigmoid(-eta[i]));
  }
  return dev;
}

}  // namespace

LinearFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const double> weights,
                  const FitOptions& options) {
  if (y.size() != X.rows()) throw InvalidInput("response length does not match design rows");
  const Eigen::VectorXd w = weight_vector(weights, X.rows());
  const auto kept = checked_columns(X, w, options);
  const Eigen::MatrixXd Xk = select_columns(X, kept);
  LinearFit fit;
  fit.coefficients = scatter(weighted_solve(Xk, y, w), kept, X.cols());
  fit.dropped = complement(kept, X.cols());
  const Eigen::VectorXd r = y - X * fit.coefficients;
  fit.deviance = (w.array() * r.array().square()).sum();
  fit.iterations = 1;
  return fit;
}

LinearFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const double> weights,
                       const FitOptions& options) {
  if (y.size() != X.rows()) throw InvalidInput("response length does not match design rows");
  const Eigen::VectorXd w = weight_vector(weights, X.rows());
  double pos = 0.0, neg = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw InvalidInput("logistic response must be 0/1");
    (y[i] == 1.0 ? pos : neg) += w[i];
  }
  if (!(pos > 0.0) || !(neg > 0.0))
    throw FitError("logistic fit needs both outcomes with positive weight (complete separation)");

  const auto kept = checked_columns(X, w, options);
  const Eigen::MatrixXd Xk = select_columns(X, kept);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(Xk.cols());
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(Xk.rows());
  double dev = logistic_deviance(eta, y, w);

  LinearFit fit;
  fit.converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    fit.iterations = it;
    Eigen::VectorXd working_w(Xk.rows()), z(Xk.rows());
    for (Eigen::Index i = 0; i < Xk.rows(); ++i) {
      const double mu = sigmoid(eta[i]);
      const double var = std::max(mu * (1.0 - mu), std::numeric_limits<double>::min());
      working_w[i] = w[i] * var;
      z[i] = eta[i] + (y[i] - mu) / var;
    }
    Eigen::VectorXd next = weighted_solve(Xk, z, working_w);
    Eigen::VectorXd next_eta = Xk * next;
    double next_dev = logistic_deviance(next_eta, y, w);
    for (int halving = 0; halving < 30 && !(next_dev <= dev * (1.0 + 1e-12) + 1e-12); ++halving) {
      next = 0.5 * (next + beta);
      next_eta = Xk * next;
      next_dev = logistic_deviance(next_eta, y, w);
    }
    const double rel_change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
    const double step = (next - beta).cwiseAbs().maxCoeff() / (1.0 + next.cwiseAbs().maxCoeff());
    beta = next;
    eta = next_eta;
    dev = next_dev;

    Eigen::VectorXd resid(Xk.rows());
    for (Eigen::Index i = 0; i < Xk.rows(); ++i) resid[i] = w[i] * (y[i] - sigmoid(eta[i]));
    const double score = (Xk.transpose() * resid).cwiseAbs().maxCoeff();
    // Under separation the score and deviance flatten while coefficients keep drifting,
    // so a small step is required as well.
    if (step < 1e-7 && (score < options.score_tolerance || rel_change < options.deviance_tolerance)) {
      fit.converged = true;
      break;
    }
  }

  double max_eta = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    if (w[i] > 0.0) max_eta = std::max(max_eta, std::abs(eta[i]));
  if (!fit.converged && max_eta > 30.0) {
    Eigen::Index worst = 0;
    beta.cwiseAbs().maxCoeff(&worst);
    const int column = kept[static_cast<std::size_t>(worst)];
    throw SeparationError("logistic fit separated: fitted probabilities reach 0/1; largest coefficient on column " +
                              std::to_string(column),
                          column);
  }
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "IRLS did not converge in " << options.max_iterations << " iterations (deviance " << dev << ")";
    throw FitError(msg.str());
  }
  fit.coefficients = scatter(beta, kept, X.cols());
  fit.dropped = complement(kept, X.cols());
  fit.deviance = dev;
  return fit;
}

double GlmModel::predict(const CovariateRow& row) const {
  Eigen::RowVectorXd x(coefficients.size());
  fill_design_row(terms, row, x);
  const double eta = x.dot(coefficients);
  return link == Link::logit ? sigmoid(eta) : eta;
}

std::vector<std::string> GlmModel::dropped_terms() const {
  std::vector<std::string> names;
  for (int col : dropped) {
    int start = 0;
    for (const auto& t : terms) {
      if (col < start + t.columns()) {
        std::string name = t.name;
        if (t.columns() > 1) name += "[" + std::to_string(col - start) + "]";
        names.push_back(std::move(name));
        break;
      }
      start += t.columns();
    }
  }
  return names;
}

namespace {

// Bootstrap refits hit the same collinear columns over and over; report each one once.
void warn_dropped_once(const std::string& name) {
  static std::mutex mutex;
  static std::set<std::string> seen;
  std::lock_guard lock(mutex);
  if (seen.insert(name).second) log_warn("dropped collinear column " + name);
}

}  // namespace

GlmModel fit_glm(std::vector<Term> terms, std::span<const CovariateRow> rows, std::span<const double> y,
                 std::span<const double> weights, Link link, const FitOptions& options) {
  if (rows.empty()) throw FitError("empty training pool");
  GlmModel model;
  model.link = link;
  model.terms = prepare_terms(std::move(terms), rows, weights);
  const Eigen::MatrixXd X = design_matrix(model.terms, rows);
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  LinearFit fit;
  try {
    fit = link == Link::logit ? fit_logistic(X, yv, weights, options) : fit_ols(X, yv, weights, options);
  } catch (const SeparationError& e) {
    GlmModel probe = model;
    probe.dropped = {e.column};
    throw FitError(std::string(e.what()) + " (term " + probe.dropped_terms().front() + ")");
  }
  model.coefficients = std::move(fit.coefficients);
  model.dropped = std::move(fit.dropped);
  model.iterations = fit.iterations;
  for (const auto& name : model.dropped_terms()) warn_dropped_once(name);
  return model;
}

// ---------------------------------------------------------------------------

namespace {

std::string transform_name(InputTransform t) {
  switch (t) {
    case InputTransform::identity: return "identity";
    case InputTransform::log1p: return "log1p";
    case InputTransform::log: return "log";
  }
  return "identity";
}

InputTransform transform_from(const std::string& s) {
  if (s == "identity") return InputTransform::identity;
  if (s == "log1p") return InputTransform::log1p;
  if (s == "log") return InputTransform::log;
  throw SchemaError("unknown transform " + s);
}

Covariate covariate_from(const std::string& s) {
  for (std::size_t c = 0; c < kCovariateCount; ++c)
    if (to_string(static_cast<Covariate>(c)) == s) return static_cast<Covariate>(c);
  throw SchemaError("unknown covariate " + s);
}

std::string kind_name(TermKind k) {
  switch (k) {
    case TermKind::intercept: return "intercept";
    case TermKind::linear: return "linear";
    case TermKind::spline: return "spline";
  }
  return "linear";
}

TermKind kind_from(const std::string& s) {
  if (s == "intercept") return TermKind::intercept;
  if (s == "linear") return TermKind::linear;
  if (s == "spline") return TermKind::spline;
  throw SchemaError("unknown term kind " + s);
}

}  // namespace

void to_json(nlohmann::json& j, const GlmModel& m) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : m.terms) {
    nlohmann::json jt = {{"name", t.name},
                         {"kind", kind_name(t.kind)},
                         {"var", std::string(to_string(t.var))},
                         {"transform", transform_name(t.transform)}};
    if (t.multiplier) jt["multiplier"] = std::string(to_string(*t.multiplier));
    if (t.gate)
      jt["gate"] = {{"var", std::string(to_string(t.gate->var))},
                    {"equal", t.gate->equal},
                    {"value", t.gate->value}};
    if (t.kind == TermKind::spline)
      jt["spline"] = {{"transform", transform_name(t.spline.transform)},
                      {"degree", t.spline.degree},
                      {"df", t.spline.df},
                      {"interior_knots", t.spline.interior_knots},
                      {"boundary_knots", {t.spline.lower, t.spline.upper}}};
    terms.push_back(std::move(jt));
  }
  j = {{"format_version", kGlmFormatVersion},
       {"link", m.link == Link::logit ? "logit" : "identity"},
       {"terms", std::move(terms)},
       {"coefficients", std::vector<double>(m.coefficients.data(), m.coefficients.data() + m.coefficients.size())},
       {"dropped", m.dropped},
       {"iterations", m.iterations}};
}

void from_json(const nlohmann::json& j, GlmModel& m) {
  if (j.at("format_version").get<int>() != kGlmFormatVersion)
    throw SchemaError("unsupported GLM format version");
  m = GlmModel{};
  const auto link = j.at("link").get<std::string>();
  if (link != "logit" && link != "identity") throw SchemaError("unknown link " + link);
  m.link = link == "logit" ? Link::logit : Link::identity;
  for (const auto& jt : j.at("terms")) {
    Term t;
    t.name = jt.at("name").get<std::string>();
    t.kind = kind_from(jt.at("kind").get<std::string>());
    t.var = covariate_from(jt.at("var").get<std::string>());
    t.transform = transform_from(jt.at("transform").get<std::string>());
    if (jt.contains("multiplier")) t.multiplier = covariate_from(jt.at("multiplier").get<std::string>());
    if (jt.contains("gate")) {
      const auto& g = jt.at("gate");
      t.gate = Gate{covariate_from(g.at("var").get<std::string>()), g.at("equal").get<bool>(),
                    g.at("value").get<double>()};
    }
    if (t.kind == TermKind::spline) {
      const auto& s = jt.at("spline");
      t.spline.transform = transform_from(s.at("transform").get<std::string>());
      t.spline.degree = s.at("degree").get<int>();
      t.spline.df = s.at("df").get<int>();
      t.spline.interior_knots = s.at("interior_knots").get<std::vector<double>>();
      const auto bounds = s.at("boundary_knots").get<std::vector<double>>();
      if (bounds.size() != 2) throw SchemaError("boundary_knots must have two entries");
      t.spline.lower = bounds[0];
      t.spline.upper = bounds[1];
    }
    m.terms.push_back(std::move(t));
  }
  const auto coef = j.at("coefficients").get<std::vector<double>>();
  if (static_cast<int>(coef.size()) != design_columns(m.terms))
    throw SchemaError("coefficient length does not match design columns");
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  m.dropped = j.at("dropped").get<std::vector<int>>();
  m.iterations = j.value("iterations", 0);
}

}  // namespace fourthdown
