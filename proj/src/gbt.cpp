#include "fourthdown/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fourthdown/common.hpp"

namespace fourthdown {

void FeatureMatrix::push_row(std::span<const double> r) {
  if (cols == 0) cols = r.size();
  if (r.size() != cols) throw InvalidInput("feature row width mismatch");
  values.insert(values.end(), r.begin(), r.end());
}

double Tree::predict(std::span<const double> x) const {
  int node = 0;
  while (feature[node] >= 0) node = x[feature[node]] >= threshold[node] ? right[node] : left[node];
  return value[node];
}

namespace {

double sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

// Finite cut strictly above a and at most b.
double cut_between(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::lowest();
  double m = a / 2.0 + b / 2.0;
  if (!std::isfinite(m) || !(m > a) || m > b) m = std::nextafter(a, std::numeric_limits<double>::infinity());
  return m;
}

}  // namespace

double GbtModel::margin(std::span<const double> x) const {
  double m = base_score;
  for (const auto& t : trees) m += t.predict(x);
  return m;
}

double GbtModel::predict(std::span<const double> x) const {
  const double p = sigmoid(margin(x));
  return std::clamp(p, 1e-15, 1.0 - 1e-15);
}

std::vector<double> GbtModel::gain_importance() const {
  std::vector<double> imp(n_features, 0.0);
  for (const auto& t : trees)
    for (std::size_t k = 0; k < t.feature.size(); ++k)
      if (t.feature[k] >= 0) imp[t.feature[k]] += t.gain[k];
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0)
    for (auto& v : imp) v /= total;
  return imp;
}

std::vector<std::vector<double>> compute_cuts(const FeatureMatrix& x, int max_bins) {
  if (max_bins < 2 || max_bins > 65535) throw InvalidInput("max_bins must lie in [2, 65535]");
  std::vector<std::vector<double>> cuts(x.cols);
  const std::size_t n = x.rows();
  std::vector<double> col;
  for (std::size_t c = 0; c < x.cols; ++c) {
    col.clear();
    for (std::size_t r = 0; r < n; ++r) {
      const double v = x.values[r * x.cols + c];
      if (!std::isnan(v)) col.push_back(v);
    }
    std::sort(col.begin(), col.end());
    std::vector<double> uniq = col;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    auto& out = cuts[c];
    if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
      for (std::size_t k = 1; k < uniq.size(); ++k) out.push_back(cut_between(uniq[k - 1], uniq[k]));
    } else {
      for (int k = 1; k < max_bins; ++k) {
        const double v = col[static_cast<std::size_t>(static_cast<double>(k) * col.size() / max_bins)];
        const auto j = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), v) - uniq.begin());
        if (j == 0) continue;
        const double cut = cut_between(uniq[j - 1], uniq[j]);
        if (out.empty() || cut > out.back()) out.push_back(cut);
      }
    }
  }
  return cuts;
}

BinnedMatrix bin_features(const FeatureMatrix& x, const std::vector<std::vector<double>>& cuts) {
  BinnedMatrix m;
  m.rows = x.rows();
  m.cols = x.cols;
  m.codes.resize(m.rows * m.cols);
  m.offsets.assign(1, 0);
  for (std::size_t c = 0; c < m.cols; ++c) {
    m.offsets.push_back(m.offsets.back() + cuts[c].size() + 1);
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double v = x.values[r * x.cols + c];
      std::uint16_t code = 0;
      if (!std::isnan(v))
        code = static_cast<std::uint16_t>(std::upper_bound(cuts[c].begin(), cuts[c].end(), v) - cuts[c].begin());
      m.codes[c * m.rows + r] = code;
    }
  }
  return m;
}

double log_loss(std::span<const double> p, std::span<const double> y, std::span<const double> w) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    const double q = std::clamp(p[i], 1e-15, 1.0 - 1e-15);
    num -= wi * (y[i] * std::log(q) + (1.0 - y[i]) * std::log1p(-q));
    den += wi;
  }
  return den > 0.0 ? num / den : 0.0;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& bins, const std::vector<std::vector<double>>& cuts, const GbtParams& params,
              std::span<const GradPair> gh, std::span<double> margins)
      : bins_(bins), cuts_(cuts), params_(params), gh_(gh), margins_(margins) {}

  Tree build(std::vector<std::uint32_t> rows) {
    tree_ = Tree{};
    std::vector<GradPair> hist(bins_.total_bins());
    histogram(rows, hist);
    GradPair sum;
    for (auto r : rows) {
      sum.g += gh_[r].g;
      sum.h += gh_[r].h;
    }
    const double inf = std::numeric_limits<double>::infinity();
    grow(rows, hist, sum, -inf, inf, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double gain = 0.0;
    int feature = -1;
    int bin = -1;
    double wl = 0.0, wr = 0.0;
  };

  void histogram(std::span<const std::uint32_t> rows, std::span<GradPair> out) const {
    if (params_.parallel) build_histogram_parallel(bins_, rows, gh_, out);
    else build_histogram_serial(bins_, rows, gh_, out);
  }

  double weight(const GradPair& s, double lower, double upper) const {
    return std::clamp(-s.g / (s.h + params_.lambda), lower, upper);
  }

  double objective(const GradPair& s, double w) const {
    return -(2.0 * s.g * w + (s.h + params_.lambda) * w * w);
  }

  int new_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(0.0);
    tree_.gain.push_back(0.0);
    return static_cast<int>(tree_.feature.size()) - 1;
  }

  Split best_split(const std::vector<GradPair>& hist, const GradPair& sum, double lower, double upper) const {
    Split best;
    const double parent = objective(sum, weight(sum, lower, upper));
    for (std::size_t f = 0; f < bins_.cols; ++f) {
      const int mono = params_.monotone.empty() ? 0 : params_.monotone[f];
      const std::size_t lo = bins_.offsets[f], hi = bins_.offsets[f + 1];
      GradPair left;
      for (std::size_t b = lo; b + 1 < hi; ++b) {
        left.g += hist[b].g;
        left.h += hist[b].h;
        const GradPair right{sum.g - left.g, sum.h - left.h};
        if (left.h < params_.min_child_weight) continue;
        if (right.h < params_.min_child_weight) break;
        const double wl = weight(left, lower, upper), wr = weight(right, lower, upper);
        if (mono > 0 && wl > wr) continue;
        if (mono < 0 && wl < wr) continue;
        const double gain = objective(left, wl) + objective(right, wr) - parent;
        if (gain > best.gain) best = {gain, static_cast<int>(f), static_cast<int>(b - lo), wl, wr};
      }
    }
    return best;
  }

  int make_leaf(std::span<const std::uint32_t> rows, const GradPair& sum, double lower, double upper) {
    const int node = new_node();
    const double v = weight(sum, lower, upper) * params_.learning_rate;
    tree_.value[node] = v;
    for (auto r : rows) margins_[r] += v;
    return node;
  }

  int grow(std::vector<std::uint32_t>& rows, std::vector<GradPair>& hist, const GradPair& sum, double lower,
           double upper, int depth) {
    if (depth >= params_.max_depth || sum.h < 2.0 * params_.min_child_weight)
      return make_leaf(rows, sum, lower, upper);
    const Split s = best_split(hist, sum, lower, upper);
    if (s.feature < 0) return make_leaf(rows, sum, lower, upper);

    const int node = new_node();
    tree_.feature[node] = s.feature;
    tree_.threshold[node] = cuts_[s.feature][s.bin];
    tree_.gain[node] = s.gain;

    std::vector<std::uint32_t> left_rows, right_rows;
    const std::uint16_t* col = bins_.codes.data() + static_cast<std::size_t>(s.feature) * bins_.rows;
    GradPair lsum, rsum;
    for (auto r : rows) {
      if (col[r] <= s.bin) {
        left_rows.push_back(r);
        lsum.g += gh_[r].g;
        lsum.h += gh_[r].h;
      } else {
        right_rows.push_back(r);
        rsum.g += gh_[r].g;
        rsum.h += gh_[r].h;
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    std::vector<GradPair> lhist(hist.size()), rhist(hist.size());
    if (left_rows.size() <= right_rows.size()) {
      histogram(left_rows, lhist);
      subtract_histogram(hist, lhist, rhist);
    } else {
      histogram(right_rows, rhist);
      subtract_histogram(hist, rhist, lhist);
    }
    hist.clear();
    hist.shrink_to_fit();

    double l_lo = lower, l_hi = upper, r_lo = lower, r_hi = upper;
    const int mono = params_.monotone.empty() ? 0 : params_.monotone[s.feature];
    const double mid = 0.5 * (s.wl + s.wr);
    if (mono > 0) {
      l_hi = mid;
      r_lo = mid;
    } else if (mono < 0) {
      l_lo = mid;
      r_hi = mid;
    }
    const int l = grow(left_rows, lhist, lsum, l_lo, l_hi, depth + 1);
    tree_.left[node] = l;
    const int r = grow(right_rows, rhist, rsum, r_lo, r_hi, depth + 1);
    tree_.right[node] = r;
    return node;
  }

  const BinnedMatrix& bins_;
  const std::vector<std::vector<double>>& cuts_;
  const GbtParams& params_;
  std::span<const GradPair> gh_;
  std::span<double> margins_;
  Tree tree_;
};

}  // namespace

GbtModel train_gbt(const FeatureMatrix& x, std::span<const double> y, std::span<const double> w,
                   const GbtParams& params, const TuneSet* tune, TrainReport* report) {
  const std::size_t n = x.rows();
  if (n == 0) throw FitError("boosted trees: empty training set");
  if (y.size() != n || (!w.empty() && w.size() != n)) throw InvalidInput("boosted trees: label/weight length mismatch");
  if (!params.monotone.empty() && params.monotone.size() != x.cols)
    throw InvalidInput("boosted trees: monotone constraint length mismatch");
  if (params.max_depth < 1 || params.n_trees < 0 || !(params.learning_rate > 0.0))
    throw InvalidInput("boosted trees: invalid hyperparameters");

  GbtModel model;
  model.n_features = x.cols;
  model.learning_rate = params.learning_rate;
  model.monotone = params.monotone.empty() ? std::vector<int>(x.cols, 0) : params.monotone;

  double wsum = 0.0, ysum = 0.0;
  std::vector<std::uint32_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    if (!(wi >= 0.0)) throw InvalidInput("boosted trees: negative weight");
    if (wi > 0.0) active.push_back(static_cast<std::uint32_t>(i));
    wsum += wi;
    ysum += wi * y[i];
  }
  if (!(wsum > 0.0)) throw FitError("boosted trees: zero total weight");
  const double mean = std::clamp(ysum / wsum, 1e-6, 1.0 - 1e-6);
  model.base_score = std::log(mean / (1.0 - mean));

  const auto cuts = compute_cuts(x, params.max_bins);
  const auto bins = bin_features(x, cuts);
  std::vector<double> margins(n, model.base_score);
  std::vector<GradPair> gh(n);

  std::vector<double> tune_margin, tune_p;
  const bool early = tune != nullptr && tune->x != nullptr && tune->x->rows() > 0;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_round = 0;
  if (early) {
    tune_margin.assign(tune->x->rows(), model.base_score);
    tune_p.assign(tune->x->rows(), sigmoid(model.base_score));
    best_loss = log_loss(tune_p, tune->y, tune->w);
    if (report) report->tune_curve.push_back(best_loss);
  }

  for (int round = 1; round <= params.n_trees; ++round) {
    for (auto i : active) {
      const double wi = w.empty() ? 1.0 : w[i];
      const double p = sigmoid(margins[i]);
      gh[i] = {wi * (p - y[i]), wi * std::max(p * (1.0 - p), 1e-16)};
    }
    TreeBuilder builder(bins, cuts, params, gh, margins);
    model.trees.push_back(builder.build(active));
    if (!early) continue;
    const Tree& t = model.trees.back();
    for (std::size_t i = 0; i < tune_margin.size(); ++i) {
      tune_margin[i] += t.predict(tune->x->row(i));
      tune_p[i] = sigmoid(tune_margin[i]);
    }
    const double loss = log_loss(tune_p, tune->y, tune->w);
    if (report) report->tune_curve.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_round = round;
    } else if (round - best_round >= params.early_stopping_rounds) {
      break;
    }
  }
  if (early) model.trees.resize(static_cast<std::size_t>(best_round));
  if (report) {
    report->best_iteration = static_cast<int>(model.trees.size());
    report->best_tune_logloss = early ? best_loss : 0.0;
  }
  return model;
}

namespace {

struct Range {
  double lo, hi;
};

Range audit_node(const Tree& t, const std::vector<int>& mono, int node, bool& ok, std::string* why) {
  if (t.feature[node] < 0) return {t.value[node], t.value[node]};
  const Range l = audit_node(t, mono, t.left[node], ok, why);
  const Range r = audit_node(t, mono, t.right[node], ok, why);
  const int m = mono[t.feature[node]];
  const bool bad = (m > 0 && l.hi > r.lo) || (m < 0 && l.lo < r.hi);
  if (bad && ok) {
    ok = false;
    if (why) *why = "node " + std::to_string(node) + " on feature " + std::to_string(t.feature[node]) +
                    " violates its monotone constraint";
  }
  return {std::min(l.lo, r.lo), std::max(l.hi, r.hi)};
}

}  // namespace

bool audit_monotone(const GbtModel& model, std::string* why) {
  bool ok = true;
  for (std::size_t k = 0; k < model.trees.size() && ok; ++k) {
    audit_node(model.trees[k], model.monotone, 0, ok, why);
    if (!ok && why) *why = "tree " + std::to_string(k) + ": " + *why;
  }
  return ok;
}

void to_json(nlohmann::json& j, const GbtModel& m) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : m.trees)
    trees.push_back({{"feature", t.feature},
                     {"threshold", t.threshold},
                     {"left", t.left},
                     {"right", t.right},
                     {"value", t.value},
                     {"gain", t.gain}});
  j = {{"format_version", kGbtFormatVersion},
       {"loss", "logistic"},
       {"n_features", m.n_features},
       {"base_score", m.base_score},
       {"learning_rate", m.learning_rate},
       {"monotone", m.monotone},
       {"trees", std::move(trees)}};
}

void from_json(const nlohmann::json& j, GbtModel& m) {
  if (j.at("format_version").get<int>() != kGbtFormatVersion) throw SchemaError("unsupported tree model version");
  m = GbtModel{};
  m.n_features = j.at("n_features").get<std::size_t>();
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.monotone = j.at("monotone").get<std::vector<int>>();
  if (m.monotone.size() != m.n_features) throw SchemaError("monotone length mismatch");
  for (const auto& jt : j.at("trees")) {
    Tree t;
    t.feature = jt.at("feature").get<std::vector<int>>();
    t.threshold = jt.at("threshold").get<std::vector<double>>();
    t.left = jt.at("left").get<std::vector<int>>();
    t.right = jt.at("right").get<std::vector<int>>();
    t.value = jt.at("value").get<std::vector<double>>();
    t.gain = jt.at("gain").get<std::vector<double>>();
    const auto nodes = t.feature.size();
    if (nodes == 0 || t.threshold.size() != nodes || t.left.size() != nodes || t.right.size() != nodes ||
        t.value.size() != nodes || t.gain.size() != nodes)
      throw SchemaError("malformed tree");
    for (std::size_t k = 0; k < nodes; ++k) {
      if (t.feature[k] < 0) continue;
      if (static_cast<std::size_t>(t.feature[k]) >= m.n_features || t.left[k] <= static_cast<int>(k) ||
          t.right[k] <= static_cast<int>(k) || t.left[k] >= static_cast<int>(nodes) ||
          t.right[k] >= static_cast<int>(nodes))
        throw SchemaError("malformed tree links");
    }
    m.trees.push_back(std::move(t));
  }
}

}  // namespace fourthdown
