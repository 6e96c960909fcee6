#include "fourthdown/bootstrap_uq.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fourthdown/common.hpp"

namespace fourthdown {

std::uint64_t replicate_seed(std::uint64_t seed, std::size_t index, int attempt) {
  const std::uint64_t s = mix_seed(seed, index);
  return attempt == 0 ? s : mix_seed(s, static_cast<std::uint64_t>(attempt));
}

std::vector<double> resample_weights(const ClusterIndex& clusters, std::size_t n_plays, double fraction,
                                     std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw InvalidInput("bootstrap fraction must lie in [0, 1]");
  const double f = fraction;
  std::vector<double> w(n_plays, 0.0);
  const std::size_t G = clusters.games.size();
  if (G == 0) return w;
  Rng rng(seed);
  std::vector<int> m(G, 0);
  for (std::size_t k = 0; k < G; ++k) ++m[uniform_index(rng, G)];

  std::vector<int> drive_count;
  for (std::size_t g = 0; g < G; ++g) {
    const auto& drives = clusters.games[g].drives;
    const std::size_t D = drives.size();
    drive_count.assign(D, 0);
    for (int copy = 0; copy < m[g]; ++copy)
      for (std::size_t k = 0; k < D; ++k) ++drive_count[uniform_index(rng, D)];
    const double game_w = f * m[g] + (1.0 - f);
    for (std::size_t d = 0; d < D; ++d) {
      const double mean_drive = m[g] > 0 ? static_cast<double>(drive_count[d]) / m[g] : 1.0;
      const double pw = game_w * (f * mean_drive + (1.0 - f));
      for (std::size_t i : drives[d]) w.at(i) = pw;
    }
  }
  return w;
}

std::vector<double> resample(std::span<const PlayRecord> plays, const ResamplePlan& plan,
                             std::size_t replicate_index) {
  return resample_weights(build_cluster_index(plays), plays.size(), plan.fraction,
                          replicate_seed(plan.seed, replicate_index));
}

namespace {

std::string fingerprint(std::span<const PlayRecord> plays) {
  std::ostringstream os;
  write_plays(os, plays);
  return sha256_hex(os.str());
}

}  // namespace

BootstrapEnsemble fit_ensemble(std::span<const PlayRecord> plays, const TrainingPools& pools,
                               const QualityTables& quality, const ResamplePlan& plan, const DecisionConfig& config,
                               const EnsembleOptions& options) {
  if (plan.B < 1) throw InvalidInput("B must be at least 1");
  if (!(plan.fraction >= 0.0 && plan.fraction <= 1.0)) throw InvalidInput("bootstrap fraction must lie in [0, 1]");
  BootstrapEnsemble e;
  e.plan = plan;
  e.data_fingerprint = fingerprint(plays);
  e.point = fit_decision_model(plays, pools, quality, {}, config);

  const auto clusters = build_cluster_index(plays);
  const std::size_t B = static_cast<std::size_t>(plan.B);
  e.replicates.resize(B);
  e.replicate_seeds.assign(B, 0);
  std::vector<std::exception_ptr> errors(B);
  std::size_t done = 0;

  const long nB = static_cast<long>(B);
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
  for (long b = 0; b < nB; ++b) {
    const std::size_t idx = static_cast<std::size_t>(b);
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t seed = replicate_seed(plan.seed, idx, attempt);
      try {
        const auto w = resample_weights(clusters, plays.size(), plan.fraction, seed);
        e.replicates[idx] = fit_decision_model(plays, pools, quality, w, config);
        e.replicate_seeds[idx] = seed;
        break;
      } catch (const FitError& err) {
        if (attempt >= options.max_retries) {
          errors[idx] = std::current_exception();
          break;
        }
        log_warn("replicate " + std::to_string(idx) + " failed (" + err.what() + "); redrawing");
      } catch (...) {
        errors[idx] = std::current_exception();
        break;
      }
    }
#pragma omp critical(fourthdown_ensemble_progress)
    {
      ++done;
      if (options.progress) options.progress(done, B);
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);
  return e;
}

std::string_view to_string(ConfidenceBin b) {
  switch (b) {
    case ConfidenceBin::confident: return "confident";
    case ConfidenceBin::lean: return "lean";
    case ConfidenceBin::uncertain: return "uncertain";
  }
  return "uncertain";
}

ConfidenceBin confidence_bin(double boot_pct) {
  if (boot_pct >= 83.0) return ConfidenceBin::confident;
  if (boot_pct >= 67.0) return ConfidenceBin::lean;
  return ConfidenceBin::uncertain;
}

std::pair<std::size_t, std::size_t> ci_ranks(std::size_t B, double level) {
  if (B == 0) throw InvalidInput("empty ensemble");
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("confidence level must lie in (0, 1)");
  const double a = 1.0 - level;
  auto rank = [B](double q) {
    const double r = std::ceil(q * static_cast<double>(B) - 1e-9);
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, B);
  };
  return {rank(a / 2.0), rank(1.0 - a / 2.0)};
}

UncertaintyReport summarize(const DecisionValues& point, std::span<const DecisionValues> replicates, double level) {
  UncertaintyReport r;
  r.decision = point.best;
  r.point_gain = signed_gain(point, point.best);
  r.level = level;
  std::size_t agree = 0;
  for (const auto& v : replicates) {
    r.replicate_decisions.push_back(v.best);
    agree += v.best == point.best;
    r.gains.push_back(signed_gain(v, point.best).value_or(0.0));
  }
  const std::size_t B = replicates.size();
  r.boot_pct = 100.0 * static_cast<double>(agree) / static_cast<double>(B);
  r.bin = confidence_bin(r.boot_pct);
  auto sorted = r.gains;
  std::sort(sorted.begin(), sorted.end());
  const auto [lo, hi] = ci_ranks(B, level);
  r.ci_lo = sorted[lo - 1];
  r.ci_hi = sorted[hi - 1];
  return r;
}

UncertaintyReport uncertainty(const BootstrapEnsemble& e, const FourthDownState& s, double level) {
  const auto point = e.point.evaluate(s);
  std::vector<DecisionValues> reps;
  reps.reserve(e.replicates.size());
  for (const auto& m : e.replicates) reps.push_back(m.evaluate(s));
  return summarize(point, reps, level);
}

std::vector<UncertaintyReport> uncertainty_batch(const BootstrapEnsemble& e, std::span<const FourthDownState> states,
                                                 double level, bool parallel) {
  for (const auto& s : states) validate(s);
  std::vector<UncertaintyReport> out(states.size());
  const long n = static_cast<long>(states.size());
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (long i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = uncertainty(e, states[static_cast<std::size_t>(i)], level);
  return out;
}

void to_json(nlohmann::json& j, const UncertaintyReport& r) {
  std::vector<std::string> decisions;
  for (auto d : r.replicate_decisions) decisions.emplace_back(to_string(d));
  j = {{"decision", to_string(r.decision)},
       {"boot_pct", r.boot_pct},
       {"bin", to_string(r.bin)},
       {"level", r.level},
       {"ci_lo", r.ci_lo},
       {"ci_hi", r.ci_hi},
       {"gains", r.gains},
       {"replicate_decisions", decisions}};
  j["point_gain"] = r.point_gain ? nlohmann::json(*r.point_gain) : nlohmann::json(nullptr);
}

// ---------------------------------------------------------------------------

namespace {

void finish_shares(OverconfidenceBin& b, std::size_t c, std::size_t l, std::size_t u) {
  b.count = c + l + u;
  if (b.count == 0) return;
  const double n = static_cast<double>(b.count);
  b.confident = 100.0 * static_cast<double>(c) / n;
  b.lean = 100.0 * static_cast<double>(l) / n;
  b.uncertain = 100.0 * static_cast<double>(u) / n;
}

}  // namespace

OverconfidenceSummary overconfidence_summary(std::span<const UncertaintyReport> reports) {
  OverconfidenceSummary s;
  const char* labels[] = {"[0,1)", "[1,2)", "[2,3)", "[3,4)", "[4,inf)"};
  std::size_t counts[5][3] = {};
  std::size_t total[3] = {};
  for (const auto& r : reports) {
    if (!r.point_gain) {
      ++s.skipped;
      continue;
    }
    const double pct = 100.0 * *r.point_gain;
    const int bin = std::clamp(static_cast<int>(std::floor(pct)), 0, 4);
    const int cls = static_cast<int>(r.bin);
    ++counts[bin][cls];
    ++total[cls];
  }
  for (int b = 0; b < 5; ++b) {
    OverconfidenceBin ob;
    ob.label = labels[b];
    finish_shares(ob, counts[b][0], counts[b][1], counts[b][2]);
    s.bins.push_back(ob);
  }
  s.overall.label = "all";
  finish_shares(s.overall, total[0], total[1], total[2]);
  return s;
}

void write_overconfidence(std::ostream& out, const OverconfidenceSummary& s) {
  out << "effect_size_pct,count,confident_pct,lean_pct,uncertain_pct\n" << std::fixed << std::setprecision(2);
  auto row = [&](const OverconfidenceBin& b) {
    out << b.label << ',' << b.count << ',' << b.confident << ',' << b.lean << ',' << b.uncertain << '\n';
  };
  for (const auto& b : s.bins) row(b);
  row(s.overall);
  out.unsetf(std::ios::floatfield);
}

std::vector<StabilityRow> stability_analysis(std::span<const PlayRecord> plays, const TrainingPools& pools,
                                             const QualityTables& quality, std::span<const FourthDownState> states,
                                             const DecisionConfig& config, const StabilityOptions& options) {
  if (options.M < 2) throw InvalidInput("stability analysis needs M >= 2");
  if (options.Bs.empty()) throw InvalidInput("no ensemble sizes given");
  for (int B : options.Bs)
    if (B < 1) throw InvalidInput("ensemble sizes must be positive");
  const int maxB = *std::max_element(options.Bs.begin(), options.Bs.end());
  const std::size_t S = states.size();

  const auto point = fit_decision_model(plays, pools, quality, {}, config);
  std::vector<DecisionValues> point_values;
  for (const auto& s : states) point_values.push_back(point.evaluate(s));
  const auto clusters = build_cluster_index(plays);

  // values[m][b][i]
  std::vector<std::vector<std::vector<DecisionValues>>> values(static_cast<std::size_t>(options.M));
  const long total = static_cast<long>(options.M) * maxB;
  for (auto& v : values) v.resize(static_cast<std::size_t>(maxB));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 1) if (options.parallel)
  for (long k = 0; k < total; ++k) {
    const std::size_t m = static_cast<std::size_t>(k / maxB), b = static_cast<std::size_t>(k % maxB);
    const std::uint64_t ens_seed = mix_seed(options.seed, m);
    for (int attempt = 0;; ++attempt) {
      try {
        const auto w = resample_weights(clusters, plays.size(), options.fraction, replicate_seed(ens_seed, b, attempt));
        const auto model = fit_decision_model(plays, pools, quality, w, config);
        auto& out = values[m][b];
        out.clear();
        for (const auto& s : states) out.push_back(model.evaluate(s));
        break;
      } catch (const FitError&) {
        if (attempt < 3) continue;
        errors[static_cast<std::size_t>(k)] = std::current_exception();
        break;
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
        break;
      }
    }
  }
  for (const auto& err : errors)
    if (err) std::rethrow_exception(err);

  std::vector<StabilityRow> rows;
  for (int B : options.Bs) {
    StabilityRow row;
    row.B = B;
    row.p.assign(S, 0.0);
    for (std::size_t i = 0; i < S; ++i) {
      std::size_t counts[3] = {};
      for (std::size_t m = 0; m < values.size(); ++m) {
        std::vector<DecisionValues> reps;
        for (int b = 0; b < B; ++b) reps.push_back(values[m][static_cast<std::size_t>(b)][i]);
        ++counts[static_cast<int>(summarize(point_values[i], reps).bin)];
      }
      row.p[i] = static_cast<double>(*std::max_element(counts, counts + 3)) / static_cast<double>(options.M);
    }
    double sum = 0.0;
    for (double p : row.p) sum += p;
    row.p_bar = S ? sum / static_cast<double>(S) : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_stability(std::ostream& out, std::span<const StabilityRow> rows) {
  out << "B,p_bar\n" << std::setprecision(10);
  for (const auto& r : rows) out << r.B << ',' << r.p_bar << '\n';
}

void write_stability_histogram(std::ostream& out, std::span<const StabilityRow> rows, int bins) {
  if (bins < 1) throw InvalidInput("histogram needs at least one bin");
  out << "B,bin_lo,bin_hi,count\n";
  for (const auto& r : rows) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (double p : r.p) ++counts[static_cast<std::size_t>(std::clamp(static_cast<int>(p * bins), 0, bins - 1))];
    for (int k = 0; k < bins; ++k) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f,%.4f", static_cast<double>(k) / bins, static_cast<double>(k + 1) / bins);
      out << r.B << ',' << buf << ',' << counts[static_cast<std::size_t>(k)] << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kEnsembleFormatVersion = 1;

std::string rep_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu.model", i);
  return buf;
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + p.string());
  out << j.dump() << '\n';
  if (!out) throw SchemaError("failed writing " + p.string());
}

nlohmann::json read_json(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SchemaError("cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(p.string() + ": " + e.what());
  }
}

}  // namespace

void save_ensemble(const std::string& dir, const BootstrapEnsemble& e) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_json(fs::path(dir) / "point.model", e.point);
  for (std::size_t i = 0; i < e.replicates.size(); ++i) write_json(fs::path(dir) / rep_name(i), e.replicates[i]);
  write_json(fs::path(dir) / "manifest.json", {{"format_version", kEnsembleFormatVersion},
                                               {"seed", e.plan.seed},
                                               {"B", e.plan.B},
                                               {"fraction", e.plan.fraction},
                                               {"replicate_seeds", e.replicate_seeds},
                                               {"data_fingerprint", e.data_fingerprint}});
}

BootstrapEnsemble load_ensemble(const std::string& dir) {
  namespace fs = std::filesystem;
  const auto manifest = read_json(fs::path(dir) / "manifest.json");
  try {
    if (manifest.at("format_version").get<int>() != kEnsembleFormatVersion)
      throw SchemaError("unsupported ensemble format version");
    BootstrapEnsemble e;
    e.plan.seed = manifest.at("seed").get<std::uint64_t>();
    e.plan.B = manifest.at("B").get<int>();
    e.plan.fraction = manifest.at("fraction").get<double>();
    e.replicate_seeds = manifest.at("replicate_seeds").get<std::vector<std::uint64_t>>();
    e.data_fingerprint = manifest.at("data_fingerprint").get<std::string>();
    e.point = read_json(fs::path(dir) / "point.model").get<DecisionModel>();
    for (int i = 0; i < e.plan.B; ++i)
      e.replicates.push_back(read_json(fs::path(dir) / rep_name(static_cast<std::size_t>(i))).get<DecisionModel>());
    return e;
  } catch (const nlohmann::json::exception& err) {
    throw SchemaError(dir + ": " + err.what());
  }
}

}  // namespace fourthdown
