// Desk-scale acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fourthdown/bootstrap_uq.hpp"
#include "fourthdown/coach_model.hpp"
#include "fourthdown/common.hpp"
#include "fourthdown/quality_metrics.hpp"
#include "fourthdown/spline_glm.hpp"
#include "fourthdown/synthetic_oracle.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fourthdown;

namespace {

struct Outcome {
  enum class Status { pass, fail, skip } status = Status::fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::Status::pass : Outcome::Status::fail, std::move(detail)}; }

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

// ---------------------------------------------------------------------------

Outcome glm_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  double worst_ols = 0.0, worst_logit = 0.0;
  bool converged = true;
  for (int rep = 0; rep < 20; ++rep) {
    const int rows = 100 + static_cast<int>(rng() % 401);
    const int cols = 2 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd yo(rows), yl(rows);
    std::vector<double> beta(cols), w(rows);
    for (auto& b : beta) b = 0.6 * nd(rng);
    oracle::Matrix xr(rows, oracle::Vector(cols));
    oracle::Vector yor(rows), ylr(rows);
    for (int i = 0; i < rows; ++i) {
      double eta = 0.0;
      for (int j = 0; j < cols; ++j) {
        X(i, j) = j == 0 ? 1.0 : nd(rng);
        xr[i][j] = X(i, j);
        eta += X(i, j) * beta[j];
      }
      yo[i] = yor[i] = eta + nd(rng);
      yl[i] = ylr[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
      w[i] = 0.5 + u(rng);
    }
    const auto ols = fit_ols(X, yo, w);
    const auto ref_ols = oracle::normal_equations(xr, yor, w);
    for (int j = 0; j < cols; ++j)
      worst_ols = std::max(worst_ols, std::abs(ols.coefficients[j] - ref_ols[j]) / std::max(1.0, std::abs(ref_ols[j])));
    const auto logit = fit_logistic(X, yl, w);
    converged = converged && logit.converged;
    const auto ref_logit = oracle::newton_logistic(xr, ylr, w);
    for (int j = 0; j < cols; ++j) worst_logit = std::max(worst_logit, std::abs(logit.coefficients[j] - ref_logit[j]));
  }
  const double t = seconds_since(t0);
  return verdict(worst_ols <= 1e-8 && worst_logit <= 1e-6 && converged && t < 10.0,
                 fmt("max OLS rel err %.2e, ", worst_ols) + fmt("max logistic err %.2e, ", worst_logit) +
                     fmt("%.1fs (limit 10s)", t));
}

Outcome monotonicity() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0), u01;
  FeatureMatrix x;
  x.cols = 5;
  std::vector<double> y;
  for (int i = 0; i < 20000; ++i) {
    std::vector<double> r(5);
    for (auto& v : r) v = u(rng);
    r[4] = std::floor(4 * (r[4] + 1));
    const double eta = 1.1 * r[0] - 0.9 * r[1] + std::sin(3 * r[2]) + 0.4 * r[3] * r[4] + 0.2 * r[4];
    y.push_back(u01(rng) < 1 / (1 + std::exp(-eta)) ? 1.0 : 0.0);
    x.push_row(r);
  }
  GbtParams p;
  p.max_depth = 4;
  p.n_trees = 100;
  p.min_child_weight = 10;
  p.monotone = {1, -1, 0, 0, 1};
  const auto m = train_gbt(x, y, {}, p);
  std::string why;
  const bool audit = audit_monotone(m, &why);
  std::uniform_real_distribution<double> wide(-1.5, 1.5);
  std::uniform_real_distribution<double> codes(-1.0, 9.0);
  long violations = 0, probes = 0;
  for (int f : {0, 1, 4}) {
    for (int t = 0; t < 10000; ++t) {
      std::vector<double> a(5);
      for (auto& v : a) v = wide(rng);
      a[4] = codes(rng);
      auto b = a;
      b[f] += f == 4 ? std::abs(codes(rng)) : std::abs(wide(rng));
      const double pa = m.predict(a), pb = m.predict(b);
      ++probes;
      if (p.monotone[f] > 0 ? pb < pa : pb > pa) ++violations;
    }
  }
  const double t = seconds_since(t0);
  return verdict(audit && violations == 0 && t < 60.0,
                 std::to_string(violations) + " violations in " + std::to_string(probes) + " probe pairs, audit " +
                     (audit ? "ok" : "failed: " + why) + fmt(", %.1fs (limit 60s)", t));
}

double calibration_error(int games, double* secs) {
  const auto t0 = Clock::now();
  const SyntheticWorld world{WorldConfig{}};
  const auto h = simulate_history(world, games, 1);
  const auto split = make_split(h.plays, {0.5, 0.25, 0.25}, 3);
  const auto train = split_rows(h.plays, split, DatasetSplit::Part::train);
  const auto tune = split_rows(h.plays, split, DatasetSplit::Part::tune);
  const auto tuned = tune_wp(FeatureSet::proposed, h.plays, train, tune);
  const auto pools = filter_training_pools(h.plays);
  const auto q = compute_quality(h.plays, pools);
  DecisionConfig cfg;
  cfg.wp_params = tuned.params;
  const auto model = fit_decision_model(h.plays, pools, q, {}, cfg);
  // fresh first-down states from the same world
  const auto fresh = simulate_history(world, 400, 99);
  std::vector<std::size_t> first;
  for (std::size_t i = 0; i < fresh.plays.size(); ++i)
    if (fresh.plays[i].down == 1) first.push_back(i);
  Rng rng(5);
  double err = 0.0;
  for (int k = 0; k < 2000; ++k) {
    const auto i = first[uniform_index(rng, first.size())];
    err += std::abs(model.wp.predict(wp_input(fresh.plays[i])) - world.true_wp(fresh.states[i]));
  }
  *secs = seconds_since(t0);
  return err / 2000.0;
}

Outcome calibration() {
  double t500 = 0, t2000 = 0;
  const double e500 = calibration_error(500, &t500);
  const double e2000 = calibration_error(2000, &t2000);
  return verdict(e500 < 0.06 && e2000 < 0.04 && t500 + t2000 < 300.0,
                 fmt("mean |wp - oracle| %.4f at 500 games (< 0.06), ", e500) +
                     fmt("%.4f at 2000 games (< 0.04), ", e2000) + fmt("%.0fs (limit 300s)", t500 + t2000));
}

TransitionFunctions stub_transitions(double p_make, double p_convert, double gain) {
  TransitionFunctions t;
  t.expected_punt_yardline = [](double y, double pq) { return 140.0 - y + 2.0 * pq; };
  t.p_make = [p_make](double, double) { return p_make; };
  t.p_convert = [p_convert](double, double, double) { return p_convert; };
  t.gain_success = [gain](double, double, double, double) { return gain; };
  t.gain_failure = [](double, double, double) { return 0.0; };
  return t;
}

Outcome composition() {
  std::mt19937_64 rng(91);
  std::uniform_real_distribution<double> u;
  std::normal_distribution<double> nd;
  const WpFunction half = [](const WpInput&) { return 0.5; };
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    FourthDownState s;
    s.yardline = 1 + static_cast<int>(rng() % 99);
    s.ydstogo = 1 + static_cast<int>(rng() % std::min(15, s.yardline));
    s.game_seconds_remaining = 1 + static_cast<int>(rng() % 3600);
    s.score_differential = static_cast<int>(rng() % 57) - 28;
    s.total_score = static_cast<int>(rng() % 60);
    s.posteam_spread = static_cast<double>(rng() % 29) - 14;
    s.posteam_timeouts = static_cast<int>(rng() % 4);
    s.defteam_timeouts = static_cast<int>(rng() % 4);
    s.receive_2h_ko = static_cast<int>(rng() % 2);
    s.kq = nd(rng);
    s.pq = nd(rng);
    s.delta_tq_off = nd(rng);
    s.delta_tq_def = nd(rng);
    const auto t = stub_transitions(u(rng), u(rng), 1.0 + static_cast<double>(rng() % 20));
    worst = std::max({worst, std::abs(wp_punt(s, t, half).wp - 0.5), std::abs(wp_fg(s, t, half).wp - 0.5),
                      std::abs(wp_go(s, t, half).wp - 0.5)});
  }
  int miss_mismatch = 0;
  for (int y = 1; y <= 50; ++y) {
    FourthDownState s;
    s.yardline = y;
    s.ydstogo = 1;
    if (wp_fg(s, stub_transitions(0.7, 0.5, 5.0), half).miss_yardline != std::min(80, 100 - (y + 7))) ++miss_mismatch;
  }
  return verdict(worst <= 1e-12 && miss_mismatch == 0,
                 fmt("max |wp - 0.5| %.1e over 1000 states, ", worst) + std::to_string(miss_mismatch) +
                     " FG miss yardline mismatches on y in [1, 50]");
}

DecisionValues two_way(double go, double fg) {
  DecisionValues v;
  v.go.wp = go;
  v.fg = FgBranches{};
  v.fg->wp = fg;
  rank_decisions(v);
  return v;
}

Outcome bootstrap_mechanics() {
  std::vector<std::string> problems;
  // hand count on five replicates
  const auto point = two_way(0.60, 0.55);
  const std::vector<DecisionValues> five = {two_way(0.62, 0.50), two_way(0.50, 0.54), two_way(0.58, 0.57),
                                            two_way(0.40, 0.45), two_way(0.70, 0.60)};
  const auto r5 = summarize(point, five);
  // Go wins in replicates 0, 2, 4 -> 3 of 5; gains 0.12, -0.04, 0.01, -0.05, 0.10
  if (r5.boot_pct != 60.0) problems.push_back("B=5 boot% " + std::to_string(r5.boot_pct));
  if (std::abs(r5.ci_lo + 0.05) > 1e-12 || std::abs(r5.ci_hi - 0.12) > 1e-12) problems.push_back("B=5 interval");
  if (r5.bin != ConfidenceBin::uncertain) problems.push_back("B=5 bin");

  // lattice of boot% values
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.3, 0.7);
  int off_lattice = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t B = 1 + rng() % 120;
    std::vector<DecisionValues> reps;
    for (std::size_t b = 0; b < B; ++b) reps.push_back(two_way(u(rng), u(rng)));
    const double pct = summarize(two_way(u(rng), u(rng)), reps).boot_pct;
    const double k = pct * static_cast<double>(B) / 100.0;
    if (std::abs(k - std::round(k)) > 1e-9 || pct != 100.0 * std::round(k) / static_cast<double>(B)) ++off_lattice;
  }
  if (off_lattice) problems.push_back(std::to_string(off_lattice) + " boot% values off the k*100/B lattice");

  // B = 101: gains are a shuffled 0..100 ladder, so the 6th and 96th order statistics are known
  std::vector<int> ladder(101);
  std::iota(ladder.begin(), ladder.end(), 0);
  std::shuffle(ladder.begin(), ladder.end(), rng);
  std::vector<DecisionValues> reps;
  for (int k : ladder) reps.push_back(two_way(0.5 + 0.001 * k, 0.5));
  const auto r101 = summarize(two_way(0.6, 0.5), reps);
  std::vector<double> sorted = r101.gains;
  std::sort(sorted.begin(), sorted.end());
  if (ci_ranks(101, 0.9) != std::pair<std::size_t, std::size_t>{6, 96}) problems.push_back("ci_ranks(101)");
  if (r101.ci_lo != sorted[5] || r101.ci_hi != sorted[95]) problems.push_back("B=101 interval endpoints");
  if (std::abs(r101.ci_lo - 0.005) > 1e-12 || std::abs(r101.ci_hi - 0.095) > 1e-12) problems.push_back("B=101 values");

  std::string detail = "B=5 hand count boot% 60 CI [-0.05, 0.12]; B=101 CI = sorted gains 6 and 96";
  for (const auto& p : problems) detail += "; " + p;
  return verdict(problems.empty(), detail);
}

struct Probe {
  OracleState state;
  int total_score;
};

std::vector<Probe> coverage_probes(const SyntheticWorld& world) {
  const auto h = simulate_history(world, 200, 4242);
  std::vector<Probe> out;
  for (std::size_t i = 0; i < h.plays.size() && out.size() < 100; ++i)
    if (h.states[i].down == 4 && h.states[i].steps >= 1) out.push_back({h.states[i], h.plays[i].total_score});
  return out;
}

struct CoverageResult {
  double coverage = 0.0;
  double seconds = 0.0;
  double mean_width = 0.0;
};

// Each history gets its own point model; the oracle gain is that of the decision the model picks.
CoverageResult coverage(int histories, double fraction) {
  const auto t0 = Clock::now();
  const SyntheticWorld world{WorldConfig{}};
  const auto probes = coverage_probes(world);
  DecisionConfig cfg;
  cfg.wp_params.max_depth = 4;
  cfg.wp_params.n_trees = 150;
  cfg.wp_params.learning_rate = 0.1;
  cfg.wp_params.min_child_weight = 100;
  long covered = 0, total = 0;
  double width = 0.0;
  for (int h = 0; h < histories; ++h) {
    const auto hist = simulate_history(world, 300, 1000 + static_cast<std::uint64_t>(h));
    const auto pools = filter_training_pools(hist.plays);
    const auto q = compute_quality(hist.plays, pools);
    const auto e = fit_ensemble(hist.plays, pools, q, {51, fraction, static_cast<std::uint64_t>(h)}, cfg);
    for (const auto& p : probes) {
      const auto st = world.engine_state(p.state, p.total_score, e.point.tq_scale);
      const auto r = uncertainty(e, st, 0.9);
      const auto o = world.fourth_down_values(p.state);
      double alt = -1.0;
      for (auto d : kDecisions)
        if (d != r.decision && o.value(d)) alt = std::max(alt, *o.value(d));
      const double g = *o.value(r.decision) - alt;
      covered += g >= r.ci_lo - 1e-12 && g <= r.ci_hi + 1e-12;
      width += r.ci_hi - r.ci_lo;
      ++total;
    }
  }
  return {static_cast<double>(covered) / static_cast<double>(total), seconds_since(t0),
          width / static_cast<double>(total)};
}

Outcome coverage_f1() {
  const auto c = coverage(50, 1.0);
  return verdict(c.coverage >= 0.80 && c.coverage <= 0.98 && c.seconds < 1800.0,
                 fmt("90%% CI covers the oracle effect size in %.1f%% of 50 x 100 probes (target 80-98%%), ",
                     100.0 * c.coverage) +
                     fmt("mean width %.3f, ", c.mean_width) + fmt("%.0fs (limit 1800s)", c.seconds));
}

Outcome coverage_f05() {
  const auto c = coverage(20, 0.5);
  return {Outcome::Status::skip, fmt("informational: f = 0.5 covers %.1f%% over 20 histories, ", 100.0 * c.coverage) +
                                     fmt("mean width %.3f", c.mean_width)};
}

Outcome stability() {
  const auto t0 = Clock::now();
  const auto h = simulate_history(SyntheticWorld{WorldConfig{}}, 250, 606);
  const auto pools = filter_training_pools(h.plays);
  const auto q = compute_quality(h.plays, pools);
  std::vector<FourthDownState> states;
  for (std::size_t i = 0; i < h.plays.size() && states.size() < 150; ++i)
    if (h.plays[i].down == 4 && i % 3 == 0) states.push_back(state_from_play(h.plays[i], q, i));
  DecisionConfig cfg;
  cfg.wp_params.max_depth = 3;
  cfg.wp_params.n_trees = 40;
  StabilityOptions opts;
  opts.Bs = {11, 51};
  opts.M = 20;
  opts.seed = 12;
  const auto rows = stability_analysis(h.plays, pools, q, states, cfg, opts);
  std::ostringstream hist;
  write_stability_histogram(hist, rows);
  // histogram: header, 20 bins per B, counts sum to the number of states
  std::istringstream in(hist.str());
  std::string line;
  std::getline(in, line);
  bool well_formed = line == "B,bin_lo,bin_hi,count";
  std::map<int, std::size_t> counts;
  std::map<int, int> bins;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string b, lo, hi, c;
    if (!std::getline(ls, b, ',') || !std::getline(ls, lo, ',') || !std::getline(ls, hi, ',') ||
        !std::getline(ls, c)) {
      well_formed = false;
      break;
    }
    counts[std::stoi(b)] += std::stoul(c);
    ++bins[std::stoi(b)];
    well_formed = well_formed && std::stod(lo) < std::stod(hi) && std::stod(lo) >= 0.0 && std::stod(hi) <= 1.0;
  }
  for (int B : opts.Bs) well_formed = well_formed && counts[B] == states.size() && bins[B] > 0;
  const bool ordered = rows.size() == 2 && rows[1].p_bar >= rows[0].p_bar - 0.02;
  return verdict(ordered && well_formed,
                 fmt("p_bar %.3f at B=11, ", rows.at(0).p_bar) + fmt("%.3f at B=51 ", rows.at(1).p_bar) +
                     "(M=20, " + std::to_string(states.size()) + " plays), histogram " +
                     (well_formed ? "well-formed" : "malformed") + fmt(", %.0fs", seconds_since(t0)));
}

Outcome fg_shrinkage() {
  const auto h = simulate_history(SyntheticWorld{WorldConfig{}}, 300, 707);
  const auto pools = filter_training_pools(h.plays);
  const auto q = compute_quality(h.plays, pools);
  DecisionConfig cfg;
  cfg.wp_params.n_trees = 20;
  const auto m = fit_decision_model(h.plays, pools, q, {}, cfg);
  const double p85 = m.transitions.p_make(85, 0.0);
  return verdict(p85 < 0.01, fmt("P(make | yardline 85, kq 0) = %.2e on ", p85) +
                                 std::to_string(pools.field_goal.size()) + " synthetic attempts + 500 imputed misses");
}

Outcome quality() {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd(0.0, 0.5);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> r(1 + rng() % 400);
    for (auto& v : r) v = nd(rng);
    for (auto p : {kKickerQuality, kPunterQuality}) {
      const auto got = rolling_quality(r, p);
      const auto ref = oracle::direct_rolling_quality(r, p.gamma, p.alpha);
      for (std::size_t i = 0; i < r.size(); ++i) worst = std::max(worst, std::abs(got[i] - ref[i]));
    }
  }
  // a residual 45 attempts back carries half the weight of the latest one
  std::vector<double> old(47, 0.0), recent(47, 0.0);
  old[0] = 1.0;
  recent[45] = 1.0;
  const double ratio = rolling_quality(old, kKickerQuality)[46] / rolling_quality(recent, kKickerQuality)[46];
  const auto raw = team_quality_raw(-6.0, 44.0);
  const auto raw2 = team_quality_raw(3.5, 47.0);
  const bool tq = raw.delta_tq_off == 25.0 && raw.delta_tq_def == 19.0 && raw2.delta_tq_off == 21.75 &&
                  raw2.delta_tq_def == 25.25;
  return verdict(worst <= 1e-12 && std::abs(ratio - 0.5) < 0.01 && tq,
                 fmt("max |rolling - direct| %.1e, ", worst) + fmt("weight ratio at lag 45 %.4f, ", ratio) +
                     "team-quality arithmetic " + (tq ? "exact" : "wrong"));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Every file under `dir` except run manifests (they record wall time).
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.find("manifest.json") != std::string::npos && name != "manifest.json") continue;
    if (name == "run_manifest.json") continue;
    out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

Outcome cli_determinism() {
  const std::string cli = FOURTHDOWN_CLI_PATH;
  const auto root = fs::temp_directory_path() / ("fourthdown_acceptance_" + std::to_string(::getpid()));
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const auto dir = root / ("run" + std::to_string(run));
    fs::create_directories(dir);
    const std::string d = dir.string();
    const std::string quiet = " --log-level error ";
    const std::vector<std::string> cmds = {
        cli + quiet + "simulate --games 300 --seed 17 --out " + d + "/plays.csv",
        cli + quiet + "fit --data " + d + "/plays.csv --trees 40 --out " + d + "/model.json --params-out " + d +
            "/params.json",
        cli + quiet + "bootstrap --data " + d + "/plays.csv --params " + d + "/params.json --B 11 --seed 5 --out " +
            d + "/ens",
        cli + quiet + "recommend --ensemble " + d + "/ens --yardline 38 --ydstogo 3 --seconds 600 --score-diff -4 " +
            "--spread 1.5 --out " + d + "/rec1.txt --gains-out " + d + "/gains1.csv",
        cli + quiet + "recommend --ensemble " + d + "/ens --yardline 38 --ydstogo 3 --seconds 600 --score-diff -4 " +
            "--spread 1.5 --out " + d + "/rec2.txt --gains-out " + d + "/gains2.csv"};
    for (const auto& c : cmds) {
      if (std::system((c + " > /dev/null").c_str()) != 0) {
        fs::remove_all(root);
        return verdict(false, "command failed: " + c);
      }
    }
    runs.push_back(snapshot(dir));
  }
  fs::remove_all(root);
  const bool same_runs = runs[0] == runs[1];
  const bool same_recs = runs[0].at("rec1.txt") == runs[0].at("rec2.txt") &&
                         runs[0].at("gains1.csv") == runs[0].at("gains2.csv");
  return verdict(same_runs && same_recs && runs[0].size() >= 16,
                 std::to_string(runs[0].size()) + " output files compared across two runs: " +
                     (same_runs ? "byte-identical" : "differ") + ", repeated recommend " +
                     (same_recs ? "identical" : "differs"));
}

Outcome integration() {
  const char* csv = std::getenv("FOURTHDOWN_REAL_CSV");
  if (!csv || !*csv) return {Outcome::Status::skip, "set FOURTHDOWN_REAL_CSV to run the real-data tier"};
  const char* colmap = std::getenv("FOURTHDOWN_REAL_COLMAP");
  std::ifstream in(csv, std::ios::binary);
  if (!in) return verdict(false, std::string("cannot read ") + csv);
  auto parsed = parse_plays(in, colmap && *colmap ? ColumnMap::from_file(colmap) : ColumnMap{});
  const auto& plays = parsed.plays;
  std::vector<std::string> problems;

  const auto split = make_split(plays, {}, 0);
  const auto contest = run_contest(plays, split);
  auto ll = [&](const std::string& prefix) {
    for (const auto& r : contest)
      if (r.name.rfind(prefix, 0) == 0) return r.logloss;
    return std::nan("");
  };
  const double proposed = ll("Proposed"), ln = ll("Lock-Nettleton"), bw = ll("Baldwin"), spread = ll("Pre-game"),
               coin = ll("Fair coin");
  if (!(proposed < ln && ln < bw && bw < spread && spread < coin)) problems.push_back("contest ordering");
  if (std::abs(proposed - 0.440) > 0.02) problems.push_back(fmt("proposed log-loss %.3f", proposed));

  const int B = std::getenv("FOURTHDOWN_REAL_B") ? std::atoi(std::getenv("FOURTHDOWN_REAL_B")) : 101;
  const auto pools = filter_training_pools(plays);
  const auto q = compute_quality(plays, pools);
  const auto e = fit_ensemble(plays, pools, q, {B, 1.0, 0}, DecisionConfig{});
  std::vector<PlayRecord> kept;
  std::vector<FourthDownState> states;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& p = plays[i];
    if (p.down != 4 || p.season < 2018 || p.season > 2022 || p.ydstogo > p.yardline) continue;
    auto s = state_from_play(p, q, i);
    if (!validation_errors(s).empty()) continue;
    kept.push_back(p);
    states.push_back(s);
  }
  const auto reports = uncertainty_batch(e, states);
  const auto over = overconfidence_summary(reports);
  if (std::abs(over.overall.confident - 48.0) > 5.0) problems.push_back(fmt("confident %.1f%%", over.overall.confident));
  if (std::abs(over.overall.uncertain - 27.0) > 5.0) problems.push_back(fmt("uncertain %.1f%%", over.overall.uncertain));
  std::vector<PlayRecord> known;
  std::vector<UncertaintyReport> known_reports;
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (actual_decision(kept[i])) {
      known.push_back(kept[i]);
      known_reports.push_back(reports[i]);
    }
  const auto agree = coach_agreement(known, known_reports);
  const double kick = 100.0 * agree.kick_agreement.value_or(0.0), go = 100.0 * agree.go_agreement.value_or(0.0);
  if (std::abs(kick - 91.0) > 5.0) problems.push_back(fmt("kick agreement %.1f%%", kick));
  if (std::abs(go - 49.0) > 5.0) problems.push_back(fmt("go agreement %.1f%%", go));
  std::string detail = fmt("log-loss %.3f, ", proposed) +
                       fmt("confident %.1f%% / uncertain %.1f%%, ", over.overall.confident, over.overall.uncertain) +
                       fmt("kick/go agreement %.1f%% / %.1f%%", kick, go);
  for (const auto& p : problems) detail += "; off target: " + p;
  return verdict(problems.empty(), detail);
}

}  // namespace

int main(int argc, char** argv) {
  set_log_level(LogLevel::error);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"glm-oracle-equivalence", glm_oracle},
      {"gbt-monotonicity", monotonicity},
      {"wp-calibration-vs-oracle", calibration},
      {"composition-identities", composition},
      {"bootstrap-mechanics", bootstrap_mechanics},
      {"bootstrap-coverage", coverage_f1},
      {"bootstrap-coverage-f0.5", coverage_f05},
      {"stability-analysis", stability},
      {"fg-shrinkage", fg_shrinkage},
      {"quality-metrics", quality},
      {"cli-determinism", cli_determinism},
      {"integration-real-data", integration},
  };
  // optional name filter: acceptance [substring]
  const std::string filter = argc > 1 ? argv[1] : "";
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    if (!filter.empty() && name.find(filter) == std::string::npos) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = verdict(false, std::string("threw: ") + e.what());
    }
    const char* tag = o.status == Outcome::Status::pass ? "PASS" : o.status == Outcome::Status::skip ? "SKIP" : "FAIL";
    failures += o.status == Outcome::Status::fail;
    std::printf("%s %-26s %s [%.1fs]\n", tag, name.c_str(), o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
  return failures ? 1 : 0;
}
