// fourthdown: command-line front end for the decision engine.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fourthdown/bootstrap_uq.hpp"
#include "fourthdown/coach_model.hpp"
#include "fourthdown/common.hpp"
#include "fourthdown/kernels.hpp"
#include "fourthdown/service_api.hpp"
#include "fourthdown/synthetic_oracle.hpp"

namespace fs = std::filesystem;
using namespace fourthdown;
using nlohmann::json;

namespace {

/// Bad flag values discovered after parsing; exits 2 like a parse error.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

struct Manifest {
  std::string command;
  std::string config_path;
  json seeds = json::object();
  json inputs = json::object();
  json outputs = json::array();
  json settings = json::object();
  Clock::time_point start = Clock::now();

  void input(const std::string& path) {
    if (fs::is_directory(path)) {
      for (const auto& name : {"manifest.json", "point.model"})
        if (fs::exists(fs::path(path) / name)) inputs[(fs::path(path) / name).string()] = file_sha256((fs::path(path) / name).string());
    } else {
      inputs[path] = file_sha256(path);
    }
  }
  void output(const std::string& path) { outputs.push_back(path); }

  void write(const std::string& path) const {
    const json j = {{"command", command},
                    {"config_path", config_path},
                    {"seeds", seeds},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"settings", settings},
                    {"seconds", std::chrono::duration<double>(Clock::now() - start).count()}};
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write manifest " + path);
    out << j.dump(2) << '\n';
  }
};

std::ofstream open_out(const std::string& path) {
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot write " + path);
  return out;
}

std::vector<PlayRecord> load_plays(const std::string& path, const std::string& colmap) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read " + path);
  const auto schema = colmap.empty() ? ColumnMap{} : ColumnMap::from_file(colmap);
  auto result = parse_plays(in, schema);
  if (!result.rejects.empty())
    log_warn(std::to_string(result.rejects.size()) + " rows rejected while reading " + path);
  if (result.plays.empty()) throw SchemaError(path + " contains no valid plays");
  return std::move(result.plays);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Shared flag groups

struct ModelFlags {
  std::string feature_set = "proposed";
  std::string params_file;
  int trees = 200;
  int depth = 4;
  double learning_rate = 0.1;
  double min_child_weight = 100.0;
  double lambda = 1.0;

  void add(CLI::App* app) {
    app->add_option("--feature-set", feature_set, "WP feature set: proposed, lock_nettleton or baldwin")
        ->capture_default_str();
    app->add_option("--params", params_file, "JSON hyperparameters written by `fit --params-out`");
    app->add_option("--trees", trees, "boosting rounds")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--depth", depth, "tree depth")->capture_default_str()->check(CLI::Range(1, 12));
    app->add_option("--learning-rate", learning_rate)->capture_default_str()->check(CLI::Range(1e-6, 1.0));
    app->add_option("--min-child-weight", min_child_weight)->capture_default_str()->check(CLI::NonNegativeNumber);
    app->add_option("--lambda", lambda, "L2 penalty on leaf values")->capture_default_str()->check(CLI::NonNegativeNumber);
  }

  DecisionConfig config() const {
    DecisionConfig c;
    try {
      c.feature_set = feature_set_from(feature_set);
    } catch (const InvalidInput& e) {
      throw UsageError(e.what());
    }
    c.wp_params.n_trees = trees;
    c.wp_params.max_depth = depth;
    c.wp_params.learning_rate = learning_rate;
    c.wp_params.min_child_weight = min_child_weight;
    c.wp_params.lambda = lambda;
    if (!params_file.empty()) {
      const auto j = read_json_file(params_file);
      try {
        c.feature_set = feature_set_from(j.at("feature_set").get<std::string>());
        c.wp_params.n_trees = j.at("trees").get<int>();
        c.wp_params.max_depth = j.at("depth").get<int>();
        c.wp_params.learning_rate = j.at("learning_rate").get<double>();
        c.wp_params.min_child_weight = j.at("min_child_weight").get<double>();
        c.wp_params.lambda = j.at("lambda").get<double>();
      } catch (const json::exception& e) {
        throw SchemaError(params_file + ": " + e.what());
      }
    }
    return c;
  }
};

json params_json(const DecisionConfig& c) {
  return {{"feature_set", to_string(c.feature_set)},
          {"trees", c.wp_params.n_trees},
          {"depth", c.wp_params.max_depth},
          {"learning_rate", c.wp_params.learning_rate},
          {"min_child_weight", c.wp_params.min_child_weight},
          {"lambda", c.wp_params.lambda}};
}

struct StateFlags {
  int yardline = 0;
  int ydstogo = 0;
  int seconds = 1800;
  int score_diff = 0;
  int total_score = 0;
  double spread = 0.0;
  double total_line = 44.0;
  int timeouts = 3;
  int def_timeouts = 3;
  int receive_2h_ko = 0;
  int home = 0;
  std::string kicker, punter;
  std::optional<double> kq, pq, tq_off, tq_def;

  void add(CLI::App* app, bool position_required) {
    auto* y = app->add_option("--yardline", yardline, "yards from the opponent's end zone (1-99)");
    auto* z = app->add_option("--ydstogo", ydstogo, "yards to a first down");
    if (position_required) {
      y->required();
      z->required();
    }
    app->add_option("--seconds", seconds, "game seconds remaining")->capture_default_str();
    app->add_option("--score-diff", score_diff, "possession team's lead")->capture_default_str();
    app->add_option("--total-score", total_score)->capture_default_str();
    app->add_option("--spread", spread, "possession team's point spread (positive = favored)")->capture_default_str();
    app->add_option("--total-line", total_line)->capture_default_str();
    app->add_option("--timeouts", timeouts)->capture_default_str();
    app->add_option("--def-timeouts", def_timeouts)->capture_default_str();
    app->add_option("--receive-2h-ko", receive_2h_ko)->capture_default_str();
    app->add_option("--home", home)->capture_default_str();
    app->add_option("--kicker", kicker, "kicker id (quality looked up in the model)");
    app->add_option("--punter", punter, "punter id");
    app->add_option("--kq", kq, "standardized kicker quality (overrides --kicker)");
    app->add_option("--pq", pq, "standardized punter quality (overrides --punter)");
    app->add_option("--tq-off", tq_off, "standardized offensive team-quality edge");
    app->add_option("--tq-def", tq_def, "standardized defensive team-quality edge");
  }

  FourthDownState build(const DecisionModel& model, bool with_position) const {
    json j = {{"game_seconds_remaining", seconds}, {"score_differential", score_diff},
              {"total_score", total_score},        {"posteam_spread", spread},
              {"total_points_line", total_line},   {"posteam_timeouts", timeouts},
              {"defteam_timeouts", def_timeouts},  {"receive_2h_ko", receive_2h_ko},
              {"home", home}};
    j["yardline"] = with_position ? yardline : 50;
    j["ydstogo"] = with_position ? ydstogo : 1;
    if (!kicker.empty()) j["kicker_id"] = kicker;
    if (!punter.empty()) j["punter_id"] = punter;
    if (kq) j["kq"] = *kq;
    if (pq) j["pq"] = *pq;
    if (tq_off) j["delta_tq_off"] = *tq_off;
    if (tq_def) j["delta_tq_def"] = *tq_def;
    std::vector<FieldError> errors;
    const auto s = state_from_json(j, model, errors);
    if (!errors.empty()) {
      std::string msg;
      for (const auto& e : errors) msg += (msg.empty() ? "" : "; ") + e.message;
      throw UsageError(msg);
    }
    return s;
  }
};

std::vector<FourthDownState> fourth_down_states(const std::vector<PlayRecord>& plays, const QualityTables& q,
                                                std::vector<std::size_t>* rows = nullptr) {
  std::vector<FourthDownState> out;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& p = plays[i];
    if (p.down != 4 || p.yardline < 1 || p.yardline > 99 || p.ydstogo > p.yardline) continue;
    auto s = state_from_play(p, q, i);
    if (!validation_errors(s).empty()) continue;
    out.push_back(s);
    if (rows) rows->push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands

struct Globals {
  std::string config;
  int jobs = 0;
  std::string log_level = "info";
};

int cmd_ingest(const std::string& csv, const std::string& colmap, const std::string& out, const std::string& rejects,
               Manifest& m) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw SchemaError("cannot read " + csv);
  m.input(csv);
  if (!colmap.empty()) m.input(colmap);
  const auto schema = colmap.empty() ? ColumnMap{} : ColumnMap::from_file(colmap);
  const auto result = parse_plays(in, schema);
  {
    auto os = open_out(out);
    write_plays(os, result.plays);
  }
  m.output(out);
  const std::string reject_path = rejects.empty() ? out + ".rejects.csv" : rejects;
  {
    auto os = open_out(reject_path);
    write_reject_log(os, result.rejects);
  }
  m.output(reject_path);
  const auto pools = filter_training_pools(result.plays);
  for (const auto& name : pools.empty_pools()) log_warn("training pool '" + name + "' is empty");
  m.settings["rows_read"] = result.rows_read;
  m.settings["plays"] = result.plays.size();
  m.settings["rejected"] = result.rejects.size();
  std::cout << "read " << result.rows_read << " rows: " << result.plays.size() << " plays, " << result.rejects.size()
            << " rejected\n";
  return 0;
}

int cmd_fit(const std::string& data, const std::string& colmap, const ModelFlags& flags, bool tune,
            std::uint64_t seed, const std::string& out, const std::string& params_out, Manifest& m) {
  const auto plays = load_plays(data, colmap);
  m.input(data);
  auto config = flags.config();
  if (tune) {
    const auto split = make_split(plays, {}, seed);
    const auto train = split_rows(plays, split, DatasetSplit::Part::train);
    const auto tune_rows = split_rows(plays, split, DatasetSplit::Part::tune);
    const auto result = tune_wp(config.feature_set, plays, train, tune_rows);
    config.wp_params = result.params;
    m.seeds["split"] = seed;
  }
  const auto pools = filter_training_pools(plays);
  const auto quality = compute_quality(plays, pools);
  const auto model = fit_decision_model(plays, pools, quality, {}, config);
  {
    auto os = open_out(out);
    os << json(model).dump() << '\n';
  }
  m.output(out);
  if (!params_out.empty()) {
    auto os = open_out(params_out);
    os << params_json(config).dump(2) << '\n';
    m.output(params_out);
  }
  m.settings["params"] = params_json(config);
  log_info("fitted decision model on " + std::to_string(plays.size()) + " plays");
  return 0;
}

int cmd_bootstrap(const std::string& data, const std::string& colmap, const ModelFlags& flags, int B, double fraction,
                  std::uint64_t seed, const std::string& out, bool parallel, Manifest& m) {
  if (B < 1) throw UsageError("--B must be at least 1");
  if (fraction < 0.0 || fraction > 1.0) throw UsageError("--fraction must lie in [0, 1]");
  const auto plays = load_plays(data, colmap);
  m.input(data);
  const auto config = flags.config();
  const auto pools = filter_training_pools(plays);
  const auto quality = compute_quality(plays, pools);
  EnsembleOptions opts;
  opts.parallel = parallel;
  opts.progress = [](std::size_t done, std::size_t total) {
    log_info("replicate " + std::to_string(done) + "/" + std::to_string(total) + " fitted");
  };
  const auto e = fit_ensemble(plays, pools, quality, {B, fraction, seed}, config, opts);
  save_ensemble(out, e);
  m.seeds["bootstrap"] = seed;
  m.settings["B"] = B;
  m.settings["fraction"] = fraction;
  m.settings["params"] = params_json(config);
  m.output(out);
  return 0;
}

void print_recommendation(std::ostream& os, const DecisionValues& point, const UncertaintyReport& r) {
  write_decision_table(os, point);
  os << std::fixed << std::setprecision(1) << "boot%: " << r.boot_pct << " (" << to_string(r.bin) << "), "
     << std::setprecision(0) << 100.0 * r.level << "% CI on effect size: [" << std::setprecision(1)
     << 100.0 * r.ci_lo << "%, " << 100.0 * r.ci_hi << "%]\n";
  os.unsetf(std::ios::floatfield);
}

int cmd_recommend(const std::string& dir, const StateFlags& sf, double level, const std::string& out,
                  const std::string& gains_out, bool as_json, Manifest& m) {
  if (!(level > 0.0 && level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  const auto e = load_ensemble(dir);
  m.input(dir);
  const auto state = sf.build(e.point, true);
  const auto point = e.point.evaluate(state);
  const auto r = uncertainty(e, state, level);
  std::ostringstream text;
  if (as_json) text << recommendation_json(point, r).dump(2) << '\n';
  else print_recommendation(text, point, r);
  std::cout << text.str();
  if (!out.empty()) {
    auto os = open_out(out);
    os << text.str();
    m.output(out);
  }
  if (!gains_out.empty()) {
    auto os = open_out(gains_out);
    os << "replicate,decision,gain\n" << std::setprecision(10);
    for (std::size_t b = 0; b < r.gains.size(); ++b)
      os << b << ',' << to_string(r.replicate_decisions[b]) << ',' << r.gains[b] << '\n';
    m.output(gains_out);
  }
  return 0;
}

int cmd_boundary(const std::string& dir, const StateFlags& sf, IntRange y, IntRange z, const std::string& mode,
                 double level, const std::string& out, Manifest& m) {
  if (mode != "point" && mode != "boot") throw UsageError("--mode must be point or boot");
  if (y.lo < 1 || y.hi > 99 || y.lo > y.hi) throw UsageError("yardline range must satisfy 1 <= min <= max <= 99");
  if (z.lo < 1 || z.lo > z.hi) throw UsageError("ydstogo range must satisfy 1 <= min <= max");
  const auto e = load_ensemble(dir);
  m.input(dir);
  const auto tmpl = sf.build(e.point, false);
  const bool boot = mode == "boot";
  const CellEvaluator eval = [&](const FourthDownState& s) {
    GridCell c = point_cell(e.point, s);
    if (boot) c.boot_pct = uncertainty(e, s, level).boot_pct;
    return c;
  };
  const auto cells = boundary_grid(tmpl, y, z, eval);
  auto os = open_out(out);
  write_grid(os, cells);
  m.output(out);
  m.settings["mode"] = mode;
  return 0;
}

int cmd_overconfidence(const std::string& dir, const std::string& data, const std::string& colmap, int season_min,
                       int season_max, const std::string& out, Manifest& m) {
  const auto e = load_ensemble(dir);
  m.input(dir);
  auto plays = load_plays(data, colmap);
  m.input(data);
  const auto pools = filter_training_pools(plays);
  const auto quality = compute_quality(plays, pools);
  std::vector<FourthDownState> states;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& p = plays[i];
    if (p.season < season_min || p.season > season_max) continue;
    if (p.down != 4 || p.yardline < 1 || p.yardline > 99 || p.ydstogo > p.yardline) continue;
    auto s = state_from_play(p, quality, i);
    if (validation_errors(s).empty()) states.push_back(s);
  }
  if (states.empty()) throw SchemaError("no evaluable fourth-down plays in the selected seasons");
  const auto reports = uncertainty_batch(e, states);
  const auto summary = overconfidence_summary(reports);
  auto os = open_out(out);
  write_overconfidence(os, summary);
  m.output(out);
  m.settings["plays"] = states.size();
  write_overconfidence(std::cout, summary);
  return 0;
}

int cmd_coach_fit(const std::string& data, const std::string& colmap, int trees, int depth, const std::string& out,
                  const std::string& importance_out, Manifest& m) {
  const auto plays = load_plays(data, colmap);
  m.input(data);
  const auto pools = filter_training_pools(plays);
  GbtParams params;
  params.n_trees = trees;
  params.max_depth = depth;
  CoachFitReport report;
  const auto model = fit_coach(plays, pools.fourth_down, params, &report);
  {
    auto os = open_out(out);
    os << json(model).dump() << '\n';
  }
  m.output(out);
  if (!importance_out.empty()) {
    auto os = open_out(importance_out);
    write_importance(os, model);
    m.output(importance_out);
  }
  m.settings["multiclass_logloss"] = report.multiclass_logloss;
  m.settings["class_logloss"] = report.class_logloss;
  std::cout << "coach model log-loss " << report.multiclass_logloss << " on " << pools.fourth_down.size()
            << " fourth downs\n";
  return 0;
}

int cmd_coach_eval(const std::string& dir, const std::string& coach_path, const std::string& data,
                   const std::string& colmap, int season_min, int season_max, const std::string& out, Manifest& m) {
  const auto e = load_ensemble(dir);
  m.input(dir);
  std::optional<CoachModel> coach;
  if (!coach_path.empty()) {
    coach = read_json_file(coach_path).get<CoachModel>();
    m.input(coach_path);
  }
  const auto plays = load_plays(data, colmap);
  m.input(data);
  const auto pools = filter_training_pools(plays);
  const auto quality = compute_quality(plays, pools);
  std::vector<PlayRecord> kept;
  std::vector<FourthDownState> states;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    const auto& p = plays[i];
    if (p.season < season_min || p.season > season_max || !actual_decision(p)) continue;
    if (p.down != 4 || p.yardline < 1 || p.yardline > 99 || p.ydstogo > p.yardline) continue;
    auto s = state_from_play(p, quality, i);
    if (!validation_errors(s).empty()) continue;
    kept.push_back(p);
    states.push_back(s);
  }
  if (states.empty()) throw SchemaError("no evaluable fourth-down plays in the selected seasons");
  const auto reports = uncertainty_batch(e, states);
  const auto a = coach_agreement(kept, reports, coach ? &*coach : nullptr);
  auto os = open_out(out);
  write_coach_agreement(os, a);
  m.output(out);
  for (const auto& c : a.excluded) log_info("coach " + c + " has no confident plays; excluded");
  std::cout << "confident plays: " << a.confident_plays << ", agreement " << a.agreement;
  if (a.kick_agreement) std::cout << ", when kick is advised " << *a.kick_agreement;
  if (a.go_agreement) std::cout << ", when go is advised " << *a.go_agreement;
  if (a.expected_agreement) std::cout << ", coach-model expectation " << *a.expected_agreement;
  std::cout << '\n';
  return 0;
}

int cmd_stability(const std::string& data, const std::string& colmap, const ModelFlags& flags,
                  const std::vector<int>& Bs, int M, int n_states, double fraction, std::uint64_t seed,
                  const std::string& out, const std::string& hist_out, bool parallel, Manifest& m) {
  if (M < 2) throw UsageError("--M must be at least 2");
  if (Bs.empty()) throw UsageError("--Bs needs at least one size");
  for (int b : Bs)
    if (b < 1) throw UsageError("--Bs entries must be positive");
  if (n_states < 1) throw UsageError("--states must be positive");
  const auto plays = load_plays(data, colmap);
  m.input(data);
  const auto config = flags.config();
  const auto pools = filter_training_pools(plays);
  const auto quality = compute_quality(plays, pools);
  auto states = fourth_down_states(plays, quality);
  // deterministic subsample of the fourth downs
  Rng rng(mix_seed(seed, 0xC0FFEE));
  for (std::size_t i = states.size(); i > 1; --i) std::swap(states[i - 1], states[uniform_index(rng, i)]);
  if (states.size() > static_cast<std::size_t>(n_states)) states.resize(static_cast<std::size_t>(n_states));
  if (states.empty()) throw SchemaError("no evaluable fourth-down plays");
  StabilityOptions opts;
  opts.Bs = Bs;
  opts.M = M;
  opts.seed = seed;
  opts.fraction = fraction;
  opts.parallel = parallel;
  const auto rows = stability_analysis(plays, pools, quality, states, config, opts);
  {
    auto os = open_out(out);
    write_stability(os, rows);
  }
  m.output(out);
  if (!hist_out.empty()) {
    auto os = open_out(hist_out);
    write_stability_histogram(os, rows);
    m.output(hist_out);
  }
  m.seeds["stability"] = seed;
  m.settings["states"] = states.size();
  m.settings["M"] = M;
  m.settings["Bs"] = Bs;
  m.settings["params"] = params_json(config);
  write_stability(std::cout, rows);
  return 0;
}

int cmd_simulate(const std::string& world_path, int games, std::uint64_t seed, const std::string& out,
                 const std::string& oracle_out, Manifest& m) {
  if (games < 1) throw UsageError("--games must be positive");
  WorldConfig config;
  if (!world_path.empty()) {
    config = read_json_file(world_path).get<WorldConfig>();
    m.input(world_path);
  }
  const SyntheticWorld world(config);
  const auto h = simulate_history(world, games, seed);
  {
    auto os = open_out(out);
    write_plays(os, h.plays);
  }
  m.output(out);
  if (!oracle_out.empty()) {
    auto os = open_out(oracle_out);
    os << "row,edge,bucket,z_index,score,steps,down,true_wp\n" << std::setprecision(12);
    for (std::size_t i = 0; i < h.states.size(); ++i) {
      const auto& s = h.states[i];
      os << i << ',' << s.edge << ',' << s.bucket << ',' << s.z_index << ',' << s.score << ',' << s.steps << ','
         << s.down << ',' << world.true_wp(s) << '\n';
    }
    m.output(oracle_out);
  }
  m.seeds["simulate"] = seed;
  m.settings["games"] = games;
  m.settings["world"] = config;
  return 0;
}

int cmd_contest(const std::string& data, const std::string& colmap, std::uint64_t seed, const std::string& out,
                Manifest& m) {
  const auto plays = load_plays(data, colmap);
  m.input(data);
  const auto split = make_split(plays, {}, seed);
  const auto rows = run_contest(plays, split);
  auto os = open_out(out);
  write_contest(os, rows);
  m.output(out);
  m.seeds["split"] = seed;
  write_contest(std::cout, rows);
  return 0;
}

int cmd_serve(const std::string& dir, const std::string& coach_path, const std::string& listen,
              const std::string& cors, int jobs) {
  const auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen must be host:port");
  int port = 0;
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--listen port is not a number");
  }
  if (port < 0 || port > 65535) throw UsageError("--listen port out of range");
  ServiceConfig cfg;
  cfg.cors_origin = cors;
  cfg.ensemble_id = dir;
  Service service(cfg);
  HttpServer server(service, std::max(1, jobs));
  const int bound = server.bind(listen.substr(0, colon), port);
  log_info("listening on " + listen.substr(0, colon) + ":" + std::to_string(bound));
  std::thread loader([&] {
    try {
      auto e = load_ensemble(dir);
      std::optional<CoachModel> coach;
      if (!coach_path.empty()) coach = read_json_file(coach_path).get<CoachModel>();
      service.load(std::move(e), std::move(coach));
      log_info("ensemble loaded");
    } catch (const std::exception& err) {
      log(LogLevel::error, std::string("loading failed: ") + err.what());
      server.stop();
    }
  });
  server.listen();
  loader.join();
  return service.ready() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fourth-down decisions with bootstrap uncertainty"};
  app.require_subcommand(1);
  Globals g;
  const char* env_config = std::getenv("FOURTHDOWN_CONFIG");
  app.set_config("--config", env_config ? env_config : "", "key = value config file (default: $FOURTHDOWN_CONFIG)");
  app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--log-level", g.log_level, "debug, info, warn or error")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

  Manifest m;
  std::string manifest_path;
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", manifest_path, "run manifest path (default: next to the main output)");
  };

  // ingest
  std::string csv, colmap, out, rejects;
  auto* ingest = app.add_subcommand("ingest", "validate a play-by-play CSV and write the canonical dataset");
  ingest->add_option("--csv", csv, "input CSV")->required();
  ingest->add_option("--colmap", colmap, "column map file (canonical = header)");
  ingest->add_option("--out", out, "canonical CSV output")->required();
  ingest->add_option("--rejects", rejects, "reject log (default: <out>.rejects.csv)");
  add_manifest(ingest);

  // fit
  std::string data, params_out;
  bool tune = false;
  std::uint64_t seed = 0;
  ModelFlags model_flags;
  auto* fit = app.add_subcommand("fit", "fit the WP and transition models");
  fit->add_option("--data", data, "canonical play CSV")->required();
  fit->add_option("--colmap", colmap);
  model_flags.add(fit);
  fit->add_flag("--tune", tune, "select WP hyperparameters on a game split first");
  fit->add_option("--seed", seed, "split seed for --tune")->capture_default_str();
  fit->add_option("--out", out, "model JSON")->required();
  fit->add_option("--params-out", params_out, "write the hyperparameters used");
  add_manifest(fit);

  // bootstrap
  int B = 101;
  double fraction = 1.0;
  auto* boot = app.add_subcommand("bootstrap", "fit a cluster-bootstrap ensemble");
  boot->add_option("--data", data)->required();
  boot->add_option("--colmap", colmap);
  model_flags.add(boot);
  boot->add_option("--B", B, "replicates")->capture_default_str();
  boot->add_option("--fraction", fraction, "fractional-bootstrap blend f")->capture_default_str();
  boot->add_option("--seed", seed)->capture_default_str();
  boot->add_option("--out", out, "ensemble directory")->required();
  add_manifest(boot);

  // recommend
  std::string ensemble_dir, gains_out;
  double level = 0.9;
  bool as_json = false;
  StateFlags rec_state;
  auto* rec = app.add_subcommand("recommend", "recommend a decision for one game state");
  rec->add_option("--ensemble", ensemble_dir)->required();
  rec_state.add(rec, true);
  rec->add_option("--level", level, "confidence level")->capture_default_str();
  rec->add_flag("--json", as_json, "print the JSON payload instead of a table");
  rec->add_option("--out", out, "also write the output here");
  rec->add_option("--gains-out", gains_out, "CSV of bootstrapped gains");
  add_manifest(rec);

  // boundary
  StateFlags grid_state;
  int y_min = 1, y_max = 99, z_min = 1, z_max = 10;
  std::string mode = "point";
  auto* bnd = app.add_subcommand("boundary", "decision grid over yardline x ydstogo");
  bnd->add_option("--ensemble", ensemble_dir)->required();
  grid_state.add(bnd, false);
  bnd->add_option("--y-min", y_min)->capture_default_str();
  bnd->add_option("--y-max", y_max)->capture_default_str();
  bnd->add_option("--z-min", z_min)->capture_default_str();
  bnd->add_option("--z-max", z_max)->capture_default_str();
  bnd->add_option("--mode", mode, "point or boot")->capture_default_str();
  bnd->add_option("--level", level)->capture_default_str();
  bnd->add_option("--out", out, "grid CSV")->required();
  add_manifest(bnd);

  // overconfidence
  int season_min = 0, season_max = 9999;
  auto* over = app.add_subcommand("overconfidence", "confidence bins by effect size over fourth downs");
  over->add_option("--ensemble", ensemble_dir)->required();
  over->add_option("--data", data)->required();
  over->add_option("--colmap", colmap);
  over->add_option("--season-min", season_min);
  over->add_option("--season-max", season_max);
  over->add_option("--out", out)->required();
  add_manifest(over);

  // coach-fit
  std::string importance_out, coach_path;
  int coach_trees = 200, coach_depth = 4;
  auto* cfit = app.add_subcommand("coach-fit", "fit the coach decision model");
  cfit->add_option("--data", data)->required();
  cfit->add_option("--colmap", colmap);
  cfit->add_option("--trees", coach_trees)->capture_default_str()->check(CLI::PositiveNumber);
  cfit->add_option("--depth", coach_depth)->capture_default_str()->check(CLI::Range(1, 12));
  cfit->add_option("--out", out)->required();
  cfit->add_option("--importance-out", importance_out, "CSV feature,gain_share");
  add_manifest(cfit);

  // coach-eval
  auto* ceval = app.add_subcommand("coach-eval", "per-coach agreement on confident decisions");
  ceval->add_option("--ensemble", ensemble_dir)->required();
  ceval->add_option("--coach-model", coach_path);
  ceval->add_option("--data", data)->required();
  ceval->add_option("--colmap", colmap);
  ceval->add_option("--season-min", season_min);
  ceval->add_option("--season-max", season_max);
  ceval->add_option("--out", out)->required();
  add_manifest(ceval);

  // stability
  std::vector<int> Bs = {11, 51};
  int M = 20, n_states = 200;
  std::string hist_out;
  auto* stab = app.add_subcommand("stability", "stability of confidence bins across independent ensembles");
  stab->add_option("--data", data)->required();
  stab->add_option("--colmap", colmap);
  model_flags.add(stab);
  stab->add_option("--Bs", Bs, "ensemble sizes")->delimiter(',')->capture_default_str();
  stab->add_option("--M", M, "ensembles per size")->capture_default_str();
  stab->add_option("--states", n_states, "fourth-down plays sampled")->capture_default_str();
  stab->add_option("--fraction", fraction)->capture_default_str();
  stab->add_option("--seed", seed)->capture_default_str();
  stab->add_option("--out", out)->required();
  stab->add_option("--hist-out", hist_out, "histogram CSV of per-play stability");
  add_manifest(stab);

  // simulate
  std::string world_path, oracle_out;
  int games = 500;
  auto* sim = app.add_subcommand("simulate", "simulate plays from the synthetic world");
  sim->add_option("--world", world_path, "world config JSON (defaults otherwise)");
  sim->add_option("--games", games)->capture_default_str();
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("--out", out)->required();
  sim->add_option("--oracle-out", oracle_out, "CSV of the exact WP at every play");
  add_manifest(sim);

  // contest
  auto* contest = app.add_subcommand("contest", "log-loss contest of WP models on a game split");
  contest->add_option("--data", data)->required();
  contest->add_option("--colmap", colmap);
  contest->add_option("--seed", seed)->capture_default_str();
  contest->add_option("--out", out)->required();
  add_manifest(contest);

  // serve
  std::string listen = "127.0.0.1:8080", cors = "*";
  auto* serve = app.add_subcommand("serve", "HTTP JSON service over an ensemble");
  serve->add_option("--ensemble", ensemble_dir)->required();
  serve->add_option("--coach-model", coach_path);
  serve->add_option("--listen", listen, "host:port")->capture_default_str();
  serve->add_option("--cors-origin", cors, "Access-Control-Allow-Origin value (empty disables)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    for (auto* sub : app.get_subcommands()) std::cerr << sub->help();
    return 2;
  }

  const std::map<std::string, LogLevel> levels = {
      {"debug", LogLevel::debug}, {"info", LogLevel::info}, {"warn", LogLevel::warn}, {"error", LogLevel::error}};
  set_log_level(levels.at(g.log_level));
  if (g.jobs > 0) set_threads(g.jobs);
  const int jobs = g.jobs > 0 ? g.jobs : max_threads();
  const bool parallel = jobs > 1;

  auto* sub = app.get_subcommands().front();
  m.command = sub->get_name();
  if (auto* cfg = app.get_config_ptr(); cfg && cfg->count() > 0) m.config_path = cfg->as<std::string>();
  else if (env_config) m.config_path = env_config;
  std::vector<std::string> args(argv + 1, argv + argc);
  m.settings["args"] = args;

  try {
    int rc = 0;
    std::string default_manifest = out.empty() ? "" : out + ".manifest.json";
    if (sub == ingest) rc = cmd_ingest(csv, colmap, out, rejects, m);
    else if (sub == fit) rc = cmd_fit(data, colmap, model_flags, tune, seed, out, params_out, m);
    else if (sub == boot) {
      rc = cmd_bootstrap(data, colmap, model_flags, B, fraction, seed, out, parallel, m);
      default_manifest = (fs::path(out) / "run_manifest.json").string();
    } else if (sub == rec) rc = cmd_recommend(ensemble_dir, rec_state, level, out, gains_out, as_json, m);
    else if (sub == bnd)
      rc = cmd_boundary(ensemble_dir, grid_state, {y_min, y_max}, {z_min, z_max}, mode, level, out, m);
    else if (sub == over) rc = cmd_overconfidence(ensemble_dir, data, colmap, season_min, season_max, out, m);
    else if (sub == cfit) rc = cmd_coach_fit(data, colmap, coach_trees, coach_depth, out, importance_out, m);
    else if (sub == ceval)
      rc = cmd_coach_eval(ensemble_dir, coach_path, data, colmap, season_min, season_max, out, m);
    else if (sub == stab)
      rc = cmd_stability(data, colmap, model_flags, Bs, M, n_states, fraction, seed, out, hist_out, parallel, m);
    else if (sub == sim) rc = cmd_simulate(world_path, games, seed, out, oracle_out, m);
    else if (sub == contest) rc = cmd_contest(data, colmap, seed, out, m);
    else if (sub == serve) return cmd_serve(ensemble_dir, coach_path, listen, cors, jobs);

    const std::string path = manifest_path.empty() ? default_manifest : manifest_path;
    if (!path.empty()) m.write(path);
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << sub->help();
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log(LogLevel::error, e.what());
    return 1;
  }
}
