#include "fourthdown/service_api.hpp"

#include <cmath>

#include "fourthdown/common.hpp"
#include "httplib.h"

namespace fourthdown {

namespace {

using nlohmann::json;

struct Parser {
  const json& body;
  std::vector<FieldError>& errors;

  const json* get(const char* name) const {
    auto it = body.find(name);
    return it == body.end() || it->is_null() ? nullptr : &*it;
  }

  bool integer(const char* name, int& out) const {
    const json* v = get(name);
    if (!v) return false;
    if (v->is_number_integer()) {
      const auto x = v->get<long long>();
      if (x >= -1000000 && x <= 1000000) {
        out = static_cast<int>(x);
        return true;
      }
    } else if (v->is_number_float()) {
      const double x = v->get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) <= 1e6) {
        out = static_cast<int>(x);
        return true;
      }
    }
    errors.push_back({name, std::string(name) + " must be an integer"});
    return false;
  }

  bool real(const char* name, double& out) const {
    const json* v = get(name);
    if (!v) return false;
    if (!v->is_number()) {
      errors.push_back({name, std::string(name) + " must be a number"});
      return false;
    }
    out = v->get<double>();
    return true;
  }

  std::optional<std::string> text(const char* name) const {
    const json* v = get(name);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      errors.push_back({name, std::string(name) + " must be a string"});
      return std::nullopt;
    }
    return v->get<std::string>();
  }
};

const std::vector<std::string>& state_fields() {
  static const std::vector<std::string> f = {
      "yardline",       "ydstogo",         "game_seconds_remaining", "score_differential", "total_score",
      "posteam_spread", "total_points_line", "posteam_timeouts",     "defteam_timeouts",   "receive_2h_ko",
      "home",           "kq",              "pq",                     "delta_tq_off",       "delta_tq_def",
      "opp_kq",         "opp_pq",          "kicker_id",              "punter_id",          "season"};
  return f;
}

FourthDownState parse_state(const json& body, const DecisionModel& model, std::vector<FieldError>& errors,
                            bool require_position, int* season) {
  FourthDownState s;
  if (!body.is_object()) {
    errors.push_back({"", "state must be a JSON object"});
    return s;
  }
  for (const auto& [key, _] : body.items())
    if (std::find(state_fields().begin(), state_fields().end(), key) == state_fields().end())
      errors.push_back({key, "unknown field " + key});
  Parser p{body, errors};
  const bool has_y = p.integer("yardline", s.yardline);
  const bool has_z = p.integer("ydstogo", s.ydstogo);
  if (require_position && !has_y && !p.get("yardline")) errors.push_back({"yardline", "yardline is required"});
  if (require_position && !has_z && !p.get("ydstogo")) errors.push_back({"ydstogo", "ydstogo is required"});
  p.integer("game_seconds_remaining", s.game_seconds_remaining);
  p.integer("score_differential", s.score_differential);
  p.integer("total_score", s.total_score);
  p.integer("posteam_timeouts", s.posteam_timeouts);
  p.integer("defteam_timeouts", s.defteam_timeouts);
  p.integer("receive_2h_ko", s.receive_2h_ko);
  p.integer("home", s.home);
  p.real("posteam_spread", s.posteam_spread);
  p.real("total_points_line", s.total_points_line);
  p.real("opp_kq", s.opp_kq);
  p.real("opp_pq", s.opp_pq);
  const auto tq = model.team_quality(s.posteam_spread, s.total_points_line);
  if (!p.real("delta_tq_off", s.delta_tq_off)) s.delta_tq_off = tq.delta_tq_off;
  if (!p.real("delta_tq_def", s.delta_tq_def)) s.delta_tq_def = tq.delta_tq_def;
  auto lookup = [](const std::map<std::string, double>& m, const std::optional<std::string>& id) {
    if (!id) return 0.0;
    auto it = m.find(*id);
    return it == m.end() ? 0.0 : it->second;
  };
  const auto kicker = p.text("kicker_id");
  const auto punter = p.text("punter_id");
  if (!p.real("kq", s.kq)) s.kq = lookup(model.kicker_quality, kicker);
  if (!p.real("pq", s.pq)) s.pq = lookup(model.punter_quality, punter);
  int yr = 2022;
  p.integer("season", yr);
  if (season) *season = yr;
  for (auto& e : validation_errors(s)) {
    const bool dup = std::any_of(errors.begin(), errors.end(), [&](const FieldError& f) { return f.field == e.field; });
    if (!dup) errors.push_back(std::move(e));
  }
  return s;
}

HttpResponse json_response(int status, const json& j) { return {status, j.dump(), "application/json"}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

HttpResponse field_errors(const std::vector<FieldError>& errors) {
  json fields = json::array();
  for (const auto& e : errors) fields.push_back({{"field", e.field}, {"message", e.message}});
  json j = {{"error", errors.empty() ? "invalid request" : errors.front().message}, {"fields", fields}};
  return json_response(400, j);
}

std::optional<json> parse_body(const std::string& body, HttpResponse& err) {
  try {
    auto j = json::parse(body);
    if (!j.is_object()) {
      err = error_response(400, "request body must be a JSON object");
      return std::nullopt;
    }
    return j;
  } catch (const json::parse_error& e) {
    err = error_response(400, std::string("malformed JSON: ") + e.what());
    return std::nullopt;
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

bool parse_range(const json& body, const char* name, IntRange def, IntRange& out, std::vector<FieldError>& errors) {
  out = def;
  auto it = body.find(name);
  if (it == body.end()) return true;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number_integer() || !(*it)[1].is_number_integer()) {
    errors.push_back({name, std::string(name) + " must be a pair of integers [lo, hi]"});
    return false;
  }
  out = {(*it)[0].get<int>(), (*it)[1].get<int>()};
  return true;
}

}  // namespace

FourthDownState state_from_json(const nlohmann::json& body, const DecisionModel& model,
                                std::vector<FieldError>& errors) {
  return parse_state(body, model, errors, true, nullptr);
}

nlohmann::json decision_values_json(const DecisionValues& v) {
  json go = {{"wp", v.go.wp},
             {"p_success", v.go.p_convert},
             {"wp_success", v.go.wp_success},
             {"wp_failure", v.go.wp_failure},
             {"success_yardline", v.go.success_yardline},
             {"touchdown", v.go.touchdown}};
  json fg = nullptr, punt = nullptr;
  if (v.fg)
    fg = {{"wp", v.fg->wp}, {"p_success", v.fg->p_make}, {"wp_make", v.fg->wp_make}, {"wp_miss", v.fg->wp_miss}};
  if (v.punt) punt = {{"wp", v.punt->wp}, {"next_yardline", v.punt->next_yardline}};
  return {{"decisions", {{"Go", go}, {"FG", fg}, {"Punt", punt}}},
          {"best", to_string(v.best)},
          {"effect_size", optional_number(v.effect_size)}};
}

nlohmann::json recommendation_json(const DecisionValues& point, const UncertaintyReport& r) {
  json j = decision_values_json(point);
  j["boot_pct"] = r.boot_pct;
  j["bin"] = to_string(r.bin);
  j["level"] = r.level;
  j["ci"] = {r.ci_lo, r.ci_hi};
  j["gains"] = r.gains;
  json counts = {{"Go", 0}, {"FG", 0}, {"Punt", 0}};
  for (auto d : r.replicate_decisions) counts[std::string(to_string(d))] = counts[std::string(to_string(d))].get<int>() + 1;
  j["replicate_decisions"] = counts;
  return j;
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {}

void Service::load(BootstrapEnsemble ensemble, std::optional<CoachModel> coach) {
  auto s = std::make_shared<const Session>(Session{std::move(ensemble), std::move(coach)});
  std::lock_guard lock(mutex_);
  session_ = std::move(s);
}

std::shared_ptr<const Service::Session> Service::session() const {
  std::lock_guard lock(mutex_);
  return session_;
}

bool Service::ready() const { return session() != nullptr; }

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  struct Route {
    const char* method;
    const char* path;
  };
  static const Route routes[] = {
      {"GET", "/health"}, {"POST", "/recommend"}, {"POST", "/boundary"}, {"POST", "/coach_probs"}};
  const Route* route = nullptr;
  for (const auto& r : routes)
    if (path == r.path) route = &r;
  if (!route) return error_response(404, "no such endpoint " + path);
  if (method == "OPTIONS") return {204, "", "text/plain"};
  if (method != route->method) return error_response(405, "use " + std::string(route->method) + " for " + path);
  if (path == "/health") return health();
  if (path == "/recommend") return recommend(body);
  if (path == "/boundary") return boundary(body);
  return coach_probs(body);
}

HttpResponse Service::health() const {
  const auto s = session();
  if (!s) return json_response(503, {{"status", "loading"}});
  return json_response(200, {{"status", "ok"},
                             {"ensemble_id", config_.ensemble_id},
                             {"fingerprint", s->ensemble.data_fingerprint},
                             {"B", s->ensemble.plan.B},
                             {"coach_model", s->coach.has_value()}});
}

HttpResponse Service::recommend(const std::string& body) const {
  const auto s = session();
  if (!s) return error_response(503, "ensemble is still loading");
  HttpResponse err;
  const auto j = parse_body(body, err);
  if (!j) return err;
  std::vector<FieldError> errors;
  const auto state = parse_state(*j, s->ensemble.point, errors, true, nullptr);
  if (!errors.empty()) return field_errors(errors);
  const auto point = s->ensemble.point.evaluate(state);
  return json_response(200, recommendation_json(point, uncertainty(s->ensemble, state, config_.level)));
}

HttpResponse Service::boundary(const std::string& body) const {
  const auto s = session();
  if (!s) return error_response(503, "ensemble is still loading");
  HttpResponse err;
  const auto j = parse_body(body, err);
  if (!j) return err;
  std::vector<FieldError> errors;
  for (const auto& [key, _] : j->items())
    if (key != "state" && key != "y_range" && key != "z_range" && key != "mode")
      errors.push_back({key, "unknown field " + key});
  const json state_json = j->contains("state") ? j->at("state") : json::object();
  json with_position = state_json;
  if (with_position.is_object()) {
    // the grid supplies yardline and ydstogo
    with_position["yardline"] = 50;
    with_position["ydstogo"] = 1;
  }
  const auto tmpl = parse_state(with_position, s->ensemble.point, errors, false, nullptr);
  IntRange y, z;
  parse_range(*j, "y_range", {1, 99}, y, errors);
  parse_range(*j, "z_range", {1, 10}, z, errors);
  std::string mode = "point";
  if (j->contains("mode")) {
    if (!j->at("mode").is_string() || (j->at("mode") != "point" && j->at("mode") != "boot"))
      errors.push_back({"mode", "mode must be \"point\" or \"boot\""});
    else
      mode = j->at("mode").get<std::string>();
  }
  if (y.lo < 1 || y.hi > 99 || y.lo > y.hi) errors.push_back({"y_range", "y_range must satisfy 1 <= lo <= hi <= 99"});
  if (z.lo < 1 || z.lo > z.hi) errors.push_back({"z_range", "z_range must satisfy 1 <= lo <= hi"});
  if (errors.empty() && static_cast<long>(y.hi - y.lo + 1) * (z.hi - z.lo + 1) > config_.max_grid_cells)
    errors.push_back({"z_range", "grid exceeds " + std::to_string(config_.max_grid_cells) + " cells"});
  if (!errors.empty()) return field_errors(errors);

  const bool boot = mode == "boot";
  const auto& e = s->ensemble;
  const double level = config_.level;
  const CellEvaluator eval = [&](const FourthDownState& st) {
    GridCell c = point_cell(e.point, st);
    if (boot) c.boot_pct = uncertainty(e, st, level).boot_pct;
    return c;
  };
  const auto cells = boundary_grid(tmpl, y, z, eval, false);
  json out = json::array();
  for (const auto& c : cells) {
    json cell = {{"y", c.yardline}, {"z", c.ydstogo}, {"feasible", c.feasible}};
    if (c.feasible) {
      cell["best"] = to_string(c.best);
      cell["effect_size"] = optional_number(c.effect_size);
      if (boot) cell["boot_pct"] = *c.boot_pct;
    }
    out.push_back(std::move(cell));
  }
  return json_response(200, {{"mode", mode},
                             {"y_range", {y.lo, y.hi}},
                             {"z_range", {z.lo, z.hi}},
                             {"cells", std::move(out)}});
}

HttpResponse Service::coach_probs(const std::string& body) const {
  const auto s = session();
  if (!s) return error_response(503, "ensemble is still loading");
  if (!s->coach) return error_response(503, "no coach model loaded");
  HttpResponse err;
  const auto j = parse_body(body, err);
  if (!j) return err;
  std::vector<FieldError> errors;
  int season = 2022;
  const auto state = parse_state(*j, s->ensemble.point, errors, true, &season);
  if (!errors.empty()) return field_errors(errors);
  PlayRecord p;
  p.yardline = state.yardline;
  p.ydstogo = state.ydstogo;
  p.game_seconds_remaining = state.game_seconds_remaining;
  p.score_differential = state.score_differential;
  p.posteam_spread = state.posteam_spread;
  p.season = season;
  const auto pr = s->coach->probabilities(p);
  return json_response(200, {{"p_go", pr[0]}, {"p_fg", pr[1]}, {"p_punt", pr[2]}});
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  explicit Impl(const Service& s) : service(s) {}
  const Service& service;
  httplib::Server server;
  int port = -1;
};

HttpServer::HttpServer(const Service& service, int jobs) : impl_(std::make_unique<Impl>(service)) {
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  impl_->server.new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
  const std::string origin = service.config().cors_origin;
  auto dispatch = [this, origin](const httplib::Request& req, httplib::Response& res) {
    const auto r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    if (!origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
    if (!r.body.empty()) res.set_content(r.body, r.content_type);
  };
  impl_->server.Get(R"(/.*)", dispatch);
  impl_->server.Post(R"(/.*)", dispatch);
  impl_->server.Options(R"(/.*)", dispatch);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw SchemaError("cannot listen on " + host + ":" + std::to_string(port));
  impl_->port = bound;
  return bound;
}

void HttpServer::listen() {
  if (impl_->port < 0) throw SchemaError("server is not bound");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace fourthdown
