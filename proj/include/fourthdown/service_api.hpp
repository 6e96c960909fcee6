#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "fourthdown/bootstrap_uq.hpp"
#include "fourthdown/coach_model.hpp"
#include "json.hpp"

namespace fourthdown {

/// Builds a state from a JSON object. yardline and ydstogo are required; other fields
/// default. Missing delta_tq_off / delta_tq_def are derived from the spread and total line
/// with the model's scale; missing kq / pq are looked up from kicker_id / punter_id
/// (0 when unknown). Type and range problems are appended to `errors`.
FourthDownState state_from_json(const nlohmann::json& body, const DecisionModel& model,
                                std::vector<FieldError>& errors);

nlohmann::json decision_values_json(const DecisionValues& v);
/// The /recommend payload: per-decision WP and branch detail plus the uncertainty summary.
nlohmann::json recommendation_json(const DecisionValues& point, const UncertaintyReport& r);

struct ServiceConfig {
  std::string cors_origin = "*";
  std::string ensemble_id;  // shown by /health
  double level = 0.9;
  int max_grid_cells = 99 * 99;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Request handling over an ensemble that is loaded once and then only read.
/// Handlers are pure functions of (ensemble, request) and safe to call concurrently.
class Service {
 public:
  explicit Service(ServiceConfig config = {});

  void load(BootstrapEnsemble ensemble, std::optional<CoachModel> coach = std::nullopt);
  bool ready() const;
  const ServiceConfig& config() const { return config_; }

  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

  HttpResponse health() const;
  HttpResponse recommend(const std::string& body) const;
  HttpResponse boundary(const std::string& body) const;
  HttpResponse coach_probs(const std::string& body) const;

 private:
  struct Session {
    BootstrapEnsemble ensemble;
    std::optional<CoachModel> coach;
  };
  std::shared_ptr<const Session> session() const;

  ServiceConfig config_;
  mutable std::mutex mutex_;
  std::shared_ptr<const Session> session_;
};

/// HTTP/1.1 front end. `jobs` bounds the worker pool.
class HttpServer {
 public:
  HttpServer(const Service& service, int jobs);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and returns the port (an ephemeral one when `port` is 0); throws SchemaError on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fourthdown
