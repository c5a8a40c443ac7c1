#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>
#include <optional>

#include "modkit/gateway.hpp"
#include "modkit/scoring.hpp"
#include "modkit/util.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>
#include <json.hpp>

namespace modkit {

namespace {

using nlohmann::json;

double steady_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct RequestError {
  int status;
  std::string code;
  std::string field;
  std::string message;
};

json error_body(const RequestError& e) {
  json body;
  body["error"] = {{"code", e.code}, {"field", e.field}, {"message", e.message}};
  return body;
}

struct ParsedRequest {
  UseCase use_case = UseCase::PromptOnly;
  std::string user_text;
  std::optional<std::string> model_response;
  std::vector<HarmType> harms;
  std::optional<double> threshold;
};

// 400 on shape problems, 422 when model_response disagrees with use_case.
ParsedRequest parse_classify(const std::string& body, const PipelineConfig& config) {
  const json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    throw RequestError{400, "SchemaViolation", "$", "body is not valid JSON"};
  }
  if (!parsed.is_object()) {
    throw RequestError{400, "SchemaViolation", "$", "body must be a JSON object"};
  }

  ParsedRequest request;
  auto use_case = parsed.find("use_case");
  if (use_case == parsed.end() || !use_case->is_string()) {
    throw RequestError{400, "SchemaViolation", "use_case",
                       "required string: prompt_only or prompt_response"};
  }
  const auto parsed_use_case = use_case_from_id(use_case->get<std::string>());
  if (!parsed_use_case) {
    throw RequestError{400, "SchemaViolation", "use_case",
                       "must be prompt_only or prompt_response"};
  }
  request.use_case = *parsed_use_case;

  auto user_text = parsed.find("user_text");
  if (user_text == parsed.end() || !user_text->is_string()) {
    throw RequestError{400, "SchemaViolation", "user_text", "required string"};
  }
  request.user_text = user_text->get<std::string>();

  if (auto it = parsed.find("model_response"); it != parsed.end()) {
    if (!it->is_string()) {
      throw RequestError{400, "SchemaViolation", "model_response", "must be a string"};
    }
    request.model_response = it->get<std::string>();
  }
  if (request.use_case == UseCase::PromptResponse && !request.model_response) {
    throw RequestError{422, "MissingResponse", "model_response",
                       "prompt_response requests need model_response"};
  }
  if (request.use_case == UseCase::PromptOnly && request.model_response) {
    throw RequestError{422, "UnexpectedResponse", "model_response",
                       "prompt_only requests must not carry model_response"};
  }

  if (auto it = parsed.find("harms"); it != parsed.end()) {
    if (!it->is_array() || it->empty()) {
      throw RequestError{400, "SchemaViolation", "harms", "must be a non-empty array"};
    }
    std::size_t index = 0;
    for (const json& harm : *it) {
      const std::string path = "harms[" + std::to_string(index) + "]";
      if (!harm.is_string()) {
        throw RequestError{400, "SchemaViolation", path, "must be a harm id string"};
      }
      const auto parsed_harm = harm_from_id(harm.get<std::string>());
      if (!parsed_harm) {
        throw RequestError{400, "SchemaViolation", path,
                           "unknown harm id '" + harm.get<std::string>() + "'"};
      }
      request.harms.push_back(*parsed_harm);
      ++index;
    }
  } else {
    request.harms = config.harms;
  }

  if (auto it = parsed.find("threshold"); it != parsed.end()) {
    if (!it->is_number()) {
      throw RequestError{400, "SchemaViolation", "threshold", "must be a number"};
    }
    const double t = it->get<double>();
    if (t < 0.0 || t > 1.0) {
      throw RequestError{400, "SchemaViolation", "threshold", "must lie in [0, 1]"};
    }
    request.threshold = t;
  }
  return request;
}

}  // namespace

struct Gateway::Impl {
  std::shared_ptr<Backend> backend;
  std::function<double()> clock;
  std::function<void(const std::string&)> log_sink;

  mutable std::mutex config_mutex;
  std::shared_ptr<const PipelineConfig> config;
  int version = 1;

  std::unique_ptr<TokenBucket> bucket;
  std::mutex probe_mutex;
  double probe_time = -1.0;
  bool probe_result = false;

  std::atomic<std::uint64_t> request_counter{0};
  httplib::Server server;

  std::shared_ptr<const PipelineConfig> snapshot() const {
    std::lock_guard<std::mutex> lock(config_mutex);
    return config;
  }

  bool backend_reachable(double ttl) {
    std::lock_guard<std::mutex> lock(probe_mutex);
    const double now = clock();
    if (probe_time < 0.0 || now - probe_time > ttl) {
      probe_result = backend->reachable();
      probe_time = now;
    }
    return probe_result;
  }

  std::string next_request_id() {
    return "req-" + hex64(splitmix64(request_counter.fetch_add(1) + 1));
  }

  void log_line(const json& entry) {
    if (log_sink) log_sink(entry.dump());
    else std::cerr << entry.dump() << '\n';
  }

  void handle_classify(const httplib::Request& req, httplib::Response& res) {
    const double started = clock();
    const std::string request_id = req.has_header("X-Request-Id")
                                       ? req.get_header_value("X-Request-Id")
                                       : next_request_id();
    res.set_header("X-Request-Id", request_id);
    const std::shared_ptr<const PipelineConfig> cfg = snapshot();

    json log_entry;
    log_entry["path"] = "/v1/classify";
    log_entry["request_id"] = request_id;

    auto finish = [&](int status, const json& body) {
      res.status = status;
      res.set_content(body.dump(), "application/json");
      log_entry["status"] = status;
      log_entry["latency_ms"] = (clock() - started) * 1000.0;
      log_line(log_entry);
    };

    if (bucket && !bucket->try_acquire()) {
      double wait = 0.0;
      try {
        wait = bucket->seconds_until_available();
      } catch (const Error&) {
        wait = 1.0;
      }
      res.set_header("Retry-After", std::to_string(wait));
      finish(429, error_body({429, "RateLimited", "", "request rate exceeded"}));
      return;
    }

    ParsedRequest request;
    try {
      request = parse_classify(req.body, *cfg);
    } catch (const RequestError& e) {
      finish(e.status, error_body(e));
      return;
    }

    json per_harm = json::object();
    double overall = 0.0;
    bool violative = false;
    const double base_threshold = request.threshold.value_or(cfg->threshold);
    try {
      for (HarmType harm : request.harms) {
        const HarmType one[] = {harm};
        const HarmScores scores =
            score_example(request.use_case, request.user_text, request.model_response,
                          one, cfg->score, *backend);
        const double p = scores.probability.at(harm);
        per_harm[std::string(harm_id(harm))] = p;
        overall = std::max(overall, p);
        const double harm_threshold =
            request.threshold ? *request.threshold : cfg->threshold_for(harm);
        if (p >= harm_threshold) violative = true;
      }
    } catch (const Error& e) {
      if (e.is_backend_failure()) {
        // score_example prefixes the failing harm id onto the message.
        const std::string& message = e.message();
        const std::size_t colon = message.find(':');
        json body = error_body({502, errc_name(e.code()), "", message});
        body["error"]["harm"] =
            colon == std::string::npos ? "" : message.substr(0, colon);
        finish(502, body);
        return;
      }
      finish(400, error_body({400, errc_name(e.code()), "", e.message()}));
      return;
    }

    json body;
    body["per_harm"] = per_harm;
    body["overall"] = overall;
    body["violative"] = violative;
    body["config_echo"] = {{"alpha", cfg->score.alpha},
                           {"model_id", backend->model_id()},
                           {"temperature", cfg->score.temperature},
                           {"threshold", base_threshold}};
    log_entry["overall"] = overall;
    log_entry["per_harm"] = per_harm;
    finish(200, body);
  }

  void handle_healthz(const httplib::Request& req, httplib::Response& res) {
    const std::string request_id = req.has_header("X-Request-Id")
                                       ? req.get_header_value("X-Request-Id")
                                       : next_request_id();
    res.set_header("X-Request-Id", request_id);
    const std::shared_ptr<const PipelineConfig> cfg = snapshot();
    int current_version;
    {
      std::lock_guard<std::mutex> lock(config_mutex);
      current_version = version;
    }
    const bool reachable = backend_reachable(cfg->probe_ttl_s);
    json body;
    body["status"] = reachable ? "ok" : "degraded";
    body["backend_reachable"] = reachable;
    body["config_version"] = current_version;
    res.status = 200;
    res.set_content(body.dump(), "application/json");
  }
};

Gateway::Gateway(PipelineConfig config, std::shared_ptr<Backend> backend,
                 std::function<double()> clock)
    : impl_(std::make_unique<Impl>()) {
  if (!backend) throw Error(Errc::precondition, "gateway needs a backend");
  impl_->backend = std::move(backend);
  impl_->clock = clock ? std::move(clock) : steady_seconds;
  if (config.gateway_rate_capacity > 0.0) {
    impl_->bucket = std::make_unique<TokenBucket>(config.gateway_rate_capacity,
                                                  config.gateway_rate_refill_per_s,
                                                  impl_->clock);
  }
  impl_->config = std::make_shared<const PipelineConfig>(std::move(config));

  impl_->server.Post("/v1/classify", [this](const httplib::Request& req,
                                            httplib::Response& res) {
    impl_->handle_classify(req, res);
  });
  impl_->server.Get("/v1/healthz", [this](const httplib::Request& req,
                                          httplib::Response& res) {
    impl_->handle_healthz(req, res);
  });
}

Gateway::~Gateway() { stop(); }

int Gateway::bind_any(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool Gateway::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

void Gateway::serve() { impl_->server.listen_after_bind(); }

void Gateway::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

void Gateway::reload_config(PipelineConfig config) {
  std::lock_guard<std::mutex> lock(impl_->config_mutex);
  impl_->config = std::make_shared<const PipelineConfig>(std::move(config));
  ++impl_->version;
}

int Gateway::config_version() const {
  std::lock_guard<std::mutex> lock(impl_->config_mutex);
  return impl_->version;
}

void Gateway::set_log_sink(std::function<void(const std::string&)> sink) {
  impl_->log_sink = std::move(sink);
}

}  // namespace modkit
