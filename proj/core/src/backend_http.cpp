#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "modkit/backend.hpp"
#include "modkit/util.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>
#include <json.hpp>

namespace modkit {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string host;  // scheme://host:port
  std::string path;  // optional prefix, no trailing slash
};

SplitUrl split_base_url(const std::string& base_url) {
  SplitUrl out;
  const std::size_t scheme = base_url.find("://");
  const std::size_t path_start =
      base_url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) {
    out.host = base_url;
  } else {
    out.host = base_url.substr(0, path_start);
    out.path = base_url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  }
  return out;
}

class HttplibTransport : public HttpTransport {
 public:
  HttplibTransport(const std::string& base_url, int timeout_ms)
      : url_(split_base_url(base_url)), client_(url_.host) {
    const auto seconds = timeout_ms / 1000;
    const auto micros = (timeout_ms % 1000) * 1000;
    client_.set_connection_timeout(seconds, micros);
    client_.set_read_timeout(seconds, micros);
    client_.set_write_timeout(seconds, micros);
  }

  HttpResponse post(const std::string& path, const std::string& json_body,
                    const std::map<std::string, std::string>& headers) override {
    httplib::Headers hdrs(headers.begin(), headers.end());
    auto result = client_.Post(url_.path + path, hdrs, json_body, "application/json");
    HttpResponse response;
    if (!result) {
      response.status = 0;
      response.body = httplib::to_string(result.error());
      return response;
    }
    response.status = result->status;
    response.body = result->body;
    for (const auto& [key, value] : result->headers) response.headers[key] = value;
    return response;
  }

 private:
  SplitUrl url_;
  httplib::Client client_;
};

json parse_json(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    throw Error(Errc::malformed_response, "response is not valid JSON");
  }
  return parsed;
}

const json& require(const json& node, const char* key) {
  auto it = node.find(key);
  if (it == node.end()) {
    throw Error(Errc::malformed_response,
                std::string("response missing field \"") + key + "\"");
  }
  return *it;
}

}  // namespace

HttpBackendConfig apply_env_overrides(HttpBackendConfig config) {
  if (const char* base = std::getenv("MODKIT_API_BASE"); base && *base) {
    config.base_url = base;
  }
  if (const char* key = std::getenv("MODKIT_API_KEY"); key && *key) {
    config.api_key = key;
  }
  return config;
}

struct HttpBackend::Impl {
  HttpBackendConfig config;
  std::unique_ptr<HttpTransport> transport;
  std::unique_ptr<HttpTransport> probe_transport;  // capped at 1s
  std::function<void(double)> sleep_seconds;
  std::unique_ptr<TokenBucket> bucket;

  std::map<std::string, std::string> headers() const {
    std::map<std::string, std::string> out;
    if (!config.api_key.empty()) out["Authorization"] = "Bearer " + config.api_key;
    return out;
  }

  double backoff_seconds(int retry_index) const {
    const double base = config.backoff_base_ms / 1000.0;
    const double jitter =
        base * unit_from_hash(splitmix64(config.seed ^
                                         static_cast<std::uint64_t>(retry_index + 1)));
    return base * static_cast<double>(1 << retry_index) + jitter;
  }

  std::string post_with_retry(const std::string& path, const json& body) {
    const std::string payload = body.dump();
    const int attempts = config.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (bucket) {
        double wait = bucket->seconds_until_available();
        while (wait > 0) {
          sleep_seconds(wait);
          wait = bucket->seconds_until_available();
        }
        bucket->try_acquire();
      }

      const HttpResponse response = transport->post(path, payload, headers());
      const bool last = attempt + 1 == attempts;

      if (response.status == 401 || response.status == 403) {
        throw Error(Errc::auth, "HTTP " + std::to_string(response.status) + " from " + path);
      }
      if (response.status >= 200 && response.status < 300) {
        return response.body;
      }
      if (response.status == 429) {
        if (last) throw Error(Errc::rate_limited, "HTTP 429 from " + path);
        double wait = backoff_seconds(attempt);
        if (auto it = response.headers.find("Retry-After"); it != response.headers.end()) {
          char* end = nullptr;
          const double retry_after = std::strtod(it->second.c_str(), &end);
          if (end != it->second.c_str() && retry_after >= 0) {
            wait = std::max(wait, retry_after);
          }
        }
        sleep_seconds(wait);
        continue;
      }
      if (response.status == 0 || response.status >= 500) {
        if (last) {
          throw Error(Errc::transport,
                      response.status == 0
                          ? "transport failure: " + response.body
                          : "HTTP " + std::to_string(response.status) + " from " + path);
        }
        sleep_seconds(backoff_seconds(attempt));
        continue;
      }
      // Remaining 4xx: the request was rejected; retrying cannot help.
      throw Error(Errc::transport,
                  "HTTP " + std::to_string(response.status) + " from " + path + ": " +
                      response.body.substr(0, 200));
    }
    throw Error(Errc::transport, "retry budget exhausted for " + path);
  }
};

HttpBackend::HttpBackend(HttpBackendConfig config,
                         std::unique_ptr<HttpTransport> transport,
                         std::function<void(double)> sleep_seconds,
                         std::function<double()> clock)
    : impl_(std::make_unique<Impl>()) {
  if (config.base_url.empty()) {
    throw Error(Errc::invalid_config, "http backend needs a base_url");
  }
  if (config.max_retries < 0 || config.timeout_ms <= 0) {
    throw Error(Errc::invalid_config, "http backend: bad timeout/retry settings");
  }
  impl_->config = std::move(config);
  if (transport) {
    impl_->transport = std::move(transport);
  } else {
    impl_->transport = std::make_unique<HttplibTransport>(impl_->config.base_url,
                                                          impl_->config.timeout_ms);
    impl_->probe_transport = std::make_unique<HttplibTransport>(
        impl_->config.base_url, std::min(impl_->config.timeout_ms, 1000));
  }
  impl_->sleep_seconds = sleep_seconds
                             ? std::move(sleep_seconds)
                             : [](double seconds) {
                                 std::this_thread::sleep_for(
                                     std::chrono::duration<double>(seconds));
                               };
  if (impl_->config.rate_capacity > 0) {
    impl_->bucket = std::make_unique<TokenBucket>(
        impl_->config.rate_capacity, impl_->config.rate_refill_per_second,
        std::move(clock));
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::model_id() const { return impl_->config.model_id; }

LogprobResult HttpBackend::logprobs(const LogprobQuery& query) {
  validate_logprob_query(query);
  json body = {
      {"prompt", query.prompt},
      {"max_tokens", 1},
      {"logprobs", query.top_k},
      {"temperature", 0},
  };
  const json parsed = parse_json(impl_->post_with_retry("/completions", body));
  const json& choices = require(parsed, "choices");
  if (!choices.is_array() || choices.empty()) {
    throw Error(Errc::malformed_response, "choices is empty");
  }
  const json& top = require(require(choices.at(0), "logprobs"), "top_logprobs");
  if (!top.is_array() || top.empty() || !top.at(0).is_object()) {
    throw Error(Errc::malformed_response, "top_logprobs[0] missing or not an object");
  }

  // Provider token -> logprob for the first generated position.
  std::map<std::string, double> reported;
  for (const auto& [token, value] : top.at(0).items()) {
    if (!value.is_number()) {
      throw Error(Errc::malformed_response, "non-numeric logprob for token");
    }
    reported[token] = value.get<double>();
  }
  if (reported.empty()) {
    throw Error(Errc::malformed_response, "top_logprobs[0] is empty");
  }

  LogprobResult result;
  double min_value = reported.begin()->second;
  for (const auto& [token, value] : reported) min_value = std::min(min_value, value);
  result.min_reported = min_value;

  for (const std::string& candidate : query.candidate_tokens) {
    // Raw match first; providers commonly emit " Yes", so a token equal to
    // the candidate after stripping one leading space also counts.
    if (auto it = reported.find(candidate); it != reported.end()) {
      result.per_token[candidate] = it->second;
      continue;
    }
    bool found = false;
    for (const auto& [token, value] : reported) {
      if (token.size() == candidate.size() + 1 && token.front() == ' ' &&
          std::string_view(token).substr(1) == candidate) {
        result.per_token[candidate] = value;
        found = true;
        break;
      }
    }
    if (!found) result.missing.push_back(candidate);
  }
  return result;
}

std::string HttpBackend::generate(const GenRequest& request) {
  validate_gen_request(request);
  json body = {
      {"prompt", request.instruction},
      {"max_tokens", request.max_tokens},
      {"temperature", 0},
      {"seed", request.seed},
  };
  const json parsed = parse_json(impl_->post_with_retry("/completions", body));
  const json& choices = require(parsed, "choices");
  if (!choices.is_array() || choices.empty()) {
    throw Error(Errc::malformed_response, "choices is empty");
  }
  const json& text = require(choices.at(0), "text");
  if (!text.is_string()) {
    throw Error(Errc::malformed_response, "choices[0].text is not a string");
  }
  return text.get<std::string>();
}

EmbedResult HttpBackend::embed(const EmbedRequest& request) {
  validate_embed_request(request);
  json body = {{"input", request.texts}};
  const json parsed = parse_json(impl_->post_with_retry("/embeddings", body));
  const json& data = require(parsed, "data");
  if (!data.is_array() || data.size() != request.texts.size()) {
    throw Error(Errc::malformed_response,
                "embeddings count does not match input count");
  }

  EmbedResult result;
  std::size_t dim = 0;
  for (const json& item : data) {
    const json& embedding = require(item, "embedding");
    if (!embedding.is_array() || embedding.empty()) {
      throw Error(Errc::malformed_response, "embedding is not a non-empty array");
    }
    std::vector<double> vec;
    vec.reserve(embedding.size());
    for (const json& value : embedding) {
      if (!value.is_number()) {
        throw Error(Errc::malformed_response, "non-numeric embedding component");
      }
      vec.push_back(value.get<double>());
    }
    if (dim == 0) {
      dim = vec.size();
    } else if (vec.size() != dim) {
      throw Error(Errc::dimension_mismatch, "ragged embedding dimensions");
    }
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      throw Error(Errc::malformed_response, "zero-norm embedding");
    }
    for (double& v : vec) v /= norm;
    result.vectors.push_back(std::move(vec));
  }
  return result;
}

bool HttpBackend::reachable() {
  json body = {
      {"prompt", "ping"}, {"max_tokens", 1}, {"logprobs", 2}, {"temperature", 0}};
  HttpTransport* transport =
      impl_->probe_transport ? impl_->probe_transport.get() : impl_->transport.get();
  const HttpResponse response =
      transport->post("/completions", body.dump(), impl_->headers());
  return response.status >= 200 && response.status < 300;
}

}  // namespace modkit
