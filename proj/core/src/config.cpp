#include <cmath>
#include <cstdlib>

#include "modkit/config.hpp"
#include "modkit/util.hpp"

namespace modkit {

namespace {

[[noreturn]] void bad_value(std::size_t line, const std::string& key,
                            const std::string& what) {
  throw Error(Errc::invalid_config,
              "line " + std::to_string(line) + ": " + key + ": " + what);
}

double parse_double(const std::string& value, std::size_t line, const std::string& key) {
  char* end = nullptr;
  const double parsed = std::strtod(value.c_str(), &end);
  if (end != value.c_str() + value.size() || value.empty() || !std::isfinite(parsed)) {
    bad_value(line, key, "expected a finite number, got '" + value + "'");
  }
  return parsed;
}

long long parse_int(const std::string& value, std::size_t line, const std::string& key) {
  char* end = nullptr;
  const long long parsed = std::strtoll(value.c_str(), &end, 10);
  if (end != value.c_str() + value.size() || value.empty()) {
    bad_value(line, key, "expected an integer, got '" + value + "'");
  }
  return parsed;
}

std::string unquote(std::string value) {
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
    return value.substr(1, value.size() - 2);
  }
  return value;
}

std::vector<HarmType> parse_harm_list(const std::string& value, std::size_t line) {
  std::vector<HarmType> harms;
  std::size_t start = 0;
  while (start <= value.size()) {
    std::size_t comma = value.find(',', start);
    if (comma == std::string::npos) comma = value.size();
    const std::string id = trim(value.substr(start, comma - start));
    if (!id.empty()) {
      const auto harm = harm_from_id(id);
      if (!harm) bad_value(line, "harms", "unknown harm id '" + id + "'");
      harms.push_back(*harm);
    }
    start = comma + 1;
  }
  if (harms.empty()) bad_value(line, "harms", "needs at least one harm id");
  return harms;
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
  PipelineConfig config;
  std::size_t line_number = 0;
  for (const std::string& raw : split_lines(text)) {
    ++line_number;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::invalid_config,
                  "line " + std::to_string(line_number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = unquote(trim(line.substr(eq + 1)));

    if (key == "temperature") {
      config.score.temperature = parse_double(value, line_number, key);
      if (!(config.score.temperature > 0.0)) bad_value(line_number, key, "must be > 0");
    } else if (key == "alpha") {
      config.score.alpha = parse_double(value, line_number, key);
      if (config.score.alpha < 0.0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "ll_floor") {
      config.score.ll_floor = parse_double(value, line_number, key);
    } else if (key == "threshold") {
      config.threshold = parse_double(value, line_number, key);
      if (config.threshold < 0.0 || config.threshold > 1.0) {
        bad_value(line_number, key, "must lie in [0, 1]");
      }
    } else if (key.rfind("threshold.", 0) == 0) {
      const std::string id = key.substr(10);
      const auto harm = harm_from_id(id);
      if (!harm) bad_value(line_number, key, "unknown harm id '" + id + "'");
      const double t = parse_double(value, line_number, key);
      if (t < 0.0 || t > 1.0) bad_value(line_number, key, "must lie in [0, 1]");
      config.harm_thresholds[*harm] = t;
    } else if (key == "harms") {
      config.harms = parse_harm_list(value, line_number);
    } else if (key == "model_id") {
      config.backend.model_id = value;
    } else if (key == "mock_seed") {
      config.mock_seed = static_cast<std::uint64_t>(parse_int(value, line_number, key));
    } else if (key == "parallelism") {
      config.parallelism = static_cast<int>(parse_int(value, line_number, key));
      if (config.parallelism < 1) bad_value(line_number, key, "must be >= 1");
    } else if (key == "sampler.high_margin_fraction") {
      config.sampler.high_margin_fraction = parse_double(value, line_number, key);
      if (config.sampler.high_margin_fraction < 0.0 ||
          config.sampler.high_margin_fraction >= 1.0) {
        bad_value(line_number, key, "must lie in [0, 1)");
      }
    } else if (key == "sampler.candidate_multiplier") {
      config.sampler.candidate_multiplier = parse_double(value, line_number, key);
      if (config.sampler.candidate_multiplier < 1.0) {
        bad_value(line_number, key, "must be >= 1");
      }
    } else if (key == "sampler.cluster_count") {
      config.sampler.cluster_count = static_cast<int>(parse_int(value, line_number, key));
      if (config.sampler.cluster_count < 0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "backend.base_url") {
      config.backend.base_url = value;
    } else if (key == "backend.api_key") {
      config.backend.api_key = value;
    } else if (key == "backend.timeout_ms") {
      config.backend.timeout_ms = static_cast<int>(parse_int(value, line_number, key));
      if (config.backend.timeout_ms <= 0) bad_value(line_number, key, "must be > 0");
    } else if (key == "backend.max_retries") {
      config.backend.max_retries = static_cast<int>(parse_int(value, line_number, key));
      if (config.backend.max_retries < 0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "backend.backoff_base_ms") {
      config.backend.backoff_base_ms =
          static_cast<int>(parse_int(value, line_number, key));
      if (config.backend.backoff_base_ms < 0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "backend.rate_capacity") {
      config.backend.rate_capacity = parse_double(value, line_number, key);
      if (config.backend.rate_capacity < 0.0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "backend.rate_refill_per_s") {
      config.backend.rate_refill_per_second = parse_double(value, line_number, key);
      if (config.backend.rate_refill_per_second < 0.0) {
        bad_value(line_number, key, "must be >= 0");
      }
    } else if (key == "gateway.port") {
      config.gateway_port = static_cast<int>(parse_int(value, line_number, key));
      if (config.gateway_port < 0 || config.gateway_port > 65535) {
        bad_value(line_number, key, "must be a port number");
      }
    } else if (key == "gateway.probe_ttl_s") {
      config.probe_ttl_s = parse_double(value, line_number, key);
      if (config.probe_ttl_s < 0.0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "gateway.rate_capacity") {
      config.gateway_rate_capacity = parse_double(value, line_number, key);
      if (config.gateway_rate_capacity < 0.0) bad_value(line_number, key, "must be >= 0");
    } else if (key == "gateway.rate_refill_per_s") {
      config.gateway_rate_refill_per_s = parse_double(value, line_number, key);
      if (config.gateway_rate_refill_per_s < 0.0) {
        bad_value(line_number, key, "must be >= 0");
      }
    } else {
      throw Error(Errc::invalid_config,
                  "line " + std::to_string(line_number) + ": unknown key '" + key + "'");
    }
  }
  return config;
}

PipelineConfig load_config(const std::string& path) {
  return parse_config_text(read_text_file(path));
}

std::unique_ptr<Backend> make_backend(const PipelineConfig& config,
                                      const std::string& kind) {
  if (kind == "mock") {
    return std::make_unique<MockBackend>(config.mock_seed);
  }
  if (kind == "http") {
    HttpBackendConfig backend = apply_env_overrides(config.backend);
    if (backend.base_url.empty()) {
      throw Error(Errc::invalid_config,
                  "http backend needs backend.base_url or MODKIT_API_BASE");
    }
    return std::make_unique<HttpBackend>(std::move(backend));
  }
  throw Error(Errc::invalid_config, "unknown backend kind '" + kind + "'");
}

}  // namespace modkit
