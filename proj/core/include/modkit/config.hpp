#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "modkit/backend.hpp"
#include "modkit/error.hpp"
#include "modkit/harm.hpp"
#include "modkit/sampler.hpp"
#include "modkit/scoring.hpp"

namespace modkit {

// Flat key=value configuration shared by the CLI and the gateway.
// Recognized keys:
//   temperature, alpha, ll_floor, threshold, threshold.<harm_id>,
//   harms (comma-separated ids), model_id, mock_seed, parallelism,
//   sampler.high_margin_fraction, sampler.candidate_multiplier,
//   sampler.cluster_count,
//   backend.base_url, backend.api_key, backend.timeout_ms,
//   backend.max_retries, backend.backoff_base_ms, backend.rate_capacity,
//   backend.rate_refill_per_s,
//   gateway.port, gateway.probe_ttl_s, gateway.rate_capacity,
//   gateway.rate_refill_per_s
struct PipelineConfig {
  ScoreConfig score;
  double threshold = 0.5;
  std::map<HarmType, double> harm_thresholds;
  std::vector<HarmType> harms{kTargetedHarms.begin(), kTargetedHarms.end()};
  std::uint64_t mock_seed = 0;
  int parallelism = 1;
  SamplerConfig sampler;  // target_batch and seed come from the invocation
  HttpBackendConfig backend;
  int gateway_port = 8080;
  double probe_ttl_s = 5.0;
  double gateway_rate_capacity = 0.0;
  double gateway_rate_refill_per_s = 0.0;

  double threshold_for(HarmType harm) const {
    auto it = harm_thresholds.find(harm);
    return it == harm_thresholds.end() ? threshold : it->second;
  }
};

PipelineConfig parse_config_text(const std::string& text);
PipelineConfig load_config(const std::string& path);

// kind is "mock" or "http"; http applies MODKIT_API_BASE / MODKIT_API_KEY
// overrides and requires a base URL.
std::unique_ptr<Backend> make_backend(const PipelineConfig& config,
                                      const std::string& kind);

}  // namespace modkit
