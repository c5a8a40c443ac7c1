#pragma once

#include <functional>
#include <memory>
#include <string>

#include "modkit/backend.hpp"
#include "modkit/config.hpp"

namespace modkit {

// HTTP classification service.
//   POST /v1/classify  {use_case, user_text, model_response?, harms?, threshold?}
//     -> {per_harm, overall, violative, config_echo}
//     400 schema violation (field named), 422 use-case/response mismatch,
//     429 rate limited, 502 backend failure (harm named)
//   GET /v1/healthz -> {status, backend_reachable, config_version}
// Every response echoes X-Request-Id; one JSON log line per request goes to
// the sink (stderr by default).
class Gateway {
 public:
  Gateway(PipelineConfig config, std::shared_ptr<Backend> backend,
          std::function<double()> clock = {});
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Binding and serving are split so tests can grab an ephemeral port.
  int bind_any(const std::string& host);
  bool bind(const std::string& host, int port);
  void serve();  // blocking
  void stop();

  void reload_config(PipelineConfig config);
  int config_version() const;

  void set_log_sink(std::function<void(const std::string&)> sink);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace modkit
