#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modkit/error.hpp"

namespace modkit {

// First-token log-likelihood query. The provider reports its top_k most
// likely first tokens; candidates absent from that report are listed in
// LogprobResult::missing (fallback policy is the caller's business).
struct LogprobQuery {
  std::string prompt;
  std::vector<std::string> candidate_tokens = {"Yes", "No"};
  int top_k = 5;
};

struct LogprobResult {
  std::map<std::string, double> per_token;  // nats
  std::vector<std::string> missing;
  // Smallest log-likelihood anywhere in the provider's top-k report, when
  // known. Used by callers to pick a fallback floor for missing tokens.
  std::optional<double> min_reported;
};

struct GenRequest {
  std::string instruction;
  std::int64_t seed = 0;
  int max_tokens = 256;
};

struct EmbedRequest {
  std::vector<std::string> texts;
};

struct EmbedResult {
  std::vector<std::vector<double>> vectors;  // unit-normalized, equal dim
};

// The three model capabilities the pipeline needs. Implementations must be
// safe for concurrent calls; all state is per-call.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual LogprobResult logprobs(const LogprobQuery& query) = 0;
  virtual std::string generate(const GenRequest& request) = 0;
  virtual EmbedResult embed(const EmbedRequest& request) = 0;

  // Cheap liveness probe for health endpoints. Must not block long.
  virtual bool reachable() = 0;

  virtual std::string model_id() const = 0;
};

// Shared argument validation (same preconditions for every implementation).
void validate_logprob_query(const LogprobQuery& query);
void validate_gen_request(const GenRequest& request);
void validate_embed_request(const EmbedRequest& request);

// Deterministic offline backend. Every method is a pure function of
// (arguments, seed): no wall clock, no global RNG, byte-identical replies
// on repeated calls.
//
// Logprob model: a signed score s is derived from a seeded hash of the
// prompt, plus a +4 bonus when the quoted user text contains a word from
// the violative lexicon; then ll_yes = -softplus(-s) and
// ll_no = -softplus(s), i.e. P(Yes) = logistic(s).
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed = 0, int embed_dim = 64);

  LogprobResult logprobs(const LogprobQuery& query) override;
  std::string generate(const GenRequest& request) override;
  EmbedResult embed(const EmbedRequest& request) override;
  bool reachable() override { return true; }
  std::string model_id() const override;

  // The signed score behind the Yes/No log-likelihoods (debuggable signal).
  double signal_score(std::string_view prompt) const;

  static std::span<const std::string_view> violative_lexicon();

 private:
  std::uint64_t seed_;
  int embed_dim_;
};

// Client-side token bucket. Time is injected so tests can drive it with a
// fake clock; the default clock is steady_clock seconds.
class TokenBucket {
 public:
  TokenBucket(double capacity, double refill_per_second,
              std::function<double()> clock = {});

  bool try_acquire(double tokens = 1.0);
  // 0 when tokens are available now, otherwise the wait in seconds.
  double seconds_until_available(double tokens = 1.0);

 private:
  void refill_locked(double now);

  double capacity_;
  double refill_per_second_;
  double tokens_;
  double last_refill_;
  std::function<double()> clock_;
  std::mutex mutex_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

// Wire seam under HttpBackend; tests substitute a fake.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // path is relative to the configured base URL ("/completions").
  virtual HttpResponse post(const std::string& path, const std::string& json_body,
                            const std::map<std::string, std::string>& headers) = 0;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. "http://localhost:8000/v1"
  std::string api_key;
  std::string model_id = "remote";
  int timeout_ms = 10000;
  int max_retries = 2;       // attempts after the first
  int backoff_base_ms = 100; // doubled per retry, plus seeded jitter
  std::uint64_t seed = 0;    // jitter determinism
  double rate_capacity = 0;  // 0 disables the client-side token bucket
  double rate_refill_per_second = 0;
};

// Applies MODKIT_API_BASE / MODKIT_API_KEY on top of the given config.
HttpBackendConfig apply_env_overrides(HttpBackendConfig config);

// Completion-style HTTP/JSON client:
//   POST {base}/completions  {"prompt","max_tokens","logprobs","temperature","seed"}
//   POST {base}/embeddings   {"input": [...]}
// Retries transport and 429 failures up to the configured budget with
// deterministic exponential backoff; 401/403 fail immediately as Auth.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config,
                       std::unique_ptr<HttpTransport> transport = nullptr,
                       std::function<void(double)> sleep_seconds = {},
                       std::function<double()> clock = {});
  ~HttpBackend() override;

  LogprobResult logprobs(const LogprobQuery& query) override;
  std::string generate(const GenRequest& request) override;
  EmbedResult embed(const EmbedRequest& request) override;
  bool reachable() override;
  std::string model_id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace modkit
