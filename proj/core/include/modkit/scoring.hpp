#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>

#include "modkit/backend.hpp"
#include "modkit/error.hpp"
#include "modkit/harm.hpp"
#include "modkit/policy.hpp"

namespace modkit {

// Log-likelihoods of the first generated token being "Yes" / "No".
struct TokenLogLik {
  double yes = 0.0;
  double no = 0.0;
};

struct ScoreConfig {
  double temperature = 1.0;
  double alpha = 0.0;
  // Substitute for -inf log-likelihoods so the ratio stays defined.
  double ll_floor = -50.0;
};

struct HarmScores {
  std::map<HarmType, double> probability;
};

struct BinaryDecision {
  bool violative = false;
  double overall = 0.0;
  double threshold = 0.0;
};

// p = (exp(yes/T) + alpha) / (exp(yes/T) + exp(no/T) + 2*alpha).
// NaN or +inf inputs are rejected; -inf is clamped to cfg.ll_floor.
double violation_probability(const TokenLogLik& ll, const ScoreConfig& cfg = {});

// Max probability across harms.
double aggregate_binary(const HarmScores& scores);

BinaryDecision decide(const HarmScores& scores, double threshold);

// Queries the backend for one prompt. A candidate token absent from the
// reported top-k falls back to one nat below the smallest reported value
// (recorded in warnings); both candidates missing is an error.
TokenLogLik yes_no_loglik(Backend& backend, const std::string& prompt,
                          Warnings* warnings = nullptr);

HarmScores score_example(UseCase use_case, const std::string& user_text,
                         const std::optional<std::string>& model_response,
                         std::span<const HarmType> harms, const ScoreConfig& cfg,
                         Backend& backend, Warnings* warnings = nullptr,
                         const PolicyRegistry& registry = default_policies());

}  // namespace modkit
