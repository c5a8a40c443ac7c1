#include <algorithm>
#include <cmath>

#include "modkit/scoring.hpp"

namespace modkit {

namespace {

double checked_loglik(double value, const ScoreConfig& cfg, const char* which) {
  if (std::isnan(value) || value == std::numeric_limits<double>::infinity()) {
    throw Error(Errc::non_finite_input,
                std::string("log-likelihood for ") + which + " is not finite");
  }
  if (value == -std::numeric_limits<double>::infinity()) return cfg.ll_floor;
  return value;
}

void check_config(const ScoreConfig& cfg) {
  if (!(cfg.temperature > 0.0) || !std::isfinite(cfg.temperature)) {
    throw Error(Errc::invalid_config, "temperature must be finite and > 0");
  }
  if (!(cfg.alpha >= 0.0) || !std::isfinite(cfg.alpha)) {
    throw Error(Errc::invalid_config, "alpha must be finite and >= 0");
  }
  if (!std::isfinite(cfg.ll_floor)) {
    throw Error(Errc::invalid_config, "ll_floor must be finite");
  }
}

}  // namespace

double violation_probability(const TokenLogLik& ll, const ScoreConfig& cfg) {
  check_config(cfg);
  const double a = checked_loglik(ll.yes, cfg, "Yes") / cfg.temperature;
  const double b = checked_loglik(ll.no, cfg, "No") / cfg.temperature;

  if (cfg.alpha == 0.0) {
    // Shift by the max so neither exponential overflows.
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    return ea / (ea + eb);
  }
  const double m = std::max(a, b);
  if (m > 0.0) {
    // Factor e^m out of every term; the scaled alpha underflows harmlessly
    // when the exponentials dominate it anyway.
    const double scale = std::exp(-m);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    return (ea + cfg.alpha * scale) / (ea + eb + 2.0 * cfg.alpha * scale);
  }
  const double ea = std::exp(a);
  const double eb = std::exp(b);
  return (ea + cfg.alpha) / (ea + eb + 2.0 * cfg.alpha);
}

double aggregate_binary(const HarmScores& scores) {
  if (scores.probability.empty()) {
    throw Error(Errc::empty_scores, "no per-harm probabilities to aggregate");
  }
  double best = 0.0;
  for (const auto& [harm, p] : scores.probability) best = std::max(best, p);
  return best;
}

BinaryDecision decide(const HarmScores& scores, double threshold) {
  if (!std::isfinite(threshold) || threshold < 0.0 || threshold > 1.0) {
    throw Error(Errc::out_of_range, "threshold must lie in [0, 1]");
  }
  BinaryDecision decision;
  decision.overall = aggregate_binary(scores);
  decision.threshold = threshold;
  decision.violative = decision.overall >= threshold;
  return decision;
}

TokenLogLik yes_no_loglik(Backend& backend, const std::string& prompt,
                          Warnings* warnings) {
  LogprobQuery query;
  query.prompt = prompt;
  const LogprobResult result = backend.logprobs(query);

  if (result.per_token.empty()) {
    throw Error(Errc::malformed_response,
                "backend reported neither 'Yes' nor 'No' in its top tokens");
  }

  double reported_min = std::numeric_limits<double>::infinity();
  for (const auto& [token, value] : result.per_token) {
    reported_min = std::min(reported_min, value);
  }
  const double floor = result.min_reported.value_or(reported_min) - 1.0;

  auto lookup = [&](const std::string& token) {
    auto it = result.per_token.find(token);
    if (it != result.per_token.end()) return it->second;
    warn(warnings, "token '" + token + "' missing from top-k; substituting " +
                       std::to_string(floor));
    return floor;
  };

  TokenLogLik ll;
  ll.yes = lookup("Yes");
  ll.no = lookup("No");
  return ll;
}

HarmScores score_example(UseCase use_case, const std::string& user_text,
                         const std::optional<std::string>& model_response,
                         std::span<const HarmType> harms, const ScoreConfig& cfg,
                         Backend& backend, Warnings* warnings,
                         const PolicyRegistry& registry) {
  check_config(cfg);
  if (harms.empty()) {
    throw Error(Errc::precondition, "score_example needs at least one harm");
  }
  HarmScores scores;
  for (HarmType harm : harms) {
    const ClassificationPrompt prompt =
        build_prompt(use_case, harm, user_text, model_response, registry, warnings);
    try {
      const TokenLogLik ll = yes_no_loglik(backend, prompt.rendered_text, warnings);
      scores.probability[harm] = violation_probability(ll, cfg);
    } catch (const Error& e) {
      if (!e.is_backend_failure()) throw;
      throw Error(e.code(), std::string(harm_id(harm)) + ": " + e.message());
    }
  }
  return scores;
}

}  // namespace modkit
