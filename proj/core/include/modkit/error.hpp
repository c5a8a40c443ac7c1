#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace modkit {

// Error codes for every failure mode the library reports. The CLI maps
// these onto exit codes: backend/transport failures exit 2, everything
// else (validation, schema, precondition) exits 1.
enum class Errc {
  invalid_config,
  non_finite_input,
  out_of_range,
  empty_scores,
  missing_response,
  unexpected_response,
  unknown_harm,
  precondition,

  transport,
  auth,
  rate_limited,
  malformed_response,
  dimension_mismatch,

  empty_pool,
  empty_selectable,

  empty_axis,
  malformed_conversation,
  replacement_identical,
  no_alternative_term,
  unknown_pair_id,

  parse_error,
  schema_violation,
  wrong_rater_count,
  even_rater_count,
  empty_corpus,

  degenerate_labels,
  no_positives,
  unlabeled_record,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_config: return "InvalidConfig";
    case Errc::non_finite_input: return "NonFiniteInput";
    case Errc::out_of_range: return "OutOfRange";
    case Errc::empty_scores: return "EmptyScores";
    case Errc::missing_response: return "MissingResponse";
    case Errc::unexpected_response: return "UnexpectedResponse";
    case Errc::unknown_harm: return "UnknownHarm";
    case Errc::precondition: return "Precondition";
    case Errc::transport: return "Transport";
    case Errc::auth: return "Auth";
    case Errc::rate_limited: return "RateLimited";
    case Errc::malformed_response: return "MalformedResponse";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_pool: return "EmptyPool";
    case Errc::empty_selectable: return "EmptySelectable";
    case Errc::empty_axis: return "EmptyAxis";
    case Errc::malformed_conversation: return "MalformedConversation";
    case Errc::replacement_identical: return "ReplacementProducedIdenticalText";
    case Errc::no_alternative_term: return "NoAlternativeTerm";
    case Errc::unknown_pair_id: return "UnknownPairId";
    case Errc::parse_error: return "ParseError";
    case Errc::schema_violation: return "SchemaViolation";
    case Errc::wrong_rater_count: return "WrongRaterCount";
    case Errc::even_rater_count: return "EvenRaterCount";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::degenerate_labels: return "DegenerateLabels";
    case Errc::no_positives: return "NoPositives";
    case Errc::unlabeled_record: return "UnlabeledRecord";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        message_(message) {}

  Errc code() const { return code_; }

  // The text without the code prefix, for callers that re-wrap with context.
  const std::string& message() const { return message_; }

  // True for failures caused by a backend or the wire, as opposed to bad
  // input on our side.
  bool is_backend_failure() const {
    switch (code_) {
      case Errc::transport:
      case Errc::auth:
      case Errc::rate_limited:
      case Errc::malformed_response:
        return true;
      default:
        return false;
    }
  }

 private:
  Errc code_;
  std::string message_;
};

// Non-fatal diagnostics. Callers that care pass a sink; callers that do
// not pass nullptr and warnings are dropped.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace modkit
