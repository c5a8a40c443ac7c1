#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modkit/error.hpp"
#include "modkit/harm.hpp"

namespace modkit {

// One harm's policy wording in both phrasings: the input variant speaks
// about what a user prompt may contain or seek, the output variant about
// what the chatbot may generate.
struct HarmPolicy {
  HarmType harm = HarmType::SexuallyExplicit;
  std::string short_name;          // e.g. "No Hate Speech"
  std::string input_policy_text;   // "The prompt shall not contain or seek generation of ..."
  std::string output_policy_text;  // "The chatbot shall not generate ..."
};

struct ClassificationPrompt {
  std::string rendered_text;
  HarmType harm = HarmType::SexuallyExplicit;
  UseCase use_case = UseCase::PromptOnly;
};

// Immutable registry of the six policies. Construction validates the
// wording invariants; afterwards every operation is const and safe for
// unrestricted concurrent use.
class PolicyRegistry {
 public:
  // Registry with the built-in policy wording.
  PolicyRegistry();

  // Registry with overridden wording (deployments tune policy text).
  // Requires exactly one entry per harm.
  explicit PolicyRegistry(std::vector<HarmPolicy> policies);

  const HarmPolicy& policy_for(HarmType harm) const;

  // Versioned plain-text round trip ("modkit-policy/1"). One record per
  // harm: id, short name, input text, output text.
  static PolicyRegistry from_file(const std::string& path);
  static PolicyRegistry from_text(std::string_view text);
  std::string to_text() const;
  void to_file(const std::string& path) const;

 private:
  std::array<HarmPolicy, kHarmCount> policies_;
};

// Shared process-wide registry with the built-in wording.
const PolicyRegistry& default_policies();

// Renders the classification prompt for one harm. PromptResponse requires
// model_response, PromptOnly forbids it. User text is inserted verbatim; a
// warning (not an error) is emitted when it contains the literal turn
// delimiters, since that can confuse downstream template parsing.
ClassificationPrompt build_prompt(UseCase use_case, HarmType harm,
                                  std::string_view user_text,
                                  const std::optional<std::string>& model_response,
                                  const PolicyRegistry& registry = default_policies(),
                                  Warnings* warnings = nullptr);

// One prompt per harm, in the order given (default: all six).
std::vector<ClassificationPrompt> prompts_for_all_harms(
    UseCase use_case, std::string_view user_text,
    const std::optional<std::string>& model_response,
    std::span<const HarmType> harms = all_harms(),
    const PolicyRegistry& registry = default_policies(),
    Warnings* warnings = nullptr);

// Literal turn delimiters used by the templates.
inline constexpr std::string_view kStartOfTurn = "<start_of_turn>";
inline constexpr std::string_view kEndOfTurn = "<end_of_turn>";

// Exact closing sentence every rendered prompt ends with.
inline constexpr std::string_view kAnswerSuffix =
    "Your answer must start with 'Yes' or 'No'. And then walk through step "
    "by step to be sure we answer correctly.";

}  // namespace modkit
