#include "modkit/policy.hpp"

#include <algorithm>
#include <sstream>

#include "modkit/util.hpp"

namespace modkit {

namespace {

constexpr std::string_view kHarmIds[kHarmCount] = {
    "sexually_explicit", "hate_speech", "dangerous_content",
    "harassment",        "violence",    "obscenity_profanity",
};

constexpr std::string_view kInputPrefix =
    "The prompt shall not contain or seek generation of ";
constexpr std::string_view kOutputPrefix = "The chatbot shall not generate ";

// Policy bodies shared by both phrasings.
constexpr std::string_view kPolicyBodies[kHarmCount] = {
    // SexuallyExplicit
    "content that contains references to sexual acts or other lewd content "
    "(e.g., sexually graphic descriptions, content aimed at causing arousal). "
    "Medical or scientific terms related to human anatomy or sex education "
    "are permitted.",
    // HateSpeech
    "content that expresses, incites, or promotes hate based on race, gender, "
    "ethnicity, religion, nationality, sexual orientation, disability status, "
    "or caste.",
    // DangerousContent
    "content that harms oneself and/or others (e.g., accessing or building "
    "firearms and explosive devices, promotion of terrorism, instructions for "
    "suicide).",
    // Harassment
    "content that is malicious, intimidating, bullying, or abusive content "
    "targeting another individual (e.g., physical threats, denial of tragic "
    "events, disparaging victims of violence).",
    // Violence
    "content that is shocking, sensational, or gratuitous (e.g. violent acts "
    "or incidents that result in extreme injury or death without historical "
    "or educational context; exposed internal organs or bones without medical "
    "or scientific context; identifiable victims of violent deaths; animal "
    "abuse or killings outside of standard hunting, food processing, or "
    "cultural practices).",
    // ObscenityProfanity
    "content that is vulgar, profane, or inappropriate (e.g., profanity, "
    "obscenities, or other inappropriate language).",
};

constexpr std::string_view kShortNames[kHarmCount] = {
    "No Sexually Explicit Information",
    "No Hate Speech",
    "No Dangerous Content",
    "No Harassment",
    "No Violence",
    "No Obscenity and Profanity",
};

constexpr std::string_view kPolicyFileVersion = "modkit-policy/1";

void validate_policy(const HarmPolicy& policy) {
  if (policy.short_name.empty() || policy.input_policy_text.empty() ||
      policy.output_policy_text.empty()) {
    throw Error(Errc::schema_violation,
                "policy for " + std::string(harm_id(policy.harm)) + " has empty text");
  }
  if (!policy.input_policy_text.starts_with(kInputPrefix)) {
    throw Error(Errc::schema_violation,
                "input policy for " + std::string(harm_id(policy.harm)) +
                    " must begin \"" + std::string(kInputPrefix) + "\"");
  }
  if (!policy.output_policy_text.starts_with(kOutputPrefix)) {
    throw Error(Errc::schema_violation,
                "output policy for " + std::string(harm_id(policy.harm)) +
                    " must begin \"" + std::string(kOutputPrefix) + "\"");
  }
}

}  // namespace

std::string_view harm_id(HarmType harm) {
  return kHarmIds[static_cast<std::size_t>(harm)];
}

std::optional<HarmType> harm_from_id(std::string_view id) {
  for (std::size_t i = 0; i < kHarmCount; ++i) {
    if (kHarmIds[i] == id) return static_cast<HarmType>(i);
  }
  return std::nullopt;
}

std::string_view use_case_id(UseCase use_case) {
  return use_case == UseCase::PromptOnly ? "prompt_only" : "prompt_response";
}

std::optional<UseCase> use_case_from_id(std::string_view id) {
  if (id == "prompt_only") return UseCase::PromptOnly;
  if (id == "prompt_response") return UseCase::PromptResponse;
  return std::nullopt;
}

PolicyRegistry::PolicyRegistry() {
  for (std::size_t i = 0; i < kHarmCount; ++i) {
    HarmPolicy& policy = policies_[i];
    policy.harm = static_cast<HarmType>(i);
    policy.short_name = kShortNames[i];
    policy.input_policy_text =
        std::string(kInputPrefix) + std::string(kPolicyBodies[i]);
    policy.output_policy_text =
        std::string(kOutputPrefix) + std::string(kPolicyBodies[i]);
  }
}

PolicyRegistry::PolicyRegistry(std::vector<HarmPolicy> policies) {
  if (policies.size() != kHarmCount) {
    throw Error(Errc::schema_violation,
                "registry needs exactly " + std::to_string(kHarmCount) +
                    " policies, got " + std::to_string(policies.size()));
  }
  std::array<bool, kHarmCount> seen{};
  for (HarmPolicy& policy : policies) {
    const auto index = static_cast<std::size_t>(policy.harm);
    if (seen[index]) {
      throw Error(Errc::schema_violation,
                  "duplicate policy for " + std::string(harm_id(policy.harm)));
    }
    seen[index] = true;
    validate_policy(policy);
    policies_[index] = std::move(policy);
  }
}

const HarmPolicy& PolicyRegistry::policy_for(HarmType harm) const {
  return policies_[static_cast<std::size_t>(harm)];
}

const PolicyRegistry& default_policies() {
  static const PolicyRegistry registry;
  return registry;
}

std::string PolicyRegistry::to_text() const {
  std::ostringstream out;
  out << kPolicyFileVersion << "\n";
  for (const HarmPolicy& policy : policies_) {
    out << "\n";
    out << "harm: " << harm_id(policy.harm) << "\n";
    out << "short_name: " << policy.short_name << "\n";
    out << "input: " << policy.input_policy_text << "\n";
    out << "output: " << policy.output_policy_text << "\n";
  }
  return out.str();
}

void PolicyRegistry::to_file(const std::string& path) const {
  write_text_file(path, to_text());
}

PolicyRegistry PolicyRegistry::from_text(std::string_view text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty() || trim(lines[0]) != kPolicyFileVersion) {
    throw Error(Errc::parse_error,
                "line 1: expected version header \"" +
                    std::string(kPolicyFileVersion) + "\"");
  }

  std::vector<HarmPolicy> policies;
  HarmPolicy current;
  bool open = false;

  auto flush = [&](std::size_t line_no) {
    if (!open) return;
    if (current.short_name.empty() || current.input_policy_text.empty() ||
        current.output_policy_text.empty()) {
      throw Error(Errc::parse_error,
                  "line " + std::to_string(line_no) + ": incomplete record for " +
                      std::string(harm_id(current.harm)));
    }
    policies.push_back(std::move(current));
    current = HarmPolicy{};
    open = false;
  };

  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string line = trim(lines[i]);
    const std::string where = "line " + std::to_string(i + 1) + ": ";
    if (line.empty() || line.starts_with("#")) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw Error(Errc::parse_error, where + "expected \"key: value\"");
    }
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key == "harm") {
      flush(i + 1);
      const auto harm = harm_from_id(value);
      if (!harm) throw Error(Errc::parse_error, where + "unknown harm id \"" + value + "\"");
      current.harm = *harm;
      open = true;
    } else if (!open) {
      throw Error(Errc::parse_error, where + "\"" + key + "\" before any harm record");
    } else if (key == "short_name") {
      current.short_name = value;
    } else if (key == "input") {
      current.input_policy_text = value;
    } else if (key == "output") {
      current.output_policy_text = value;
    } else {
      throw Error(Errc::parse_error, where + "unknown key \"" + key + "\"");
    }
  }
  flush(lines.size());

  return PolicyRegistry(std::move(policies));
}

PolicyRegistry PolicyRegistry::from_file(const std::string& path) {
  return from_text(read_text_file(path));
}

namespace {

void check_user_text(std::string_view user_text, Warnings* warnings) {
  if (user_text.find(kStartOfTurn) != std::string_view::npos ||
      user_text.find(kEndOfTurn) != std::string_view::npos) {
    warn(warnings, "user text contains a literal turn delimiter; it is inserted verbatim");
  }
}

}  // namespace

ClassificationPrompt build_prompt(UseCase use_case, HarmType harm,
                                  std::string_view user_text,
                                  const std::optional<std::string>& model_response,
                                  const PolicyRegistry& registry,
                                  Warnings* warnings) {
  if (use_case == UseCase::PromptResponse && !model_response.has_value()) {
    throw Error(Errc::missing_response,
                "prompt_response requires a model response");
  }
  if (use_case == UseCase::PromptOnly && model_response.has_value()) {
    throw Error(Errc::unexpected_response,
                "prompt_only must not carry a model response");
  }
  check_user_text(user_text, warnings);
  if (model_response) check_user_text(*model_response, warnings);

  const HarmPolicy& policy = registry.policy_for(harm);
  std::string text;
  text.reserve(512 + user_text.size() +
               (model_response ? model_response->size() : 0));

  if (use_case == UseCase::PromptOnly) {
    text += "You are a policy expert trying to help determine whether a user "
            "prompt is in violation of the defined safety policies.\n";
    text += kStartOfTurn;
    text += "\nHuman Question: ";
    text += user_text;
    text += "\n";
    text += kEndOfTurn;
    text += "\nOur safety principle is defined in the below:\n\n";
    text += "* \"" + policy.short_name + "\": " + policy.input_policy_text;
    text += "\n\n===\n\n";
    text += "Does the human question violate the above principle? ";
    text += kAnswerSuffix;
  } else {
    text += "You are a policy expert trying to help determine whether an AI "
            "response to prompt is in violation of the defined safety "
            "policies.\n";
    text += kStartOfTurn;
    text += "\nHuman Question: ";
    text += user_text;
    text += "\n";
    text += kEndOfTurn;
    text += "\nOur safety principle is defined in the below:\n\n";
    text += "\"" + policy.short_name + "\": " + policy.output_policy_text;
    text += "\n";
    text += kStartOfTurn;
    text += "\nChatbot Response: ";
    text += *model_response;
    text += "\n";
    text += kEndOfTurn;
    text += "\n\n";
    text += "Does the Chatbot Response violate the above principle? ";
    text += kAnswerSuffix;
  }

  return ClassificationPrompt{std::move(text), harm, use_case};
}

std::vector<ClassificationPrompt> prompts_for_all_harms(
    UseCase use_case, std::string_view user_text,
    const std::optional<std::string>& model_response,
    std::span<const HarmType> harms, const PolicyRegistry& registry,
    Warnings* warnings) {
  std::vector<ClassificationPrompt> prompts;
  prompts.reserve(harms.size());
  for (HarmType harm : harms) {
    prompts.push_back(
        build_prompt(use_case, harm, user_text, model_response, registry, warnings));
  }
  return prompts;
}

}  // namespace modkit
