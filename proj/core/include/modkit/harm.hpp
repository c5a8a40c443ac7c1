#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "modkit/error.hpp"

namespace modkit {

// The six-harm content safety taxonomy. The first four members are the
// "targeted" harms that classifiers are trained and reported on; the last
// two are annotated but not targeted.
enum class HarmType {
  SexuallyExplicit = 0,
  HateSpeech = 1,
  DangerousContent = 2,
  Harassment = 3,
  Violence = 4,
  ObscenityProfanity = 5,
};

constexpr std::size_t kHarmCount = 6;

constexpr std::array<HarmType, kHarmCount> kAllHarms = {
    HarmType::SexuallyExplicit, HarmType::HateSpeech,
    HarmType::DangerousContent, HarmType::Harassment,
    HarmType::Violence,         HarmType::ObscenityProfanity,
};

constexpr std::array<HarmType, 4> kTargetedHarms = {
    HarmType::SexuallyExplicit,
    HarmType::HateSpeech,
    HarmType::DangerousContent,
    HarmType::Harassment,
};

inline std::span<const HarmType> all_harms() { return kAllHarms; }
inline std::span<const HarmType> targeted_harms() { return kTargetedHarms; }

// Stable wire/file identifier for a harm ("hate_speech", ...).
std::string_view harm_id(HarmType harm);

std::optional<HarmType> harm_from_id(std::string_view id);

inline HarmType require_harm(std::string_view id) {
  auto harm = harm_from_id(id);
  if (!harm) throw Error(Errc::unknown_harm, std::string(id));
  return *harm;
}

// Whether a classification prompt covers only the user prompt or a
// (user prompt, chatbot response) pair.
enum class UseCase {
  PromptOnly,
  PromptResponse,
};

std::string_view use_case_id(UseCase use_case);
std::optional<UseCase> use_case_from_id(std::string_view id);

}  // namespace modkit
