#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modkit/backend.hpp"
#include "modkit/datastore.hpp"
#include "modkit/error.hpp"
#include "modkit/harm.hpp"

namespace modkit {

// ---- Grid generation ----

struct TopicSpec {
  std::string topic;
  std::string subtopic;

  bool operator==(const TopicSpec&) const = default;
};

struct GenerationSpec {
  std::vector<HarmType> harms;  // targeted harms only
  std::vector<TopicSpec> topics;
  std::vector<std::string> use_cases;
  std::vector<std::string> locales;
  int quota = 1;
  bool adversarial = true;
  std::uint64_t seed = 0;
};

struct GenerationCell {
  HarmType harm = HarmType::HateSpeech;
  TopicSpec topic;
  std::string use_case;
  std::string locale;
  int quota = 1;
  bool adversarial = true;
  std::size_t index = 0;
  std::uint64_t seed = 0;

  std::string cell_id() const;
  // Content-derived: same axes and seed give the same key, so example ids
  // stay stable across reruns and distinct across differing grids.
  std::uint64_t content_key() const;
};

struct GenerationFailure {
  std::string id;
  std::string reason;
};

struct GenerationOutcome {
  std::vector<ExampleRecord> examples;
  std::vector<GenerationFailure> failures;
};

std::vector<GenerationCell> plan_grid(const GenerationSpec& spec);

// One query per (cell, quota index); failures collected, never silently dropped.
GenerationOutcome generate_queries(const std::vector<GenerationCell>& cells,
                                   Backend& backend);

// Turns prompt-only examples into prompt/response ones; items the backend
// fails on are returned unmodified and listed in the manifest.
GenerationOutcome generate_responses(std::vector<ExampleRecord> examples,
                                     Backend& backend, bool adversarial);

std::vector<TopicSpec> generate_topics(HarmType harm, int n, Backend& backend);

enum class ExpandMode { diversity, difficulty };

// Self-critique expansion: one critic call over the batch, then one generator
// call per requested output. Backend failures abort the whole batch.
std::vector<ExampleRecord> expand_batch(const std::vector<ExampleRecord>& batch,
                                        ExpandMode mode, Backend& backend,
                                        int n_outputs = 1);

// ---- Conversation ingestion ----

enum class Speaker { human, assistant };

struct ConversationTurn {
  Speaker speaker = Speaker::human;
  std::string text;
};

using Conversation = std::vector<ConversationTurn>;

enum class IngestMode { first_utterance, first_pair };

ExampleRecord ingest_conversation(const Conversation& conv, IngestMode mode);

std::vector<Conversation> read_conversations_jsonl(const std::string& path);
void write_conversations_jsonl(const std::string& path,
                               const std::vector<Conversation>& conversations);

// ---- Counterfactual fairness expansion ----

enum class IdentityCategory { Gender, Race, Ethnicity, SexualOrientation, Religion };

const char* category_id(IdentityCategory category);
IdentityCategory category_from_id(const std::string& id);

struct IdentityTerm {
  std::string surface;
  IdentityCategory category = IdentityCategory::Gender;
  std::size_t begin = 0;
  std::size_t end = 0;
};

class IdentityLexicon {
 public:
  IdentityLexicon();  // built-in table, mirrored by the committed asset file
  explicit IdentityLexicon(std::map<IdentityCategory, std::vector<std::string>> terms);
  static IdentityLexicon from_file(const std::string& path);
  static IdentityLexicon from_tsv(const std::string& text);
  std::string to_tsv() const;

  const std::vector<std::string>& terms(IdentityCategory category) const;

  // Whole-word case-insensitive matches, ordered by position (longest wins
  // at equal starts). Surfaces are single words.
  std::vector<IdentityTerm> detect(const std::string& text) const;

 private:
  std::map<IdentityCategory, std::vector<std::string>> terms_;
};

struct CounterfactualPair {
  std::string id;
  std::string original_id;
  std::string text_field;  // prompt_text or response_text
  std::string new_text;
  std::string old_term;
  std::string new_term;
  IdentityCategory category = IdentityCategory::Gender;
  bool label_inherited = true;
  std::map<std::string, int> labels;
  std::string audit_status = "pending";

  bool operator==(const CounterfactualPair&) const = default;
};

// Swaps the leftmost detected identity term for a seeded same-category
// alternative across the whole field, fixing a/an articles. Returns nothing
// when the example carries no identity term.
std::optional<CounterfactualPair> fairness_expand(const ExampleRecord& example,
                                                  const IdentityLexicon& lexicon,
                                                  std::uint64_t seed);

struct AuditDecision {
  std::string pair_id;
  std::string decision;  // approved | rejected
  std::string note;
};

std::vector<CounterfactualPair> read_pairs_jsonl(const std::string& path);
void write_pairs_jsonl(const std::string& path,
                       const std::vector<CounterfactualPair>& pairs);
std::vector<AuditDecision> read_audit_jsonl(const std::string& path);
void write_audit_jsonl(const std::string& path,
                       const std::vector<AuditDecision>& decisions);

// Merges decisions into pair statuses and returns the approved pairs.
std::vector<CounterfactualPair> apply_audit(std::vector<CounterfactualPair>& pairs,
                                            const std::vector<AuditDecision>& decisions);

ExampleRecord pair_to_record(const CounterfactualPair& pair,
                             const ExampleRecord& original);

// ---- Instruction templates ----

inline constexpr const char* kTemplateVersion = "modkit-templates/1";

struct GenerationTemplates {
  std::string version;
  std::string topic_request;
  std::string query_adversarial;
  std::string query_benign;
  std::string response_benign;
  std::string response_adversarial;
  std::string critic;
  std::string generator;
  std::string term_replacement;
};

const GenerationTemplates& generation_templates();

// Replaces {key} placeholders; unknown placeholders are left intact.
std::string render_template(const std::string& tpl,
                            const std::map<std::string, std::string>& vars);

}  // namespace modkit
