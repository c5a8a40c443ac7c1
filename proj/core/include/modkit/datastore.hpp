#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modkit/error.hpp"
#include "modkit/harm.hpp"

namespace modkit {

inline constexpr const char* kRecordSchema = "modkit/1";

enum class Split { unassigned = 0, train = 1, test = 2 };

const char* split_id(Split split);
Split split_from_id(const std::string& id);

// One corpus example. Label/score maps are keyed by harm id strings so that
// unknown harms survive a round-trip; computations only consult declared
// harms and warn about the rest. Unrecognized top-level JSON fields are
// stashed in provenance as raw JSON text.
struct ExampleRecord {
  std::string id;
  UseCase use_case_kind = UseCase::PromptOnly;
  std::string prompt_text;
  std::optional<std::string> response_text;
  std::map<std::string, int> labels;
  std::map<std::string, double> scores;
  Split split = Split::unassigned;
  std::string source;
  std::map<std::string, std::string> gen_params;
  std::map<std::string, std::string> provenance;

  bool operator==(const ExampleRecord&) const = default;
};

struct RatingRecord {
  std::string example_id;
  std::string rater_id;
  std::map<std::string, int> per_harm;

  bool operator==(const RatingRecord&) const = default;
};

struct CorpusStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_split;
  std::map<std::string, std::size_t> by_source;
  std::map<std::string, std::size_t> positives_per_harm;
  std::size_t benign = 0;
  std::size_t multi_harm = 0;
  std::size_t unlabeled = 0;
};

// Per-harm label = 1 iff more than half of the raters marked 1. Requires
// exactly n_raters ratings from distinct raters; n_raters must be odd.
std::map<std::string, int> majority_vote(const std::vector<RatingRecord>& ratings,
                                         int n_raters = 3);

std::string record_to_json_line(const ExampleRecord& record);
ExampleRecord record_from_json_line(const std::string& line, std::size_t line_number = 0);

std::vector<ExampleRecord> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<ExampleRecord>& records);

std::vector<RatingRecord> read_ratings_jsonl(const std::string& path);
void write_ratings_jsonl(const std::string& path, const std::vector<RatingRecord>& ratings);

// Seeded stratified train/test assignment over use_case_kind; per-stratum
// train counts land within one item of train_fraction.
void split_assign(std::vector<ExampleRecord>& records, double train_fraction,
                  std::uint64_t seed);

CorpusStats compute_stats(const std::vector<ExampleRecord>& records,
                          Warnings* warnings = nullptr);

}  // namespace modkit
