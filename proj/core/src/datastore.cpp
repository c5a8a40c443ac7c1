#include <cmath>
#include <set>
#include <sstream>

#include "modkit/datastore.hpp"
#include "modkit/util.hpp"

#include <json.hpp>

namespace modkit {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(std::size_t line, const std::string& path,
                               const std::string& what) {
  std::string msg = path + ": " + what;
  if (line > 0) msg = "line " + std::to_string(line) + ": " + msg;
  throw Error(Errc::schema_violation, msg);
}

std::string require_string(const json& node, const char* key, std::size_t line) {
  auto it = node.find(key);
  if (it == node.end() || !it->is_string()) {
    schema_error(line, key, it == node.end() ? "missing" : "must be a string");
  }
  return it->get<std::string>();
}

std::map<std::string, int> read_binary_map(const json& node, const std::string& path,
                                           std::size_t line) {
  if (!node.is_object()) schema_error(line, path, "must be an object");
  std::map<std::string, int> out;
  for (const auto& [key, value] : node.items()) {
    if (!value.is_number_integer() ||
        (value.get<int>() != 0 && value.get<int>() != 1)) {
      schema_error(line, path + "." + key, "must be 0 or 1");
    }
    out[key] = value.get<int>();
  }
  return out;
}

std::map<std::string, std::string> read_string_map(const json& node,
                                                   const std::string& path,
                                                   std::size_t line) {
  if (!node.is_object()) schema_error(line, path, "must be an object");
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : node.items()) {
    if (!value.is_string()) schema_error(line, path + "." + key, "must be a string");
    out[key] = value.get<std::string>();
  }
  return out;
}

json parse_line(const std::string& line, std::size_t line_number) {
  json parsed = json::parse(line, nullptr, false);
  if (parsed.is_discarded()) {
    std::string msg = "invalid JSON";
    if (line_number > 0) msg = "line " + std::to_string(line_number) + ": " + msg;
    throw Error(Errc::parse_error, msg);
  }
  return parsed;
}

bool known_field(const std::string& key) {
  static const std::set<std::string> kKnown = {
      "schema",   "id",     "use_case_kind", "prompt_text", "response_text",
      "labels",   "scores", "split",         "source",      "gen_params",
      "provenance"};
  return kKnown.count(key) > 0;
}

}  // namespace

const char* split_id(Split split) {
  switch (split) {
    case Split::unassigned: return "unassigned";
    case Split::train: return "train";
    case Split::test: return "test";
  }
  throw Error(Errc::precondition, "bad split value");
}

Split split_from_id(const std::string& id) {
  if (id == "unassigned") return Split::unassigned;
  if (id == "train") return Split::train;
  if (id == "test") return Split::test;
  throw Error(Errc::schema_violation, "split: unknown value '" + id + "'");
}

std::map<std::string, int> majority_vote(const std::vector<RatingRecord>& ratings,
                                         int n_raters) {
  if (n_raters <= 0 || n_raters % 2 == 0) {
    throw Error(Errc::even_rater_count,
                "n_raters must be a positive odd number, got " + std::to_string(n_raters));
  }
  if (static_cast<int>(ratings.size()) != n_raters) {
    throw Error(Errc::wrong_rater_count,
                "expected " + std::to_string(n_raters) + " ratings, got " +
                    std::to_string(ratings.size()));
  }
  std::set<std::string> raters;
  for (const RatingRecord& rating : ratings) {
    if (!raters.insert(rating.rater_id).second) {
      throw Error(Errc::wrong_rater_count,
                  "duplicate rater_id '" + rating.rater_id + "'");
    }
    if (!ratings.empty() && rating.example_id != ratings.front().example_id) {
      throw Error(Errc::precondition, "ratings span multiple example_ids");
    }
  }

  std::map<std::string, int> tally;
  for (const RatingRecord& rating : ratings) {
    for (const auto& [harm, vote] : rating.per_harm) tally[harm] += vote;
  }
  std::map<std::string, int> labels;
  for (const auto& [harm, votes] : tally) {
    labels[harm] = 2 * votes > n_raters ? 1 : 0;
  }
  return labels;
}

std::string record_to_json_line(const ExampleRecord& record) {
  json out;
  out["schema"] = kRecordSchema;
  out["id"] = record.id;
  out["use_case_kind"] = std::string(use_case_id(record.use_case_kind));
  out["prompt_text"] = record.prompt_text;
  if (record.response_text) out["response_text"] = *record.response_text;
  if (!record.labels.empty()) out["labels"] = record.labels;
  if (!record.scores.empty()) out["scores"] = record.scores;
  out["split"] = split_id(record.split);
  out["source"] = record.source;
  if (!record.gen_params.empty()) out["gen_params"] = record.gen_params;
  if (!record.provenance.empty()) out["provenance"] = record.provenance;
  return out.dump();
}

ExampleRecord record_from_json_line(const std::string& line, std::size_t line_number) {
  const json parsed = parse_line(line, line_number);
  if (!parsed.is_object()) schema_error(line_number, "$", "record must be a JSON object");
  if (auto it = parsed.find("schema");
      it != parsed.end() && (!it->is_string() || it->get<std::string>() != kRecordSchema)) {
    schema_error(line_number, "schema", std::string("expected \"") + kRecordSchema + "\"");
  }

  ExampleRecord record;
  record.id = require_string(parsed, "id", line_number);
  if (record.id.empty()) schema_error(line_number, "id", "must be non-empty");

  const std::string kind = require_string(parsed, "use_case_kind", line_number);
  const auto parsed_kind = use_case_from_id(kind);
  if (!parsed_kind) {
    schema_error(line_number, "use_case_kind", "unknown value '" + kind + "'");
  }
  record.use_case_kind = *parsed_kind;

  record.prompt_text = require_string(parsed, "prompt_text", line_number);

  if (auto it = parsed.find("response_text"); it != parsed.end()) {
    if (!it->is_string()) schema_error(line_number, "response_text", "must be a string");
    record.response_text = it->get<std::string>();
  }
  if (record.use_case_kind == UseCase::PromptResponse && !record.response_text) {
    schema_error(line_number, "response_text", "required for prompt_response records");
  }
  if (record.use_case_kind == UseCase::PromptOnly && record.response_text) {
    schema_error(line_number, "response_text", "not allowed for prompt_only records");
  }

  if (auto it = parsed.find("labels"); it != parsed.end()) {
    record.labels = read_binary_map(*it, "labels", line_number);
  }
  if (auto it = parsed.find("scores"); it != parsed.end()) {
    if (!it->is_object()) schema_error(line_number, "scores", "must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_number()) schema_error(line_number, "scores." + key, "must be a number");
      const double p = value.get<double>();
      if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
        schema_error(line_number, "scores." + key, "must lie in [0, 1]");
      }
      record.scores[key] = p;
    }
  }
  if (auto it = parsed.find("split"); it != parsed.end()) {
    if (!it->is_string()) schema_error(line_number, "split", "must be a string");
    try {
      record.split = split_from_id(it->get<std::string>());
    } catch (const Error& e) {
      schema_error(line_number, "split", e.message());
    }
  }
  if (auto it = parsed.find("source"); it != parsed.end()) {
    if (!it->is_string()) schema_error(line_number, "source", "must be a string");
    record.source = it->get<std::string>();
  }
  if (auto it = parsed.find("gen_params"); it != parsed.end()) {
    record.gen_params = read_string_map(*it, "gen_params", line_number);
  }
  if (auto it = parsed.find("provenance"); it != parsed.end()) {
    record.provenance = read_string_map(*it, "provenance", line_number);
  }
  for (const auto& [key, value] : parsed.items()) {
    if (!known_field(key)) record.provenance[key] = value.dump();
  }
  return record;
}

std::vector<ExampleRecord> read_jsonl(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<ExampleRecord> records;
  std::size_t line_number = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_number;
    if (trim(line).empty()) continue;
    records.push_back(record_from_json_line(line, line_number));
  }
  return records;
}

void write_jsonl(const std::string& path, const std::vector<ExampleRecord>& records) {
  std::string out;
  for (const ExampleRecord& record : records) {
    out += record_to_json_line(record);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<RatingRecord> read_ratings_jsonl(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<RatingRecord> ratings;
  std::size_t line_number = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_number;
    if (trim(line).empty()) continue;
    const json parsed = parse_line(line, line_number);
    if (!parsed.is_object()) schema_error(line_number, "$", "rating must be a JSON object");
    RatingRecord rating;
    rating.example_id = require_string(parsed, "example_id", line_number);
    rating.rater_id = require_string(parsed, "rater_id", line_number);
    auto it = parsed.find("per_harm");
    if (it == parsed.end()) schema_error(line_number, "per_harm", "missing");
    rating.per_harm = read_binary_map(*it, "per_harm", line_number);
    ratings.push_back(std::move(rating));
  }
  return ratings;
}

void write_ratings_jsonl(const std::string& path, const std::vector<RatingRecord>& ratings) {
  std::string out;
  for (const RatingRecord& rating : ratings) {
    json line;
    line["example_id"] = rating.example_id;
    line["rater_id"] = rating.rater_id;
    line["per_harm"] = rating.per_harm;
    out += line.dump();
    out += '\n';
  }
  write_text_file(path, out);
}

void split_assign(std::vector<ExampleRecord>& records, double train_fraction,
                  std::uint64_t seed) {
  if (records.empty()) throw Error(Errc::empty_corpus, "no records to split");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw Error(Errc::out_of_range, "train_fraction must lie in (0, 1)");
  }

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) {
    strata[std::string(use_case_id(records[i].use_case_kind))].push_back(i);
  }
  for (auto& [stratum, indices] : strata) {
    deterministic_shuffle(indices, splitmix64(seed ^ fnv1a64(stratum)));
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(indices.size()) + 0.5));
    for (std::size_t j = 0; j < indices.size(); ++j) {
      records[indices[j]].split = j < n_train ? Split::train : Split::test;
    }
  }
}

CorpusStats compute_stats(const std::vector<ExampleRecord>& records, Warnings* warnings) {
  CorpusStats stats;
  stats.total = records.size();
  std::set<std::string> unknown_harms;
  for (const ExampleRecord& record : records) {
    ++stats.by_split[split_id(record.split)];
    ++stats.by_source[record.source.empty() ? "unknown" : record.source];
    if (record.labels.empty()) {
      ++stats.unlabeled;
      continue;
    }
    int positives = 0;
    for (const auto& [harm, label] : record.labels) {
      bool declared = false;
      for (HarmType h : all_harms()) {
        if (harm == harm_id(h)) {
          declared = true;
          break;
        }
      }
      if (!declared) {
        unknown_harms.insert(harm);
        continue;
      }
      if (label == 1) {
        ++stats.positives_per_harm[harm];
        ++positives;
      }
    }
    if (positives == 0) ++stats.benign;
    if (positives >= 2) ++stats.multi_harm;
  }
  for (const std::string& harm : unknown_harms) {
    warn(warnings, "unknown harm '" + harm + "' excluded from statistics");
  }
  return stats;
}

}  // namespace modkit
