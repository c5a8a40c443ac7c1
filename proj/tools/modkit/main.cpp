// modkit: pipeline stages as subcommands, JSONL files between stages.
// Machine-readable summary on stdout, human logs on stderr.
// Exit codes: 0 success, 1 validation error, 2 backend/IO failure,
// 64 unknown subcommand or flag.

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <system_error>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modkit/config.hpp"
#include "modkit/curation.hpp"
#include "modkit/datastore.hpp"
#include "modkit/error.hpp"
#include "modkit/eval.hpp"
#include "modkit/gateway.hpp"
#include "modkit/harm.hpp"
#include "modkit/sampler.hpp"
#include "modkit/scoring.hpp"
#include "modkit/util.hpp"

namespace {

using nlohmann::json;

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

LogLevel g_log_threshold = LogLevel::info;

LogLevel log_level_from_name(const std::string& name) {
  if (name == "debug") return LogLevel::debug;
  if (name == "info") return LogLevel::info;
  if (name == "warn") return LogLevel::warn;
  if (name == "error") return LogLevel::error;
  throw modkit::Error(modkit::Errc::invalid_config,
                      "unknown log level '" + name + "'");
}

void log_line(LogLevel level, const std::string& message) {
  static const char* tags[] = {"debug", "info", "warn", "error"};
  if (level < g_log_threshold) return;
  std::cerr << "modkit [" << tags[static_cast<int>(level)] << "] " << message
            << "\n";
}

void emit_warnings(const modkit::Warnings& warnings) {
  for (const std::string& w : warnings) log_line(LogLevel::warn, w);
}

void print_summary(const json& summary) {
  std::cout << summary.dump() << std::endl;
}

// Everything one stage needs from the surrounding invocation.
struct Invocation {
  std::string config_path;
  std::string backend_kind = "mock";
  std::optional<std::uint64_t> seed;

  modkit::PipelineConfig config;

  void load() {
    if (!config_path.empty()) config = modkit::load_config(config_path);
    if (seed) config.mock_seed = *seed;
  }

  std::uint64_t require_seed(const std::string& stage) const {
    if (!seed) {
      throw modkit::Error(modkit::Errc::invalid_config,
                          stage + " is stochastic and requires --seed");
    }
    return *seed;
  }

  std::unique_ptr<modkit::Backend> backend() const {
    return modkit::make_backend(config, backend_kind);
  }
};

std::vector<modkit::HarmType> parse_harms(const std::vector<std::string>& ids) {
  std::vector<modkit::HarmType> harms;
  harms.reserve(ids.size());
  for (const std::string& id : ids) harms.push_back(modkit::require_harm(id));
  return harms;
}

std::vector<modkit::ExampleRecord> read_records(const std::string& path) {
  auto records = modkit::read_jsonl(path);
  log_line(LogLevel::info,
           "read " + std::to_string(records.size()) + " records from " + path);
  return records;
}

void write_records(const std::string& path,
                   const std::vector<modkit::ExampleRecord>& records) {
  modkit::write_jsonl(path, records);
  log_line(LogLevel::info,
           "wrote " + std::to_string(records.size()) + " records to " + path);
}

// ---- generate ----

struct GenerateArgs {
  std::vector<std::string> harm_ids;
  std::vector<std::string> topics;
  int auto_topics = 0;
  std::vector<std::string> use_cases;
  std::vector<std::string> locales;
  int quota = 1;
  bool benign = false;
  bool label_by_construction = false;
  std::string out;
  std::string failures_path;
};

modkit::TopicSpec parse_topic(const std::string& text) {
  const auto sep = text.find(" / ");
  if (sep == std::string::npos) {
    throw modkit::Error(modkit::Errc::invalid_config,
                        "--topic expects 'topic / subtopic', got '" + text + "'");
  }
  return {text.substr(0, sep), text.substr(sep + 3)};
}

// Labels every record from its generation cell: the cell's harm for
// adversarial cells, all-benign otherwise. Intended for synthetic corpora
// where no human ratings exist.
void label_from_cells(std::vector<modkit::ExampleRecord>& records) {
  for (modkit::ExampleRecord& record : records) {
    const bool adversarial = record.gen_params["adversarial"] == "true";
    const std::string harm = record.gen_params["harm"];
    for (modkit::HarmType h : modkit::targeted_harms()) {
      const std::string id{modkit::harm_id(h)};
      record.labels[id] = adversarial && id == harm ? 1 : 0;
    }
  }
}

int run_generate(const Invocation& inv, const GenerateArgs& args) {
  inv.require_seed("generate");
  auto backend = inv.backend();

  modkit::GenerationSpec spec;
  spec.harms = args.harm_ids.empty()
                   ? std::vector<modkit::HarmType>(modkit::kTargetedHarms.begin(),
                                                   modkit::kTargetedHarms.end())
                   : parse_harms(args.harm_ids);
  for (const std::string& t : args.topics) spec.topics.push_back(parse_topic(t));
  if (args.auto_topics > 0) {
    for (modkit::HarmType harm : spec.harms) {
      auto generated = modkit::generate_topics(harm, args.auto_topics, *backend);
      spec.topics.insert(spec.topics.end(), generated.begin(), generated.end());
    }
  }
  spec.use_cases = args.use_cases.empty() ? std::vector<std::string>{"prompt_only"}
                                          : args.use_cases;
  for (const std::string& uc : spec.use_cases) {
    if (!modkit::use_case_from_id(uc)) {
      throw modkit::Error(modkit::Errc::invalid_config,
                          "unknown use case '" + uc + "'");
    }
  }
  spec.locales = args.locales.empty() ? std::vector<std::string>{"en"} : args.locales;
  spec.quota = args.quota;
  spec.adversarial = !args.benign;
  spec.seed = inv.config.mock_seed;

  const auto cells = modkit::plan_grid(spec);
  log_line(LogLevel::info, "planned " + std::to_string(cells.size()) + " cells");

  auto outcome = modkit::generate_queries(cells, *backend);

  // Cells asking for prompt/response examples get a second generation pass.
  std::vector<modkit::ExampleRecord> done;
  std::vector<modkit::ExampleRecord> need_response;
  for (auto& record : outcome.examples) {
    auto& bucket = record.gen_params["use_case"] == "prompt_response"
                       ? need_response
                       : done;
    bucket.push_back(std::move(record));
  }
  if (!need_response.empty()) {
    auto responded = modkit::generate_responses(std::move(need_response), *backend,
                                                spec.adversarial);
    for (auto& record : responded.examples) done.push_back(std::move(record));
    for (auto& failure : responded.failures)
      outcome.failures.push_back(std::move(failure));
  }
  std::sort(done.begin(), done.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  if (args.label_by_construction) label_from_cells(done);

  write_records(args.out, done);
  for (const auto& failure : outcome.failures) {
    log_line(LogLevel::warn, "generation failed for " + failure.id + ": " +
                                 failure.reason);
  }
  if (!args.failures_path.empty()) {
    std::string manifest;
    for (const auto& failure : outcome.failures) {
      manifest += json{{"id", failure.id}, {"reason", failure.reason}}.dump();
      manifest += "\n";
    }
    modkit::write_text_file(args.failures_path, manifest);
  }

  json summary{{"cells", cells.size()},
               {"examples", done.size()},
               {"failures", outcome.failures.size()},
               {"out", args.out}};
  if (!args.failures_path.empty()) summary["failures_path"] = args.failures_path;
  print_summary(summary);
  return 0;
}

// ---- expand ----

struct ExpandArgs {
  std::string in;
  std::string out;
  std::string mode = "diversity";
  int n_outputs = 1;
};

int run_expand(const Invocation& inv, const ExpandArgs& args) {
  inv.require_seed("expand");
  auto backend = inv.backend();

  modkit::ExpandMode mode;
  if (args.mode == "diversity") {
    mode = modkit::ExpandMode::diversity;
  } else if (args.mode == "difficulty") {
    mode = modkit::ExpandMode::difficulty;
  } else {
    throw modkit::Error(modkit::Errc::invalid_config,
                        "--mode must be diversity or difficulty");
  }

  const auto batch = read_records(args.in);
  const auto expanded = modkit::expand_batch(batch, mode, *backend, args.n_outputs);
  write_records(args.out, expanded);

  print_summary(json{{"examples", expanded.size()},
                     {"in", batch.size()},
                     {"mode", args.mode},
                     {"out", args.out}});
  return 0;
}

// ---- ingest ----

struct IngestArgs {
  std::string in;
  std::string out;
  std::string mode = "first_utterance";
};

int run_ingest(const Invocation&, const IngestArgs& args) {
  modkit::IngestMode mode;
  if (args.mode == "first_utterance") {
    mode = modkit::IngestMode::first_utterance;
  } else if (args.mode == "first_pair") {
    mode = modkit::IngestMode::first_pair;
  } else {
    throw modkit::Error(modkit::Errc::invalid_config,
                        "--mode must be first_utterance or first_pair");
  }

  const auto conversations = modkit::read_conversations_jsonl(args.in);
  std::vector<modkit::ExampleRecord> records;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < conversations.size(); ++i) {
    try {
      records.push_back(modkit::ingest_conversation(conversations[i], mode));
    } catch (const modkit::Error& e) {
      if (e.code() != modkit::Errc::malformed_conversation) throw;
      ++skipped;
      log_line(LogLevel::warn,
               "conversation " + std::to_string(i) + " skipped: " + e.what());
    }
  }
  write_records(args.out, records);

  print_summary(json{{"conversations", conversations.size()},
                     {"examples", records.size()},
                     {"out", args.out},
                     {"skipped", skipped}});
  return 0;
}

// ---- fairness ----

struct FairnessArgs {
  std::string in;
  std::string pairs;
  std::string lexicon;
  std::string audit;
  std::string out;
  std::string update_pairs;
};

int run_fairness_generate(const Invocation& inv, const FairnessArgs& args) {
  const std::uint64_t seed = inv.require_seed("fairness");
  const auto lexicon = args.lexicon.empty()
                           ? modkit::IdentityLexicon()
                           : modkit::IdentityLexicon::from_file(args.lexicon);

  const auto records = read_records(args.in);
  std::vector<modkit::CounterfactualPair> pairs;
  std::size_t no_term = 0;
  std::size_t skipped = 0;
  for (const auto& record : records) {
    if (record.labels.empty()) {
      ++skipped;
      log_line(LogLevel::warn, record.id + " skipped: unlabeled");
      continue;
    }
    try {
      auto pair = modkit::fairness_expand(record, lexicon, seed);
      if (pair) {
        pairs.push_back(std::move(*pair));
      } else {
        ++no_term;
      }
    } catch (const modkit::Error& e) {
      if (e.code() != modkit::Errc::no_alternative_term &&
          e.code() != modkit::Errc::replacement_identical) {
        throw;
      }
      ++skipped;
      log_line(LogLevel::warn, record.id + " skipped: " + e.what());
    }
  }
  modkit::write_pairs_jsonl(args.pairs, pairs);
  log_line(LogLevel::info, "wrote " + std::to_string(pairs.size()) +
                               " pairs to " + args.pairs);

  print_summary(json{{"examples", records.size()},
                     {"no_identity_term", no_term},
                     {"pairs", pairs.size()},
                     {"pairs_path", args.pairs},
                     {"skipped", skipped}});
  return 0;
}

int run_fairness_apply(const Invocation&, const FairnessArgs& args) {
  auto pairs = modkit::read_pairs_jsonl(args.pairs);
  const auto decisions = modkit::read_audit_jsonl(args.audit);
  const auto approved = modkit::apply_audit(pairs, decisions);

  const auto records = read_records(args.in);
  std::map<std::string, const modkit::ExampleRecord*> by_id;
  for (const auto& record : records) by_id[record.id] = &record;

  std::vector<modkit::ExampleRecord> out;
  for (const auto& pair : approved) {
    auto it = by_id.find(pair.original_id);
    if (it == by_id.end()) {
      throw modkit::Error(modkit::Errc::unknown_pair_id,
                          pair.id + ": original " + pair.original_id +
                              " not present in --in corpus");
    }
    out.push_back(modkit::pair_to_record(pair, *it->second));
  }
  write_records(args.out, out);
  if (!args.update_pairs.empty()) modkit::write_pairs_jsonl(args.update_pairs, pairs);

  json summary{{"approved", approved.size()},
               {"decisions", decisions.size()},
               {"out", args.out},
               {"pairs", pairs.size()}};
  if (!args.update_pairs.empty()) summary["pairs_path"] = args.update_pairs;
  print_summary(summary);
  return 0;
}

int run_fairness(const Invocation& inv, const FairnessArgs& args) {
  if (!args.audit.empty()) {
    if (args.in.empty() || args.out.empty()) {
      throw modkit::Error(modkit::Errc::invalid_config,
                          "--audit needs --in and --out");
    }
    return run_fairness_apply(inv, args);
  }
  if (args.in.empty() || args.pairs.empty()) {
    throw modkit::Error(modkit::Errc::invalid_config,
                        "fairness needs --in and --pairs (or --audit to apply)");
  }
  return run_fairness_generate(inv, args);
}

// ---- subsample ----

struct SubsampleArgs {
  std::string pool;
  int batch = 0;
  std::string out;
  std::string audit;
};

int run_subsample(const Invocation& inv, const SubsampleArgs& args) {
  const std::uint64_t seed = inv.require_seed("subsample");
  auto backend = inv.backend();

  const auto records = read_records(args.pool);
  modkit::Warnings warnings;
  const auto pool = modkit::rescore_pool(records, *backend, inv.config.score,
                                         inv.config.harms, &warnings);
  emit_warnings(warnings);

  modkit::SamplerConfig cfg = inv.config.sampler;
  cfg.target_batch = args.batch;
  cfg.seed = seed;
  const auto selection = modkit::select_batch(pool.items, cfg);

  std::map<std::string, const modkit::ExampleRecord*> by_id;
  for (const auto& record : records) by_id[record.id] = &record;
  std::vector<modkit::ExampleRecord> selected;
  selected.reserve(selection.selected_ids.size());
  for (const std::string& id : selection.selected_ids) {
    selected.push_back(*by_id.at(id));
  }
  write_records(args.out, selected);

  if (!args.audit.empty()) {
    json trace = json::parse(selection.to_json());
    trace["model_id"] = pool.model_id;
    trace["unscored"] = json::array();
    for (const auto& [id, reason] : pool.unscored) {
      trace["unscored"].push_back({{"id", id}, {"reason", reason}});
    }
    modkit::write_text_file(args.audit, trace.dump(2) + "\n");
  }

  json summary{{"out", args.out},
               {"pool", records.size()},
               {"selected", selected.size()},
               {"unscored", pool.unscored.size()}};
  if (!args.audit.empty()) summary["audit"] = args.audit;
  print_summary(summary);
  return 0;
}

// ---- merge-ratings ----

struct MergeArgs {
  std::string in;
  std::string ratings;
  std::string out;
  int raters = 3;
};

int run_merge_ratings(const Invocation&, const MergeArgs& args) {
  auto records = read_records(args.in);
  const auto ratings = modkit::read_ratings_jsonl(args.ratings);

  std::map<std::string, std::vector<modkit::RatingRecord>> by_example;
  for (const auto& rating : ratings) by_example[rating.example_id].push_back(rating);

  std::set<std::string> known_ids;
  for (const auto& record : records) known_ids.insert(record.id);
  std::size_t unmatched = 0;
  for (const auto& [example_id, group] : by_example) {
    if (!known_ids.contains(example_id)) {
      ++unmatched;
      log_line(LogLevel::warn, "ratings for unknown example " + example_id);
    }
  }

  std::size_t labeled = 0;
  std::size_t unrated = 0;
  for (auto& record : records) {
    auto it = by_example.find(record.id);
    if (it == by_example.end()) {
      ++unrated;
      continue;
    }
    record.labels = modkit::majority_vote(it->second, args.raters);
    ++labeled;
  }
  write_records(args.out, records);

  print_summary(json{{"labeled", labeled},
                     {"out", args.out},
                     {"records", records.size()},
                     {"unmatched_ratings", unmatched},
                     {"unrated", unrated}});
  return 0;
}

// ---- split ----

struct SplitArgs {
  std::string in;
  std::string out;
  double fraction = 0.7;
};

int run_split(const Invocation& inv, const SplitArgs& args) {
  const std::uint64_t seed = inv.require_seed("split");
  auto records = read_records(args.in);
  modkit::split_assign(records, args.fraction, seed);
  write_records(args.out, records);

  std::size_t train = 0;
  for (const auto& record : records) {
    if (record.split == modkit::Split::train) ++train;
  }
  print_summary(json{{"fraction", args.fraction},
                     {"out", args.out},
                     {"test", records.size() - train},
                     {"train", train}});
  return 0;
}

// ---- stats ----

int run_stats(const Invocation&, const std::string& in) {
  const auto records = read_records(in);
  modkit::Warnings warnings;
  const auto stats = modkit::compute_stats(records, &warnings);
  emit_warnings(warnings);

  print_summary(json{{"benign", stats.benign},
                     {"by_source", stats.by_source},
                     {"by_split", stats.by_split},
                     {"multi_harm", stats.multi_harm},
                     {"positives_per_harm", stats.positives_per_harm},
                     {"total", stats.total},
                     {"unlabeled", stats.unlabeled}});
  return 0;
}

// ---- score ----

struct ScoreArgs {
  std::string in;
  std::string out;
};

int run_score(const Invocation& inv, const ScoreArgs& args) {
  auto backend = inv.backend();
  auto records = read_records(args.in);

  modkit::Warnings warnings;
  for (auto& record : records) {
    const auto scores =
        modkit::score_example(record.use_case_kind, record.prompt_text,
                              record.response_text, inv.config.harms,
                              inv.config.score, *backend, &warnings);
    for (const auto& [harm, p] : scores.probability) {
      record.scores[std::string(modkit::harm_id(harm))] = p;
    }
  }
  emit_warnings(warnings);
  write_records(args.out, records);

  print_summary(json{{"model_id", backend->model_id()},
                     {"n_scored", records.size()},
                     {"out", args.out}});
  return 0;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string data;
  std::string report;
  std::string csv;
  std::string curves;
  std::string mode = "one_vs_all";
};

int run_evaluate(const Invocation& inv, const EvaluateArgs& args) {
  auto backend = inv.backend();
  const auto records = read_records(args.data);

  modkit::EvalConfig cfg;
  cfg.score = inv.config.score;
  cfg.threshold = inv.config.threshold;
  cfg.harms = inv.config.harms;
  if (args.mode == "overall") {
    cfg.mode = modkit::EvalMode::overall;
  } else if (args.mode == "one_vs_all") {
    cfg.mode = modkit::EvalMode::one_vs_all;
  } else {
    throw modkit::Error(modkit::Errc::invalid_config,
                        "--mode must be overall or one_vs_all");
  }

  modkit::Warnings warnings;
  const auto report = modkit::evaluate(records, *backend, cfg, &warnings);
  emit_warnings(warnings);

  if (!args.report.empty()) modkit::write_text_file(args.report, report.to_json());
  if (!args.csv.empty()) modkit::write_text_file(args.csv, report.to_csv());
  if (!args.curves.empty()) modkit::write_text_file(args.curves, report.curves_json());

  json summary{{"au_prc", report.overall.au_prc},
               {"mode", report.mode},
               {"model_id", report.model_id},
               {"n", records.size()},
               {"optimal_f1", report.overall.optimal_f1}};
  if (!args.report.empty()) summary["report"] = args.report;
  print_summary(summary);
  return 0;
}

// ---- serve ----

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = -1;
};

int run_serve(const Invocation& inv, const ServeArgs& args) {
  std::shared_ptr<modkit::Backend> backend{inv.backend().release()};
  modkit::Gateway gateway(inv.config, backend);
  const int port = args.port >= 0 ? args.port : inv.config.gateway_port;
  if (!gateway.bind(args.host, port)) {
    throw modkit::Error(modkit::Errc::transport,
                        "cannot bind " + args.host + ":" + std::to_string(port));
  }
  print_summary(json{{"host", args.host}, {"port", port}});
  log_line(LogLevel::info, "serving on " + args.host + ":" + std::to_string(port));
  gateway.serve();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safety content-moderation pipeline toolkit"};
  app.require_subcommand(1);

  Invocation inv;
  std::string log_level = "info";
  app.add_option("--config", inv.config_path, "key=value configuration file");
  app.add_option("--backend", inv.backend_kind, "mock or http")
      ->check(CLI::IsMember({"mock", "http"}));
  app.add_option("--seed", inv.seed, "seed for stochastic stages");
  app.add_option("--log-level", log_level, "debug, info, warn, error");

  auto stage = [&app](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->fallthrough();
    return sub;
  };

  GenerateArgs generate_args;
  CLI::App* generate = stage("generate", "Plan a generation grid and synthesize queries");
  generate->add_option("--harm", generate_args.harm_ids, "targeted harm ids");
  generate->add_option("--topic", generate_args.topics, "'topic / subtopic' axis entries");
  generate->add_option("--auto-topics", generate_args.auto_topics,
                       "generate this many topics per harm");
  generate->add_option("--use-case", generate_args.use_cases,
                       "prompt_only and/or prompt_response");
  generate->add_option("--locale", generate_args.locales, "locale axis entries");
  generate->add_option("--quota", generate_args.quota, "examples per cell");
  generate->add_flag("--benign", generate_args.benign, "generate benign queries");
  generate->add_flag("--label-by-construction", generate_args.label_by_construction,
                     "label each example from its generation cell (synthetic corpora)");
  generate->add_option("--out", generate_args.out, "output records JSONL")->required();
  generate->add_option("--failures", generate_args.failures_path,
                       "failure manifest JSONL");

  ExpandArgs expand_args;
  CLI::App* expand = stage("expand", "Self-critique batch expansion");
  expand->add_option("--in", expand_args.in, "input records JSONL")->required();
  expand->add_option("--out", expand_args.out, "output records JSONL")->required();
  expand->add_option("--mode", expand_args.mode, "diversity or difficulty");
  expand->add_option("--n", expand_args.n_outputs, "new examples to generate");

  IngestArgs ingest_args;
  CLI::App* ingest = stage("ingest", "Turn conversations into example records");
  ingest->add_option("--in", ingest_args.in, "conversations JSONL")->required();
  ingest->add_option("--out", ingest_args.out, "output records JSONL")->required();
  ingest->add_option("--mode", ingest_args.mode, "first_utterance or first_pair");

  FairnessArgs fairness_args;
  CLI::App* fairness = stage("fairness", "Counterfactual identity-term expansion");
  fairness->add_option("--in", fairness_args.in, "labeled records JSONL");
  fairness->add_option("--pairs", fairness_args.pairs, "counterfactual pairs JSONL");
  fairness->add_option("--lexicon", fairness_args.lexicon, "identity term TSV");
  fairness->add_option("--audit", fairness_args.audit,
                       "audit decisions JSONL (switches to apply mode)");
  fairness->add_option("--out", fairness_args.out, "approved records JSONL");
  fairness->add_option("--update-pairs", fairness_args.update_pairs,
                       "write pairs with updated audit status");

  SubsampleArgs subsample_args;
  CLI::App* subsample = stage("subsample", "Cluster-margin batch selection");
  subsample->add_option("--pool", subsample_args.pool, "candidate pool JSONL")->required();
  subsample->add_option("--batch", subsample_args.batch, "target batch size")->required();
  subsample->add_option("--out", subsample_args.out, "selected records JSONL")->required();
  subsample->add_option("--audit", subsample_args.audit, "selection trace JSON");

  MergeArgs merge_args;
  CLI::App* merge = stage("merge-ratings", "Majority-vote rater labels onto records");
  merge->add_option("--in", merge_args.in, "records JSONL")->required();
  merge->add_option("--ratings", merge_args.ratings, "ratings JSONL")->required();
  merge->add_option("--out", merge_args.out, "labeled records JSONL")->required();
  merge->add_option("--raters", merge_args.raters, "required ratings per example");

  SplitArgs split_args;
  CLI::App* split = stage("split", "Stratified train/test assignment");
  split->add_option("--in", split_args.in, "records JSONL")->required();
  split->add_option("--out", split_args.out, "records JSONL with splits")->required();
  split->add_option("--fraction", split_args.fraction, "train fraction in (0, 1)");

  std::string stats_in;
  CLI::App* stats = stage("stats", "Corpus statistics");
  stats->add_option("--in", stats_in, "records JSONL")->required();

  ScoreArgs score_args;
  CLI::App* score = stage("score", "Fill per-harm violation probabilities");
  score->add_option("--in", score_args.in, "records JSONL")->required();
  score->add_option("--out", score_args.out, "scored records JSONL")->required();

  EvaluateArgs evaluate_args;
  CLI::App* evaluate = stage("evaluate", "PR metrics over a labeled corpus");
  evaluate->add_option("--data", evaluate_args.data, "labeled records JSONL")->required();
  evaluate->add_option("--report", evaluate_args.report, "report JSON path");
  evaluate->add_option("--csv", evaluate_args.csv, "metrics CSV path");
  evaluate->add_option("--curves", evaluate_args.curves, "PR curves JSON path");
  evaluate->add_option("--mode", evaluate_args.mode, "overall or one_vs_all");

  ServeArgs serve_args;
  CLI::App* serve = stage("serve", "HTTP classification gateway");
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--port", serve_args.port, "bind port (default from config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << std::flush;
    return 64;
  }

  try {
    g_log_threshold = log_level_from_name(log_level);
    inv.load();

    if (generate->parsed()) return run_generate(inv, generate_args);
    if (expand->parsed()) return run_expand(inv, expand_args);
    if (ingest->parsed()) return run_ingest(inv, ingest_args);
    if (fairness->parsed()) return run_fairness(inv, fairness_args);
    if (subsample->parsed()) return run_subsample(inv, subsample_args);
    if (merge->parsed()) return run_merge_ratings(inv, merge_args);
    if (split->parsed()) return run_split(inv, split_args);
    if (stats->parsed()) return run_stats(inv, stats_in);
    if (score->parsed()) return run_score(inv, score_args);
    if (evaluate->parsed()) return run_evaluate(inv, evaluate_args);
    if (serve->parsed()) return run_serve(inv, serve_args);
    return 64;
  } catch (const modkit::Error& e) {
    log_line(LogLevel::error, e.what());
    print_summary(json{{"error", {{"code", modkit::errc_name(e.code())},
                                  {"message", e.what()}}}});
    return e.is_backend_failure() ? 2 : 1;
  } catch (const std::system_error& e) {
    log_line(LogLevel::error, e.what());
    print_summary(json{{"error", {{"code", "Io"}, {"message", e.what()}}}});
    return 2;
  } catch (const std::exception& e) {
    log_line(LogLevel::error, e.what());
    print_summary(json{{"error", {{"code", "Internal"}, {"message", e.what()}}}});
    return 1;
  }
}
