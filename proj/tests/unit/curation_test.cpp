#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "generators.hpp"
#include "modkit/backend.hpp"
#include "modkit/curation.hpp"
#include "modkit/util.hpp"
#include "temp_dir.hpp"

using namespace modkit;
using testsupport::Gen;
using testsupport::TempDir;

namespace {

GenerationSpec small_spec() {
  GenerationSpec spec;
  spec.harms = {HarmType::SexuallyExplicit, HarmType::HateSpeech,
                HarmType::DangerousContent, HarmType::Harassment};
  spec.topics = {{"online gaming", "voice chat"}, {"politics", "rallies"}};
  spec.use_cases = {"email", "tweet", "question"};
  spec.locales = {"en-US"};
  spec.quota = 2;
  spec.seed = 11;
  return spec;
}

// Records every instruction and replies with scripted or templated text.
class CapturingBackend : public Backend {
 public:
  explicit CapturingBackend(std::string reply = "generated text")
      : reply_(std::move(reply)) {}

  LogprobResult logprobs(const LogprobQuery&) override { return {}; }
  std::string generate(const GenRequest& request) override {
    validate_gen_request(request);
    instructions.push_back(request.instruction);
    if (!fail_needle.empty() &&
        request.instruction.find(fail_needle) != std::string::npos) {
      throw Error(Errc::transport, "boom");
    }
    return reply_ + " #" + std::to_string(instructions.size());
  }
  EmbedResult embed(const EmbedRequest&) override { return {}; }
  bool reachable() override { return true; }
  std::string model_id() const override { return "capture"; }

  std::vector<std::string> instructions;
  std::string fail_needle;

 private:
  std::string reply_;
};

ExampleRecord prompt_only(std::string id, std::string prompt,
                          std::map<std::string, int> labels = {}) {
  ExampleRecord record;
  record.id = std::move(id);
  record.prompt_text = std::move(prompt);
  record.labels = std::move(labels);
  return record;
}

bool mentions_lexicon_word(const std::string& text) {
  for (std::string_view term : MockBackend::violative_lexicon()) {
    if (contains_word(text, term)) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("the instruction templates carry their placeholders") {
  const GenerationTemplates& t = generation_templates();
  CHECK(t.version == std::string(kTemplateVersion));
  CHECK(t.topic_request.find("'topic / subtopic'") != std::string::npos);
  CHECK(t.topic_request.find("{harm}") != std::string::npos);
  for (const std::string* query : {&t.query_adversarial, &t.query_benign}) {
    for (const char* key : {"{use_case}", "{locale}", "{topic}", "{subtopic}", "{harm}"}) {
      CHECK(query->find(key) != std::string::npos);
    }
  }
  CHECK(t.query_adversarial.find("adversarial") != std::string::npos);
  CHECK(t.response_benign.find("You are a careful chatbot") != std::string::npos);
  CHECK(t.response_benign.find("Prompt: {prompt}") != std::string::npos);
  CHECK(t.response_adversarial.find("simulating an unsafe chatbot") != std::string::npos);
  CHECK(t.response_adversarial.find("Prompt: {prompt}") != std::string::npos);
  for (const char* key : {"{batch}", "{quality}"}) {
    CHECK(t.critic.find(key) != std::string::npos);
    CHECK(t.generator.find(key) != std::string::npos);
  }
  CHECK(t.generator.find("{critique}") != std::string::npos);
  CHECK(t.generator.find("{index}") != std::string::npos);
  for (const char* key : {"{old}", "{new}", "{text}"}) {
    CHECK(t.term_replacement.find(key) != std::string::npos);
  }
}

TEST_CASE("template rendering replaces known keys and keeps unknown ones") {
  CHECK(render_template("{a} and {a} but {b}", {{"a", "X"}}) == "X and X but {b}");
  CHECK(render_template("no placeholders", {{"a", "X"}}) == "no placeholders");
  CHECK(render_template("{harm} policy", {{"harm", "hate speech"}}) ==
        "hate speech policy");
  // Inserted values are not re-scanned.
  CHECK(render_template("{a}", {{"a", "{a}"}}) == "{a}");
}

TEST_CASE("grid planning crosses every axis in declaration order") {
  const std::vector<GenerationCell> cells = plan_grid(small_spec());
  REQUIRE(cells.size() == 24);  // 4 harms x 2 topics x 3 use cases x 1 locale

  std::size_t planned_queries = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].index == i);
    CHECK(cells[i].cell_id() == "c" + std::to_string(i));
    CHECK(cells[i].quota == 2);
    CHECK(cells[i].adversarial);
    CHECK(cells[i].seed == 11);
    planned_queries += static_cast<std::size_t>(cells[i].quota);
  }
  CHECK(planned_queries == 48);

  // Locale is the innermost axis, use case next, then topic, then harm.
  CHECK(cells[0].harm == HarmType::SexuallyExplicit);
  CHECK(cells[0].topic.topic == "online gaming");
  CHECK(cells[0].use_case == "email");
  CHECK(cells[1].use_case == "tweet");
  CHECK(cells[3].topic.topic == "politics");
  CHECK(cells[6].harm == HarmType::HateSpeech);
}

TEST_CASE("grid planning rejects empty axes and non-targeted harms") {
  const auto expect_empty_axis = [](GenerationSpec spec, const std::string& message) {
    try {
      (void)plan_grid(spec);
      FAIL("expected EmptyAxis: ", message);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_axis);
      CHECK(e.message() == message);
    }
  };

  GenerationSpec spec = small_spec();
  spec.harms.clear();
  expect_empty_axis(spec, "harms axis is empty");
  spec = small_spec();
  spec.topics.clear();
  expect_empty_axis(spec, "topics axis is empty");
  spec = small_spec();
  spec.use_cases.clear();
  expect_empty_axis(spec, "use_cases axis is empty");
  spec = small_spec();
  spec.locales.clear();
  expect_empty_axis(spec, "locales axis is empty");
  spec = small_spec();
  spec.quota = 0;
  expect_empty_axis(spec, "quota must be positive");

  spec = small_spec();
  spec.harms = {HarmType::Violence};
  try {
    (void)plan_grid(spec);
    FAIL("expected UnknownHarm");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_harm);
    CHECK(e.message() == "violence is not a targeted harm");
  }

  spec = small_spec();
  spec.harms = {HarmType::HateSpeech};
  spec.topics = {{"t", "s"}};
  spec.use_cases = {"email"};
  spec.quota = 1;
  CHECK(plan_grid(spec).size() == 1);
}

TEST_CASE("cell content keys depend on axes and seed, not position") {
  std::vector<GenerationCell> cells = plan_grid(small_spec());
  std::set<std::uint64_t> keys;
  for (const GenerationCell& cell : cells) keys.insert(cell.content_key());
  CHECK(keys.size() == cells.size());

  GenerationCell moved = cells[5];
  moved.index = 99;
  moved.quota = 7;
  CHECK(moved.content_key() == cells[5].content_key());

  GenerationCell reseeded = cells[5];
  reseeded.seed = 12;
  CHECK(reseeded.content_key() != cells[5].content_key());

  GenerationCell flipped = cells[5];
  flipped.adversarial = false;
  CHECK(flipped.content_key() != cells[5].content_key());
}

TEST_CASE("query generation fills every cell deterministically") {
  const std::vector<GenerationCell> cells = plan_grid(small_spec());
  MockBackend backend(3);
  const GenerationOutcome outcome = generate_queries(cells, backend);
  CHECK(outcome.failures.empty());
  REQUIRE(outcome.examples.size() == 48);

  std::set<std::string> ids;
  for (const ExampleRecord& record : outcome.examples) {
    ids.insert(record.id);
    CHECK(record.id.rfind("aart-", 0) == 0);
    CHECK(record.use_case_kind == UseCase::PromptOnly);
    CHECK(record.source == "aart");
    CHECK_FALSE(record.prompt_text.empty());
    CHECK_FALSE(record.response_text.has_value());
  }
  CHECK(ids.size() == 48);

  const ExampleRecord& first = outcome.examples[0];
  CHECK(first.id == "aart-" + hex64(cells[0].content_key()) + "-q0");
  CHECK(outcome.examples[1].id == "aart-" + hex64(cells[0].content_key()) + "-q1");
  const std::map<std::string, std::string> expected_params = {
      {"adversarial", "true"}, {"cell", "c0"},
      {"harm", "sexually_explicit"}, {"locale", "en-US"},
      {"subtopic", "voice chat"},    {"topic", "online gaming"},
      {"use_case", "email"}};
  CHECK(first.gen_params == expected_params);

  MockBackend replay(3);
  const GenerationOutcome again = generate_queries(cells, replay);
  CHECK(again.examples == outcome.examples);
}

TEST_CASE("query generation collects backend failures instead of dropping them") {
  const std::vector<GenerationCell> cells = plan_grid(small_spec());
  CapturingBackend backend;
  backend.fail_needle = "politics";  // half the topics fail
  const GenerationOutcome outcome = generate_queries(cells, backend);
  CHECK(outcome.examples.size() + outcome.failures.size() == 48);
  CHECK(outcome.failures.size() == 24);
  for (const GenerationFailure& failure : outcome.failures) {
    CHECK(failure.id.rfind("aart-", 0) == 0);
    CHECK(failure.reason == "Transport: boom");
  }

  class Broken : public Backend {
   public:
    LogprobResult logprobs(const LogprobQuery&) override { return {}; }
    std::string generate(const GenRequest&) override {
      throw Error(Errc::precondition, "not a backend fault");
    }
    EmbedResult embed(const EmbedRequest&) override { return {}; }
    bool reachable() override { return true; }
    std::string model_id() const override { return "broken"; }
  } broken;
  CHECK_THROWS_AS((void)generate_queries(cells, broken), Error);
}

TEST_CASE("response generation upgrades prompt-only records in place") {
  std::vector<ExampleRecord> examples = {prompt_only("p1", "first prompt"),
                                         prompt_only("p2", "second prompt")};
  CapturingBackend backend("a careful reply");
  const GenerationOutcome outcome = generate_responses(examples, backend, false);
  CHECK(outcome.failures.empty());
  REQUIRE(outcome.examples.size() == 2);
  CHECK(outcome.examples[0].id == "p1");
  CHECK(outcome.examples[0].use_case_kind == UseCase::PromptResponse);
  CHECK(outcome.examples[0].response_text == "a careful reply #1");

  REQUIRE(backend.instructions.size() == 2);
  CHECK(backend.instructions[0].find("You are a careful chatbot") != std::string::npos);
  CHECK(backend.instructions[0].find("Prompt: first prompt") != std::string::npos);

  CapturingBackend red_team;
  (void)generate_responses({prompt_only("p", "x")}, red_team, true);
  CHECK(red_team.instructions.at(0).find("simulating an unsafe chatbot") !=
        std::string::npos);
}

TEST_CASE("response generation rejects records that already carry one") {
  std::vector<ExampleRecord> examples = {prompt_only("p1", "first")};
  examples.push_back(prompt_only("p2", "second"));
  examples[1].use_case_kind = UseCase::PromptResponse;
  examples[1].response_text = "already here";
  CapturingBackend backend;
  try {
    (void)generate_responses(examples, backend, false);
    FAIL("expected Precondition");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::precondition);
    CHECK(e.message() == "p2: already carries a response");
  }
  CHECK(backend.instructions.empty());  // checked before any generation
}

TEST_CASE("response failures keep the record prompt-only and list it") {
  std::vector<ExampleRecord> examples = {prompt_only("ok", "plain prompt"),
                                         prompt_only("sad", "politics prompt")};
  CapturingBackend backend;
  backend.fail_needle = "politics";
  const GenerationOutcome outcome = generate_responses(examples, backend, false);
  REQUIRE(outcome.examples.size() == 2);
  CHECK(outcome.examples[0].use_case_kind == UseCase::PromptResponse);
  CHECK(outcome.examples[1].use_case_kind == UseCase::PromptOnly);
  CHECK_FALSE(outcome.examples[1].response_text.has_value());
  REQUIRE(outcome.failures.size() == 1);
  CHECK(outcome.failures[0].id == "sad");
  CHECK(outcome.failures[0].reason == "Transport: boom");
}

TEST_CASE("topic generation parses the 'topic / subtopic' replies") {
  MockBackend backend(5);
  const std::vector<TopicSpec> topics = generate_topics(HarmType::HateSpeech, 3, backend);
  REQUIRE(topics.size() == 3);
  std::set<std::string> distinct;
  for (const TopicSpec& topic : topics) {
    CHECK(topic.topic.rfind("topic-", 0) == 0);
    CHECK(topic.subtopic.rfind("facet-", 0) == 0);
    distinct.insert(topic.topic + "/" + topic.subtopic);
  }
  CHECK(distinct.size() == 3);  // seeded per index

  CHECK_THROWS_AS((void)generate_topics(HarmType::HateSpeech, 0, backend), Error);

  CapturingBackend no_separator("just words");
  try {
    (void)generate_topics(HarmType::HateSpeech, 1, no_separator);
    FAIL("expected MalformedResponse");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_response);
    CHECK(e.message() == "topic reply is not 'topic / subtopic': just words #1");
  }
}

TEST_CASE("batch expansion tags mode, source and variant") {
  const std::vector<ExampleRecord> batch = {prompt_only("b1", "first seed prompt"),
                                            prompt_only("b2", "second seed prompt")};
  MockBackend backend(9);
  const std::vector<ExampleRecord> out =
      expand_batch(batch, ExpandMode::diversity, backend, 2);
  REQUIRE(out.size() == 2);
  for (const ExampleRecord& record : out) {
    CHECK(record.id.rfind("exp-diversity-", 0) == 0);
    CHECK(record.source == "expansion_diversity");
    CHECK(record.use_case_kind == UseCase::PromptOnly);
    CHECK(record.gen_params.at("batch") == "2");
    CHECK(record.gen_params.at("mode") == "diversity");
  }
  CHECK(out[0].gen_params.at("variant") == "0");
  CHECK(out[1].gen_params.at("variant") == "1");
  CHECK(out[0].id != out[1].id);

  MockBackend replay(9);
  CHECK(expand_batch(batch, ExpandMode::diversity, replay, 2) == out);

  const std::vector<ExampleRecord> hard =
      expand_batch(batch, ExpandMode::difficulty, backend, 1);
  CHECK(hard.at(0).id.rfind("exp-difficulty-", 0) == 0);
  CHECK(hard.at(0).source == "expansion_difficulty");
}

TEST_CASE("the critic sees the batch and the quality word") {
  const std::vector<ExampleRecord> batch = {prompt_only("b1", "alpha prompt"),
                                            prompt_only("b2", "beta prompt")};
  CapturingBackend backend;
  (void)expand_batch(batch, ExpandMode::diversity, backend, 1);
  REQUIRE(backend.instructions.size() == 2);  // critic, then one generator
  CHECK(backend.instructions[0].find("- alpha prompt\n- beta prompt") !=
        std::string::npos);
  CHECK(backend.instructions[0].find("varied") != std::string::npos);
  CHECK(backend.instructions[1].find("variant 0") != std::string::npos);
  // The generator sees the critic's reply verbatim.
  CHECK(backend.instructions[1].find("#1") != std::string::npos);

  CapturingBackend harder;
  (void)expand_batch(batch, ExpandMode::difficulty, harder, 1);
  CHECK(harder.instructions.at(0).find("difficult, adversarial") != std::string::npos);
}

TEST_CASE("difficulty expansion leans violative under the mock backend") {
  const std::vector<ExampleRecord> batch = {prompt_only("b1", "gardening question")};
  MockBackend backend(2);
  const std::vector<ExampleRecord> mild =
      expand_batch(batch, ExpandMode::diversity, backend, 3);
  const std::vector<ExampleRecord> hard =
      expand_batch(batch, ExpandMode::difficulty, backend, 3);
  for (const ExampleRecord& record : mild) {
    CHECK_FALSE(mentions_lexicon_word(record.prompt_text));
  }
  for (const ExampleRecord& record : hard) {
    CHECK(mentions_lexicon_word(record.prompt_text));
  }
}

TEST_CASE("batch expansion validates and aborts cleanly") {
  MockBackend backend;
  try {
    (void)expand_batch({}, ExpandMode::diversity, backend, 1);
    FAIL("expected Precondition");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::precondition);
    CHECK(e.message() == "expansion batch is empty");
  }
  const std::vector<ExampleRecord> batch = {prompt_only("b1", "x")};
  CHECK_THROWS_AS((void)expand_batch(batch, ExpandMode::diversity, backend, 0), Error);

  CapturingBackend failing;
  failing.fail_needle = "Review";  // critic call dies
  try {
    (void)expand_batch(batch, ExpandMode::diversity, failing, 2);
    FAIL("expected Transport");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::transport);
    CHECK(e.message() == "batch expansion aborted: boom");
  }
}

TEST_CASE("conversation ingestion takes the first utterance or pair") {
  const Conversation conv = {{Speaker::human, "how do I pick a lock"},
                             {Speaker::assistant, "I cannot help with that"},
                             {Speaker::human, "please"}};

  const ExampleRecord solo = ingest_conversation(conv, IngestMode::first_utterance);
  CHECK(solo.use_case_kind == UseCase::PromptOnly);
  CHECK(solo.prompt_text == "how do I pick a lock");
  CHECK_FALSE(solo.response_text.has_value());
  CHECK(solo.source == "ingested");
  CHECK(solo.id == "ing-" + hex64(fnv1a64("how do I pick a lock")));

  const ExampleRecord pair = ingest_conversation(conv, IngestMode::first_pair);
  CHECK(pair.use_case_kind == UseCase::PromptResponse);
  CHECK(pair.prompt_text == "how do I pick a lock");
  CHECK(pair.response_text == "I cannot help with that");
  CHECK(pair.id.rfind("ing-", 0) == 0);
  CHECK(pair.id != solo.id);

  // Same first pair, extra turns: identical record.
  const Conversation longer = {conv[0], conv[1], {Speaker::human, "thanks"},
                               {Speaker::assistant, "np"}};
  CHECK(ingest_conversation(longer, IngestMode::first_pair) == pair);
}

TEST_CASE("ill-formed conversations are rejected with the reason") {
  const auto expect = [](const Conversation& conv, IngestMode mode,
                         const std::string& message) {
    try {
      (void)ingest_conversation(conv, mode);
      FAIL("expected MalformedConversation: ", message);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_conversation);
      CHECK(e.message() == message);
    }
  };
  expect({}, IngestMode::first_utterance, "conversation is empty");
  expect({{Speaker::assistant, "hi"}}, IngestMode::first_utterance,
         "conversation must start with a human turn");
  expect({{Speaker::human, "hi"}}, IngestMode::first_pair,
         "first_pair needs a human turn followed by an assistant turn");
  expect({{Speaker::human, "hi"}, {Speaker::human, "again"}}, IngestMode::first_pair,
         "first_pair needs a human turn followed by an assistant turn");
}

TEST_CASE("conversations survive a JSONL round trip") {
  const std::vector<Conversation> conversations = {
      {{Speaker::human, "hello"}, {Speaker::assistant, "hi there"}},
      {{Speaker::human, "one turn only"}},
  };
  TempDir dir("conv");
  const std::string path = dir.file("conv.jsonl");
  write_conversations_jsonl(path, conversations);
  const std::vector<Conversation> loaded = read_conversations_jsonl(path);
  REQUIRE(loaded.size() == 2);
  REQUIRE(loaded[0].size() == 2);
  CHECK(loaded[0][0].speaker == Speaker::human);
  CHECK(loaded[0][0].text == "hello");
  CHECK(loaded[0][1].speaker == Speaker::assistant);
  CHECK(loaded[0][1].text == "hi there");
  CHECK(loaded[1][0].text == "one turn only");

  write_text_file(path, R"({"no_turns": []})" "\n");
  try {
    (void)read_conversations_jsonl(path);
    FAIL("expected SchemaViolation");
  } catch (const Error& e) {
    CHECK(e.message() == "line 1: turns: missing or not an array");
  }

  write_text_file(path, R"({"turns": [{"speaker": "narrator", "text": "x"}]})" "\n");
  try {
    (void)read_conversations_jsonl(path);
    FAIL("expected SchemaViolation");
  } catch (const Error& e) {
    CHECK(e.message() == "line 1: turns[0].speaker: must be human or assistant");
  }
}

TEST_CASE("identity categories map to stable ids") {
  CHECK(std::string(category_id(IdentityCategory::Gender)) == "gender");
  CHECK(std::string(category_id(IdentityCategory::SexualOrientation)) ==
        "sexual_orientation");
  CHECK(category_from_id("religion") == IdentityCategory::Religion);
  CHECK_THROWS_AS((void)category_from_id("planet"), Error);
}

TEST_CASE("the built-in lexicon matches the committed asset byte for byte") {
  const IdentityLexicon lexicon;
  CHECK(lexicon.terms(IdentityCategory::Gender).size() == 10);
  CHECK(lexicon.terms(IdentityCategory::Race).size() == 8);
  CHECK(lexicon.terms(IdentityCategory::Ethnicity).size() == 10);
  CHECK(lexicon.terms(IdentityCategory::SexualOrientation).size() == 8);
  CHECK(lexicon.terms(IdentityCategory::Religion).size() == 10);
  CHECK(lexicon.to_tsv() ==
        read_text_file(std::string(MODKIT_ASSET_DIR) + "/identity_lexicon.tsv"));
}

TEST_CASE("term detection is whole-word, case-insensitive and ordered") {
  const IdentityLexicon lexicon;
  const std::vector<IdentityTerm> one = lexicon.detect("He is a Japanese chef");
  REQUIRE(one.size() == 1);
  CHECK(one[0].surface == "Japanese");
  CHECK(one[0].category == IdentityCategory::Ethnicity);
  CHECK(one[0].begin == 8);
  CHECK(one[0].end == 16);

  // Canonical surface comes back even for lowercase text.
  const std::vector<IdentityTerm> lower = lexicon.detect("a japanese chef");
  REQUIRE(lower.size() == 1);
  CHECK(lower[0].surface == "Japanese");

  const std::vector<IdentityTerm> many =
      lexicon.detect("The gay Christian woman spoke.");
  REQUIRE(many.size() == 3);
  CHECK(many[0].surface == "gay");
  CHECK(many[1].surface == "Christian");
  CHECK(many[2].surface == "woman");
  CHECK(many[0].begin < many[1].begin);
  CHECK(many[1].begin < many[2].begin);

  CHECK(lexicon.detect("the manager opened a blackboard").empty());
  CHECK(lexicon.detect("").empty());
}

TEST_CASE("lexicon construction rejects unusable terms") {
  using Terms = std::map<IdentityCategory, std::vector<std::string>>;
  try {
    IdentityLexicon lexicon(Terms{{IdentityCategory::Gender, {""}}});
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_config);
    CHECK(e.message() == "gender: empty term");
  }
  try {
    IdentityLexicon lexicon(Terms{{IdentityCategory::Gender, {"big man"}}});
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.message() == "gender: term 'big man' must be a single word");
  }
  try {
    IdentityLexicon lexicon(Terms{{IdentityCategory::Race, {"Black", "black"}}});
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.message() == "race: duplicate term 'black'");
  }
}

TEST_CASE("lexicons load from TSV with comments and blank lines") {
  const std::string tsv = "# comment\n"
                          "gender\twoman\n"
                          "\n"
                          "race\tBlack\n"
                          "gender\tman\n";
  const IdentityLexicon lexicon = IdentityLexicon::from_tsv(tsv);
  CHECK(lexicon.terms(IdentityCategory::Gender) ==
        std::vector<std::string>{"woman", "man"});
  CHECK(lexicon.terms(IdentityCategory::Race) == std::vector<std::string>{"Black"});
  CHECK(lexicon.terms(IdentityCategory::Religion).empty());

  // to_tsv round-trips through from_tsv.
  const IdentityLexicon again = IdentityLexicon::from_tsv(lexicon.to_tsv());
  CHECK(again.to_tsv() == lexicon.to_tsv());

  try {
    (void)IdentityLexicon::from_tsv("gender woman\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::parse_error);
    CHECK(e.message() == "line 1: expected 'category<TAB>term'");
  }
  try {
    (void)IdentityLexicon::from_tsv("planet\tMars\n");
    FAIL("expected SchemaViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::schema_violation);
    CHECK(e.message() == "line 1: unknown identity category 'planet'");
  }
}

TEST_CASE("fairness expansion swaps the leftmost identity term") {
  ExampleRecord example = prompt_only("ex1", "He is a Japanese chef", {{"hate_speech", 1}});
  const IdentityLexicon lexicon;
  const auto pair = fairness_expand(example, lexicon, 7);
  REQUIRE(pair.has_value());
  CHECK(pair->id == "cf-ex1");
  CHECK(pair->original_id == "ex1");
  CHECK(pair->text_field == "prompt_text");
  CHECK(pair->old_term == "Japanese");
  CHECK(pair->category == IdentityCategory::Ethnicity);
  CHECK(pair->new_term != "Japanese");
  CHECK(pair->label_inherited);
  CHECK(pair->labels == example.labels);
  CHECK(pair->audit_status == "pending");
  CHECK_FALSE(contains_word(pair->new_text, "Japanese"));
  CHECK(contains_word(pair->new_text, pair->new_term));

  // Seeded: the same seed replays, a record without identity terms is skipped.
  CHECK(fairness_expand(example, lexicon, 7) == pair);
  CHECK_FALSE(
      fairness_expand(prompt_only("p", "just a plain sentence", {{"violence", 0}}),
                      lexicon, 7)
          .has_value());
}

TEST_CASE("fairness expansion fixes a/an on the preceding article") {
  using Terms = std::map<IdentityCategory, std::vector<std::string>>;
  const IdentityLexicon to_consonant(
      Terms{{IdentityCategory::Ethnicity, {"Italian", "German"}}});
  ExampleRecord example =
      prompt_only("a1", "She met an Italian engineer.", {{"hate_speech", 0}});
  auto pair = fairness_expand(example, to_consonant, 1);
  REQUIRE(pair.has_value());
  CHECK(pair->new_term == "German");
  CHECK(pair->new_text == "She met a German engineer.");

  const IdentityLexicon to_vowel(
      Terms{{IdentityCategory::Ethnicity, {"German", "Italian"}}});
  example = prompt_only("a2", "A German tourist asked.", {{"hate_speech", 0}});
  pair = fairness_expand(example, to_vowel, 1);
  REQUIRE(pair.has_value());
  CHECK(pair->new_term == "Italian");
  CHECK(pair->new_text == "An Italian tourist asked.");  // capitalization kept
}

TEST_CASE("fairness expansion replaces every mention of the term") {
  using Terms = std::map<IdentityCategory, std::vector<std::string>>;
  const IdentityLexicon lexicon(Terms{{IdentityCategory::Gender, {"woman", "man"}}});
  const ExampleRecord example = prompt_only(
      "m1", "A woman told another woman about the Woman.", {{"harassment", 1}});
  const auto pair = fairness_expand(example, lexicon, 3);
  REQUIRE(pair.has_value());
  CHECK(pair->new_term == "man");
  CHECK(pair->new_text == "A man told another man about the man.");
}

TEST_CASE("fairness expansion falls back to the response text") {
  ExampleRecord example = prompt_only("r1", "tell me a story", {{"violence", 0}});
  example.use_case_kind = UseCase::PromptResponse;
  example.response_text = "Once there was a Sikh farmer.";
  const auto pair = fairness_expand(example, IdentityLexicon(), 5);
  REQUIRE(pair.has_value());
  CHECK(pair->text_field == "response_text");
  CHECK(pair->old_term == "Sikh");
  CHECK(pair->category == IdentityCategory::Religion);
}

TEST_CASE("fairness expansion validates labels and alternatives") {
  const IdentityLexicon lexicon;
  try {
    (void)fairness_expand(prompt_only("u1", "a woman spoke"), lexicon, 0);
    FAIL("expected Precondition");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::precondition);
    CHECK(e.message() == "u1: example must be labeled");
  }

  using Terms = std::map<IdentityCategory, std::vector<std::string>>;
  const IdentityLexicon lonely(Terms{{IdentityCategory::Gender, {"woman"}}});
  try {
    (void)fairness_expand(prompt_only("l1", "a woman spoke", {{"violence", 0}}),
                          lonely, 0);
    FAIL("expected NoAlternativeTerm");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_alternative_term);
    CHECK(e.message() == "gender has no alternative for 'woman'");
  }
}

TEST_CASE("fuzzed fairness pairs inherit labels and lose the old term") {
  Gen gen(0xfa1);
  const IdentityLexicon lexicon;
  const std::vector<IdentityCategory> categories = {
      IdentityCategory::Gender, IdentityCategory::Race, IdentityCategory::Ethnicity,
      IdentityCategory::SexualOrientation, IdentityCategory::Religion};
  for (int trial = 0; trial < 200; ++trial) {
    const IdentityCategory category = categories[static_cast<std::size_t>(gen.below(5))];
    const std::string term = gen.pick(lexicon.terms(category));
    ExampleRecord example = prompt_only(
        "fz-" + std::to_string(trial),
        "I met a " + term + " neighbor on the " + std::to_string(gen.below(100)) + " bus.",
        {{"hate_speech", gen.chance(0.5) ? 1 : 0}});
    const auto pair = fairness_expand(example, lexicon, gen.raw());
    REQUIRE(pair.has_value());
    CHECK(pair->labels == example.labels);
    CHECK(pair->old_term == term);
    CHECK(pair->new_text != example.prompt_text);
    CHECK_FALSE(contains_word(pair->new_text, pair->old_term));
    for (const IdentityTerm& found : lexicon.detect(pair->new_text)) {
      CHECK(found.surface == pair->new_term);
    }
  }
}

TEST_CASE("counterfactual pairs survive a JSONL round trip") {
  const IdentityLexicon lexicon;
  std::vector<CounterfactualPair> pairs;
  for (int i = 0; i < 5; ++i) {
    const auto pair = fairness_expand(
        prompt_only("rt-" + std::to_string(i),
                    "My Muslim friend and I cooked dinner " + std::to_string(i),
                    {{"hate_speech", i % 2}}),
        lexicon, static_cast<std::uint64_t>(i));
    REQUIRE(pair.has_value());
    pairs.push_back(*pair);
  }
  pairs[1].label_inherited = false;
  pairs[2].audit_status = "approved";

  TempDir dir("pairs");
  const std::string path = dir.file("pairs.jsonl");
  write_pairs_jsonl(path, pairs);
  CHECK(read_pairs_jsonl(path) == pairs);

  write_text_file(path, R"({"id": "x", "original_id": "y", "text_field": "title"})" "\n");
  try {
    (void)read_pairs_jsonl(path);
    FAIL("expected SchemaViolation");
  } catch (const Error& e) {
    CHECK(e.message() == "line 1: text_field: must be prompt_text or response_text");
  }
}

TEST_CASE("audit decisions survive a JSONL round trip and gate the pairs") {
  TempDir dir("audit");
  const std::string path = dir.file("audit.jsonl");
  const std::vector<AuditDecision> decisions = {
      {"cf-a", "approved", "reads fine"},
      {"cf-b", "rejected", "label no longer fits"},
      {"cf-c", "approved", ""},
  };
  write_audit_jsonl(path, decisions);
  const std::vector<AuditDecision> loaded = read_audit_jsonl(path);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0].pair_id == "cf-a");
  CHECK(loaded[0].decision == "approved");
  CHECK(loaded[0].note == "reads fine");
  CHECK(loaded[2].note.empty());

  write_text_file(path, R"({"pair_id": "cf-a", "decision": "maybe"})" "\n");
  try {
    (void)read_audit_jsonl(path);
    FAIL("expected SchemaViolation");
  } catch (const Error& e) {
    CHECK(e.message() == "line 1: decision: must be approved or rejected");
  }
}

TEST_CASE("applying an audit flips statuses and returns the approved pairs") {
  const auto make_pair = [](std::string id) {
    CounterfactualPair pair;
    pair.id = std::move(id);
    pair.original_id = "orig";
    pair.text_field = "prompt_text";
    pair.new_text = "text";
    pair.old_term = "woman";
    pair.new_term = "man";
    pair.category = IdentityCategory::Gender;
    return pair;
  };
  std::vector<CounterfactualPair> pairs = {make_pair("cf-a"), make_pair("cf-b"),
                                           make_pair("cf-c")};

  const std::vector<CounterfactualPair> approved = apply_audit(
      pairs, {{"cf-a", "approved", ""}, {"cf-b", "rejected", ""}, {"cf-c", "approved", ""}});
  REQUIRE(approved.size() == 2);
  CHECK(approved[0].id == "cf-a");
  CHECK(approved[1].id == "cf-c");
  CHECK(pairs[0].audit_status == "approved");
  CHECK(pairs[1].audit_status == "rejected");
  CHECK(pairs[2].audit_status == "approved");

  std::vector<CounterfactualPair> untouched = {make_pair("cf-a")};
  CHECK(apply_audit(untouched, {}).empty());
  CHECK(untouched[0].audit_status == "pending");

  try {
    (void)apply_audit(untouched, {{"ghost", "approved", ""}});
    FAIL("expected UnknownPairId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_pair_id);
    CHECK(e.message() == "no pending pair 'ghost'");
  }
}

TEST_CASE("approved pairs become records with counterfactual provenance") {
  ExampleRecord original = prompt_only("orig-1", "A woman asked about visas",
                                       {{"hate_speech", 1}, {"harassment", 0}});
  original.use_case_kind = UseCase::PromptResponse;
  original.response_text = "a reply";
  original.scores = {{"hate_speech", 0.9}};
  original.split = Split::train;
  original.source = "aart";
  original.gen_params = {{"cell", "c0"}};
  original.provenance = {{"note", "kept"}};

  const auto pair = fairness_expand(original, IdentityLexicon(), 21);
  REQUIRE(pair.has_value());
  const ExampleRecord record = pair_to_record(*pair, original);
  CHECK(record.id == pair->id);
  CHECK(record.prompt_text == pair->new_text);
  CHECK(record.response_text == original.response_text);
  CHECK(record.labels == original.labels);
  CHECK(record.scores.empty());
  CHECK(record.split == Split::unassigned);
  CHECK(record.source == "fairness");
  CHECK(record.gen_params == original.gen_params);
  CHECK(record.provenance.at("note") == "kept");
  CHECK(record.provenance.at("counterfactual_category") == "gender");
  CHECK(record.provenance.at("counterfactual_old") == "woman");
  CHECK(record.provenance.at("counterfactual_new") == pair->new_term);
  CHECK(record.provenance.at("counterfactual_of") == "orig-1");

  ExampleRecord other = original;
  other.id = "someone-else";
  try {
    (void)pair_to_record(*pair, other);
    FAIL("expected UnknownPairId");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unknown_pair_id);
    CHECK(e.message() == pair->id + ": original record mismatch (someone-else)");
  }
}
