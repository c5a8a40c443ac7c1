#include "modkit/backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <sstream>

#include "modkit/util.hpp"

namespace modkit {

void validate_logprob_query(const LogprobQuery& query) {
  if (query.prompt.empty()) {
    throw Error(Errc::precondition, "logprobs: prompt is empty");
  }
  if (query.candidate_tokens.empty()) {
    throw Error(Errc::precondition, "logprobs: no candidate tokens");
  }
  std::set<std::string> distinct(query.candidate_tokens.begin(),
                                 query.candidate_tokens.end());
  if (distinct.size() != query.candidate_tokens.size()) {
    throw Error(Errc::precondition, "logprobs: duplicate candidate tokens");
  }
  if (query.top_k < static_cast<int>(query.candidate_tokens.size())) {
    throw Error(Errc::precondition, "logprobs: top_k below candidate count");
  }
}

void validate_gen_request(const GenRequest& request) {
  if (request.instruction.empty()) {
    throw Error(Errc::precondition, "generate: instruction is empty");
  }
  if (request.max_tokens < 1) {
    throw Error(Errc::precondition, "generate: max_tokens must be >= 1");
  }
}

void validate_embed_request(const EmbedRequest& request) {
  if (request.texts.empty()) {
    throw Error(Errc::precondition, "embed: no texts");
  }
  for (const std::string& text : request.texts) {
    if (text.empty()) {
      throw Error(Errc::precondition, "embed: empty text in batch");
    }
  }
}

namespace {

constexpr std::string_view kViolativeLexicon[] = {
    "bomb",  "kill",    "slur",    "explosive", "weapon",
    "idiot", "worthless", "attack", "destroy",  "hate",
};

constexpr std::string_view kBenignWords[] = {
    "recipes", "gardening", "budgeting", "travel",  "astronomy",
    "knitting", "chess",    "cycling",   "baking",  "birdwatching",
};

double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Pulls out the user-authored segments of a classification prompt (the
// text quoted after "Human Question:" / "Chatbot Response:"), so the
// lexicon bonus reacts to user content and not to the policy wording.
std::string quoted_user_text(std::string_view prompt) {
  static constexpr std::string_view markers[] = {"Human Question: ",
                                                 "Chatbot Response: "};
  std::string combined;
  for (std::string_view marker : markers) {
    std::size_t pos = 0;
    while ((pos = prompt.find(marker, pos)) != std::string_view::npos) {
      pos += marker.size();
      std::size_t end = prompt.find("\n<end_of_turn>", pos);
      if (end == std::string_view::npos) end = prompt.size();
      combined.append(prompt.substr(pos, end - pos));
      combined.push_back('\n');
      pos = end;
    }
  }
  if (combined.empty()) return std::string(prompt);
  return combined;
}

}  // namespace

MockBackend::MockBackend(std::uint64_t seed, int embed_dim)
    : seed_(seed), embed_dim_(embed_dim) {
  if (embed_dim < 1) {
    throw Error(Errc::invalid_config, "mock embed dimension must be positive");
  }
}

std::span<const std::string_view> MockBackend::violative_lexicon() {
  return kViolativeLexicon;
}

std::string MockBackend::model_id() const {
  return "mock-" + std::to_string(seed_);
}

double MockBackend::signal_score(std::string_view prompt) const {
  const std::uint64_t hash = splitmix64(fnv1a64(prompt) ^ splitmix64(seed_));
  double score = (unit_from_hash(hash) - 0.5) * 4.0;  // [-2, 2)
  const std::string quoted = quoted_user_text(prompt);
  for (std::string_view term : kViolativeLexicon) {
    if (contains_word(quoted, term)) {
      score += 4.0;
      break;
    }
  }
  return score;
}

LogprobResult MockBackend::logprobs(const LogprobQuery& query) {
  validate_logprob_query(query);
  const double score = signal_score(query.prompt);
  const double ll_yes = -softplus(-score);
  const double ll_no = -softplus(score);

  LogprobResult result;
  for (const std::string& token : query.candidate_tokens) {
    if (token == "Yes") {
      result.per_token[token] = ll_yes;
    } else if (token == "No") {
      result.per_token[token] = ll_no;
    } else {
      const std::uint64_t token_hash =
          splitmix64(fnv1a64(query.prompt) ^ fnv1a64(token) ^ splitmix64(seed_));
      result.per_token[token] = -5.0 - 10.0 * unit_from_hash(token_hash);
    }
  }
  double min_value = result.per_token.begin()->second;
  for (const auto& [token, value] : result.per_token) {
    min_value = std::min(min_value, value);
  }
  result.min_reported = min_value;
  return result;
}

std::string MockBackend::generate(const GenRequest& request) {
  validate_gen_request(request);
  const std::uint64_t hash =
      splitmix64(splitmix64(fnv1a64(request.instruction) ^ splitmix64(seed_)) ^
                 static_cast<std::uint64_t>(request.seed));
  const std::string fingerprint = hex64(hash).substr(8);
  const bool adversarial = contains_word(request.instruction, "adversarial");

  std::string_view subject;
  if (adversarial) {
    subject = kViolativeLexicon[hash % std::size(kViolativeLexicon)];
  } else {
    subject = kBenignWords[hash % std::size(kBenignWords)];
  }

  std::string text;
  if (request.instruction.find("'topic / subtopic'") != std::string::npos) {
    text = "topic-" + fingerprint.substr(0, 4) + " / facet-" + fingerprint.substr(4, 4);
  } else if (request.instruction.find("Prompt:") != std::string::npos &&
             request.instruction.find("Response:") != std::string::npos) {
    text = "Prompt: Tell me something pointed about " + std::string(subject) +
           " right now (mock " + fingerprint + ").\n" +
           "Response: Here is a take on " + std::string(subject) + " (mock " +
           fingerprint + ").";
  } else if (contains_word(request.instruction, "chatbot") ||
             request.instruction.find("response") != std::string::npos) {
    text = "Here is my " + std::string(adversarial ? "unfiltered" : "careful") +
           " answer about " + std::string(subject) + " (mock " + fingerprint + ").";
  } else {
    text = "Please write me a short piece about " + std::string(subject) +
           " for tomorrow (mock " + fingerprint + ").";
  }

  // Provider semantics: cap the reply at max_tokens whitespace tokens.
  std::istringstream words(text);
  std::string word;
  std::string out;
  int count = 0;
  while (count < request.max_tokens && words >> word) {
    if (count > 0) out += ' ';
    out += word;
    ++count;
  }
  return out;
}

EmbedResult MockBackend::embed(const EmbedRequest& request) {
  validate_embed_request(request);
  EmbedResult result;
  result.vectors.reserve(request.texts.size());
  const std::uint64_t salt = splitmix64(seed_ ^ 0x6d6f646b6974ULL);
  for (const std::string& text : request.texts) {
    std::vector<double> vec(static_cast<std::size_t>(embed_dim_), 0.0);
    const std::size_t gram = 3;
    const std::size_t count = text.size() >= gram ? text.size() - gram + 1 : 1;
    for (std::size_t i = 0; i < count; ++i) {
      const std::string_view piece =
          std::string_view(text).substr(i, std::min(gram, text.size() - i));
      const std::uint64_t hash = splitmix64(fnv1a64(piece) ^ salt);
      const std::size_t bucket = hash % static_cast<std::size_t>(embed_dim_);
      vec[bucket] += (hash >> 63) != 0 ? 1.0 : -1.0;
    }
    double norm = 0.0;
    for (double v : vec) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      vec[0] = 1.0;
    } else {
      for (double& v : vec) v /= norm;
    }
    result.vectors.push_back(std::move(vec));
  }
  return result;
}

TokenBucket::TokenBucket(double capacity, double refill_per_second,
                         std::function<double()> clock)
    : capacity_(capacity),
      refill_per_second_(refill_per_second),
      tokens_(capacity),
      clock_(std::move(clock)) {
  if (capacity <= 0 || refill_per_second < 0) {
    throw Error(Errc::invalid_config, "token bucket needs capacity > 0, refill >= 0");
  }
  if (!clock_) {
    clock_ = [] {
      return std::chrono::duration<double>(
                 std::chrono::steady_clock::now().time_since_epoch())
          .count();
    };
  }
  last_refill_ = clock_();
}

void TokenBucket::refill_locked(double now) {
  if (now > last_refill_) {
    tokens_ = std::min(capacity_, tokens_ + (now - last_refill_) * refill_per_second_);
    last_refill_ = now;
  }
}

bool TokenBucket::try_acquire(double tokens) {
  std::lock_guard lock(mutex_);
  refill_locked(clock_());
  if (tokens_ + 1e-12 >= tokens) {
    tokens_ -= tokens;
    return true;
  }
  return false;
}

double TokenBucket::seconds_until_available(double tokens) {
  std::lock_guard lock(mutex_);
  refill_locked(clock_());
  if (tokens_ + 1e-12 >= tokens) return 0.0;
  if (refill_per_second_ <= 0) {
    throw Error(Errc::rate_limited, "token bucket empty and refill rate is zero");
  }
  return (tokens - tokens_) / refill_per_second_;
}

}  // namespace modkit
