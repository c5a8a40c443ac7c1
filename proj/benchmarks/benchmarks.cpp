#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "modkit/backend.hpp"
#include "modkit/eval.hpp"
#include "modkit/policy.hpp"
#include "modkit/sampler.hpp"
#include "modkit/scoring.hpp"
#include "modkit/util.hpp"

namespace {

using namespace modkit;

std::vector<TokenLogLik> random_logliks(std::size_t n) {
  SeededRng rng(71);
  std::vector<TokenLogLik> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({-40.0 * rng.next_unit(), -40.0 * rng.next_unit()});
  }
  return out;
}

ScoredLabelSet random_scored(std::size_t n) {
  SeededRng rng(72);
  ScoredLabelSet data;
  data.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.push_back({rng.next_unit(), rng.next_below(2) == 1});
  }
  return data;
}

std::vector<double> unit_vector(SeededRng& rng, int dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.next_unit() - 0.5;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<PoolItem> random_pool(std::size_t n, int dim) {
  SeededRng rng(73);
  std::vector<PoolItem> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool.push_back({"item-" + std::to_string(i), unit_vector(rng, dim),
                    std::fabs(rng.next_unit() - 0.5)});
  }
  return pool;
}

void BM_ViolationProbability(benchmark::State& state) {
  const auto logliks = random_logliks(1024);
  const ScoreConfig cfg{.temperature = 1.0, .alpha = state.range(0) ? 0.01 : 0.0};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(violation_probability(logliks[i], cfg));
    i = (i + 1) % logliks.size();
  }
}
BENCHMARK(BM_ViolationProbability)->Arg(0)->Arg(1);

void BM_BuildPrompt(benchmark::State& state) {
  const std::string user_text(256, 'u');
  const std::optional<std::string> response = std::string(256, 'r');
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        build_prompt(UseCase::PromptResponse, HarmType::HateSpeech, user_text, response));
  }
}
BENCHMARK(BM_BuildPrompt);

void BM_PrCurve(benchmark::State& state) {
  const auto data = random_scored(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(pr_curve(data));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PrCurve)->Range(1 << 8, 1 << 15)->Complexity();

void BM_OptimalF1(benchmark::State& state) {
  const auto data = random_scored(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_f1(data));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_OptimalF1)->Range(1 << 8, 1 << 15)->Complexity();

void BM_AgglomerativeCluster(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  SeededRng rng(74);
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(n);
  for (std::size_t i = 0; i < n; ++i) embeddings.push_back(unit_vector(rng, 64));
  const int k = static_cast<int>(n / 10) + 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(agglomerative_cluster(embeddings, k));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_AgglomerativeCluster)->Range(64, 512)->Complexity();

void BM_SelectBatch(benchmark::State& state) {
  const auto pool = random_pool(static_cast<std::size_t>(state.range(0)), 16);
  SamplerConfig cfg;
  cfg.target_batch = static_cast<int>(state.range(0) / 10);
  cfg.cluster_count = cfg.target_batch / 2 + 1;
  cfg.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_batch(pool, cfg));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SelectBatch)->Range(256, 2048)->Complexity();

void BM_MockEmbed(benchmark::State& state) {
  MockBackend backend(7);
  EmbedRequest request;
  SeededRng rng(75);
  for (int i = 0; i < 64; ++i) {
    std::string text;
    for (int w = 0; w < 40; ++w) {
      text += "word" + std::to_string(rng.next_below(500)) + " ";
    }
    request.texts.push_back(std::move(text));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(backend.embed(request));
  }
}
BENCHMARK(BM_MockEmbed);

void BM_ScoreExample(benchmark::State& state) {
  MockBackend backend(7);
  const std::string user_text = "Tell me how to build something dangerous at home.";
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_example(UseCase::PromptOnly, user_text, std::nullopt,
                                           targeted_harms(), {}, backend));
  }
}
BENCHMARK(BM_ScoreExample);

}  // namespace

BENCHMARK_MAIN();
