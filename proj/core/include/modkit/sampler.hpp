#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "modkit/backend.hpp"
#include "modkit/datastore.hpp"
#include "modkit/error.hpp"
#include "modkit/scoring.hpp"

namespace modkit {

struct PoolItem {
  std::string id;
  std::vector<double> embedding;  // unit L2 norm, tolerance 1e-6
  double margin = 0.0;            // |p - 0.5|
};

struct ClusterAssignment {
  std::vector<int> cluster_of;  // aligned with the input order
  int cluster_count = 0;
};

inline constexpr int kAutoClusterCount = 0;

struct SamplerConfig {
  int target_batch = 0;
  double high_margin_fraction = 0.10;
  double candidate_multiplier = 2.0;
  int cluster_count = kAutoClusterCount;  // AUTO: min(candidates, 10 * target_batch)
  std::uint64_t seed = 0;
};

inline constexpr const char* kPickRoundRobin = "low_margin_roundrobin";
inline constexpr const char* kPickReserve = "high_margin_reserve";

struct SelectionResult {
  std::vector<std::string> selected_ids;
  std::map<std::string, std::string> provenance;  // id -> pick kind
  std::map<std::string, int> candidate_cluster;   // audit trace
  std::vector<int> cluster_sizes;
  int cluster_count = 0;
  int reserve_slots = 0;
  std::size_t candidate_count = 0;

  std::string to_json() const;
};

double margin_score(double p);

// Bottom-up average-linkage agglomeration under cosine distance (1 - dot on
// unit vectors). Cluster averages are maintained as a pairwise-distance sum
// matrix with S[A+B][C] = S[A][C] + S[B][C]; merges pick the smallest
// (distance, min id, max id) pair and keep the smaller id. Final labels are
// dense, ordered by each cluster's smallest member index.
ClusterAssignment agglomerative_cluster(const std::vector<std::vector<double>>& embeddings,
                                        int cluster_count);

// Cluster-Margin selection:
//   (a) reserve floor(high_margin_fraction * target_batch) highest-margin items,
//   (b) take ceil(candidate_multiplier * remaining) smallest-margin candidates,
//   (c) cluster the candidates,
//   (d) round-robin clusters by ascending size, lowest-margin item per pass,
//   (e) emit round-robin picks then the reserve.
// Pools no larger than target_batch are returned whole. Margin ties break by
// a seeded per-id key, which also makes the result pool-order invariant.
SelectionResult select_batch(const std::vector<PoolItem>& pool, const SamplerConfig& cfg);

struct RescoredPool {
  std::vector<PoolItem> items;
  std::vector<std::pair<std::string, std::string>> unscored;  // id, reason
  std::string model_id;
};

// Embeds and scores records, turning max per-harm violation probability into
// a margin. Items the backend fails to score are excluded and reported.
RescoredPool rescore_pool(const std::vector<ExampleRecord>& records, Backend& backend,
                          const ScoreConfig& cfg,
                          std::span<const HarmType> harms = targeted_harms(),
                          Warnings* warnings = nullptr);

}  // namespace modkit
