#include <algorithm>
#include <cmath>
#include <set>

#include "modkit/sampler.hpp"
#include "modkit/util.hpp"

#include <json.hpp>

namespace modkit {

namespace {

void check_unit_norm(const std::vector<double>& v, const std::string& what) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (std::fabs(std::sqrt(norm) - 1.0) > 1e-6) {
    throw Error(Errc::precondition, what + ": embedding is not unit-norm");
  }
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return 1.0 - dot;
}

struct RankedItem {
  const PoolItem* item = nullptr;
  std::uint64_t tiekey = 0;
};

bool margin_asc(const RankedItem& x, const RankedItem& y) {
  if (x.item->margin != y.item->margin) return x.item->margin < y.item->margin;
  if (x.tiekey != y.tiekey) return x.tiekey < y.tiekey;
  return x.item->id < y.item->id;
}

bool margin_desc(const RankedItem& x, const RankedItem& y) {
  if (x.item->margin != y.item->margin) return x.item->margin > y.item->margin;
  if (x.tiekey != y.tiekey) return x.tiekey < y.tiekey;
  return x.item->id < y.item->id;
}

void check_config(const SamplerConfig& cfg) {
  if (cfg.target_batch <= 0) {
    throw Error(Errc::invalid_config, "target_batch must be positive");
  }
  if (!(cfg.high_margin_fraction >= 0.0) || !(cfg.high_margin_fraction <= 1.0)) {
    throw Error(Errc::invalid_config, "high_margin_fraction must lie in [0, 1]");
  }
  if (!(cfg.candidate_multiplier >= 1.0) || !std::isfinite(cfg.candidate_multiplier)) {
    throw Error(Errc::invalid_config, "candidate_multiplier must be >= 1");
  }
  if (cfg.cluster_count < 0) {
    throw Error(Errc::invalid_config, "cluster_count must be positive or AUTO (0)");
  }
}

}  // namespace

double margin_score(double p) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    throw Error(Errc::out_of_range, "probability must lie in [0, 1]");
  }
  return std::fabs(p - 0.5);
}

ClusterAssignment agglomerative_cluster(const std::vector<std::vector<double>>& embeddings,
                                        int cluster_count) {
  const std::size_t n = embeddings.size();
  if (n == 0) throw Error(Errc::empty_pool, "no embeddings to cluster");
  if (cluster_count < 1 || static_cast<std::size_t>(cluster_count) > n) {
    throw Error(Errc::invalid_config,
                "cluster_count must lie in [1, n], got " + std::to_string(cluster_count));
  }
  const std::size_t dim = embeddings.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i].size() != dim) {
      throw Error(Errc::dimension_mismatch, "ragged embedding dimensions");
    }
    check_unit_norm(embeddings[i], "item " + std::to_string(i));
  }

  // S[a][b] holds the sum of pairwise point distances between clusters a, b;
  // average linkage is S / (size_a * size_b).
  std::vector<std::vector<double>> sum(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sum[i][j] = sum[j][i] = cosine_distance(embeddings[i], embeddings[j]);
    }
  }
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<int> assign(n);
  for (std::size_t i = 0; i < n; ++i) assign[i] = static_cast<int>(i);

  std::size_t remaining = n;
  while (remaining > static_cast<std::size_t>(cluster_count)) {
    double best = 0.0;
    std::size_t best_a = n, best_b = n;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < n; ++b) {
        if (!active[b]) continue;
        const double avg =
            sum[a][b] / (static_cast<double>(size[a]) * static_cast<double>(size[b]));
        if (best_a == n || avg < best) {
          best = avg;
          best_a = a;
          best_b = b;
        }
      }
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      sum[best_a][c] = sum[c][best_a] = sum[best_a][c] + sum[best_b][c];
    }
    size[best_a] += size[best_b];
    active[best_b] = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] == static_cast<int>(best_b)) assign[i] = static_cast<int>(best_a);
    }
    --remaining;
  }

  // Dense labels ordered by smallest member index.
  std::map<int, int> relabel;
  ClusterAssignment result;
  result.cluster_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = relabel.emplace(assign[i], static_cast<int>(relabel.size()));
    result.cluster_of[i] = it->second;
    (void)inserted;
  }
  result.cluster_count = static_cast<int>(relabel.size());
  return result;
}

SelectionResult select_batch(const std::vector<PoolItem>& pool, const SamplerConfig& cfg) {
  check_config(cfg);
  if (pool.empty()) {
    throw Error(Errc::empty_selectable, "no scorable items to select from");
  }

  std::set<std::string> seen_ids;
  const std::size_t dim = pool.front().embedding.size();
  for (const PoolItem& item : pool) {
    if (!seen_ids.insert(item.id).second) {
      throw Error(Errc::precondition, "duplicate pool item id '" + item.id + "'");
    }
    if (!std::isfinite(item.margin) || item.margin < 0.0 || item.margin > 0.5) {
      throw Error(Errc::out_of_range, item.id + ": margin must lie in [0, 0.5]");
    }
    if (item.embedding.size() != dim) {
      throw Error(Errc::dimension_mismatch, item.id + ": embedding dimension differs");
    }
    check_unit_norm(item.embedding, item.id);
  }

  std::vector<RankedItem> ranked;
  ranked.reserve(pool.size());
  for (const PoolItem& item : pool) {
    ranked.push_back({&item, splitmix64(fnv1a64(item.id) ^ splitmix64(cfg.seed))});
  }

  SelectionResult result;

  if (pool.size() <= static_cast<std::size_t>(cfg.target_batch)) {
    std::sort(ranked.begin(), ranked.end(), margin_asc);
    for (const RankedItem& r : ranked) {
      result.selected_ids.push_back(r.item->id);
      result.provenance[r.item->id] = kPickRoundRobin;
    }
    return result;
  }

  const int reserve_slots = static_cast<int>(
      std::floor(cfg.high_margin_fraction * static_cast<double>(cfg.target_batch)));
  result.reserve_slots = reserve_slots;

  std::sort(ranked.begin(), ranked.end(), margin_desc);
  std::vector<RankedItem> reserve(ranked.begin(), ranked.begin() + reserve_slots);
  std::vector<RankedItem> remainder(ranked.begin() + reserve_slots, ranked.end());

  const int need = cfg.target_batch - reserve_slots;
  std::vector<const PoolItem*> picks;
  if (need > 0) {
    const auto want = static_cast<std::size_t>(
        std::ceil(cfg.candidate_multiplier * static_cast<double>(need)));
    std::sort(remainder.begin(), remainder.end(), margin_asc);
    const std::size_t m = std::min(want, remainder.size());
    std::vector<RankedItem> candidates(remainder.begin(), remainder.begin() + m);
    result.candidate_count = m;

    int k = cfg.cluster_count;
    if (k == kAutoClusterCount) {
      k = static_cast<int>(std::min<std::int64_t>(
          static_cast<std::int64_t>(m), 10ll * cfg.target_batch));
    }
    k = std::min(k, static_cast<int>(m));

    std::vector<std::vector<double>> embeddings;
    embeddings.reserve(m);
    for (const RankedItem& c : candidates) embeddings.push_back(c.item->embedding);
    const ClusterAssignment clusters = agglomerative_cluster(embeddings, k);
    result.cluster_count = clusters.cluster_count;
    for (std::size_t i = 0; i < m; ++i) {
      result.candidate_cluster[candidates[i].item->id] = clusters.cluster_of[i];
    }

    // Members stay margin-ascending because candidates were sorted above.
    std::vector<std::vector<std::size_t>> members(clusters.cluster_count);
    for (std::size_t i = 0; i < m; ++i) {
      members[clusters.cluster_of[i]].push_back(i);
    }
    result.cluster_sizes.resize(clusters.cluster_count);
    for (int c = 0; c < clusters.cluster_count; ++c) {
      result.cluster_sizes[c] = static_cast<int>(members[c].size());
    }

    std::vector<int> order(clusters.cluster_count);
    for (int c = 0; c < clusters.cluster_count; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      if (members[x].size() != members[y].size()) {
        return members[x].size() < members[y].size();
      }
      return x < y;
    });

    std::vector<std::size_t> cursor(clusters.cluster_count, 0);
    int taken = 0;
    while (taken < need) {
      bool any = false;
      for (int c : order) {
        if (taken >= need) break;
        if (cursor[c] >= members[c].size()) continue;
        picks.push_back(candidates[members[c][cursor[c]]].item);
        ++cursor[c];
        ++taken;
        any = true;
      }
      if (!any) break;
    }
  }

  for (const PoolItem* item : picks) {
    result.selected_ids.push_back(item->id);
    result.provenance[item->id] = kPickRoundRobin;
  }
  for (const RankedItem& r : reserve) {
    result.selected_ids.push_back(r.item->id);
    result.provenance[r.item->id] = kPickReserve;
  }
  return result;
}

std::string SelectionResult::to_json() const {
  nlohmann::json out;
  out["selected_ids"] = selected_ids;
  out["provenance"] = provenance;
  out["clusters"] = {
      {"count", cluster_count},
      {"sizes", cluster_sizes},
      {"assignment", candidate_cluster.empty()
                         ? nlohmann::json::object()
                         : nlohmann::json(candidate_cluster)},
  };
  out["reserve_slots"] = reserve_slots;
  out["candidate_count"] = candidate_count;
  return out.dump();
}

RescoredPool rescore_pool(const std::vector<ExampleRecord>& records, Backend& backend,
                          const ScoreConfig& cfg, std::span<const HarmType> harms,
                          Warnings* warnings) {
  if (records.empty()) throw Error(Errc::empty_pool, "no records to rescore");
  RescoredPool out;
  out.model_id = backend.model_id();

  EmbedRequest embed_request;
  embed_request.texts.reserve(records.size());
  for (const ExampleRecord& record : records) {
    std::string text = record.prompt_text;
    if (record.response_text) {
      text += '\n';
      text += *record.response_text;
    }
    embed_request.texts.push_back(std::move(text));
  }
  const EmbedResult embedded = backend.embed(embed_request);

  for (std::size_t i = 0; i < records.size(); ++i) {
    const ExampleRecord& record = records[i];
    try {
      const HarmScores scores =
          score_example(record.use_case_kind, record.prompt_text, record.response_text,
                        harms, cfg, backend, warnings);
      PoolItem item;
      item.id = record.id;
      item.embedding = embedded.vectors[i];
      item.margin = margin_score(aggregate_binary(scores));
      out.items.push_back(std::move(item));
    } catch (const Error& e) {
      if (!e.is_backend_failure()) throw;
      out.unscored.emplace_back(record.id, e.what());
      warn(warnings, record.id + ": left unscored: " + e.what());
    }
  }
  return out;
}

}  // namespace modkit
