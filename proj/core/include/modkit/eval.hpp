#pragma once

#include <map>
#include <string>
#include <vector>

#include "modkit/backend.hpp"
#include "modkit/datastore.hpp"
#include "modkit/error.hpp"
#include "modkit/scoring.hpp"

namespace modkit {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;
};

using ScoredLabelSet = std::vector<ScoredLabel>;

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double threshold = 0.0;  // +inf on the recall-0 anchor, serialized as null
};

struct PRCurve {
  std::vector<PRPoint> points;
};

struct MetricPair {
  double optimal_f1 = 0.0;
  double optimal_threshold = 0.0;
  double au_prc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

enum class EvalMode { overall, one_vs_all };

struct EvalConfig {
  ScoreConfig score;
  double threshold = 0.5;
  EvalMode mode = EvalMode::one_vs_all;
  std::vector<HarmType> harms{kTargetedHarms.begin(), kTargetedHarms.end()};
};

struct EvalReport {
  MetricPair overall;
  std::map<HarmType, MetricPair> per_harm;
  std::map<std::string, PRCurve> curves;  // "overall" plus harm ids

  double temperature = 1.0;
  double alpha = 0.0;
  double threshold = 0.5;
  std::string model_id;
  std::string mode = "one_vs_all";
  std::vector<std::string> harm_ids;

  std::string to_json() const;
  std::string to_csv() const;
  std::string curves_json() const;
};

// Descending-score sweep; tied scores form one group and emit a single point
// after the whole group. A recall-0 anchor with the first group's precision
// is prepended.
PRCurve pr_curve(const ScoredLabelSet& data);

// Non-interpolated average precision: sum of delta-recall times precision.
double au_prc(const PRCurve& curve);

// Sweeps thresholds over the distinct scores plus a predict-nothing sentinel,
// classifying positive at score >= threshold; returns the max F1 and the
// largest threshold achieving it.
std::pair<double, double> optimal_f1(const ScoredLabelSet& data);

// Scores every record with the backend, then reports overall metrics
// (score = max per-harm probability, label = any positive) and, in
// one_vs_all mode, per-harm metrics against that harm's labels.
EvalReport evaluate(const std::vector<ExampleRecord>& records, Backend& backend,
                    const EvalConfig& cfg, Warnings* warnings = nullptr);

}  // namespace modkit
