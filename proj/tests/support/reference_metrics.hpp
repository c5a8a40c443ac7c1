#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "modkit/eval.hpp"

namespace testsupport {

// Confusion counts at one threshold by a full rescan (predict positive at
// score >= threshold). No sorting, no cumulative sums.
struct Confusion {
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

inline Confusion confusion_at(const modkit::ScoredLabelSet& data, double threshold) {
  Confusion c;
  for (const auto& item : data) {
    const bool predicted = item.score >= threshold;
    if (predicted && item.label == 1) ++c.tp;
    if (predicted && item.label == 0) ++c.fp;
    if (!predicted && item.label == 1) ++c.fn;
  }
  return c;
}

inline double precision_of(const Confusion& c) {
  return c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) /
                                      static_cast<double>(c.tp + c.fp);
}

inline double recall_of(const Confusion& c) {
  return c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) /
                                      static_cast<double>(c.tp + c.fn);
}

inline double f1_of(const Confusion& c) {
  const double p = precision_of(c);
  const double r = recall_of(c);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

// Descending distinct thresholds; +inf first models "predict nothing".
inline std::vector<double> descending_thresholds(const modkit::ScoredLabelSet& data) {
  std::set<double> distinct;
  for (const auto& item : data) distinct.insert(item.score);
  std::vector<double> thresholds{std::numeric_limits<double>::infinity()};
  thresholds.insert(thresholds.end(), distinct.rbegin(), distinct.rend());
  return thresholds;
}

// Max F1 over every threshold, keeping the largest threshold on ties.
inline std::pair<double, double> reference_optimal_f1(const modkit::ScoredLabelSet& data) {
  double best_f1 = 0.0;
  double best_threshold = std::numeric_limits<double>::infinity();
  for (double threshold : descending_thresholds(data)) {
    const double f1 = f1_of(confusion_at(data, threshold));
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = threshold;
    }
  }
  return {best_f1, best_threshold};
}

// Non-interpolated average precision: sum of (delta recall) x precision over
// the finite thresholds in descending order, starting from recall 0.
inline double reference_au_prc(const modkit::ScoredLabelSet& data) {
  double ap = 0.0;
  double previous_recall = 0.0;
  const auto thresholds = descending_thresholds(data);
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const Confusion c = confusion_at(data, thresholds[i]);
    const double r = recall_of(c);
    ap += (r - previous_recall) * precision_of(c);
    previous_recall = r;
  }
  return ap;
}

}  // namespace testsupport
