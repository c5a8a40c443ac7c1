#include <algorithm>
#include <cmath>
#include <limits>

#include "modkit/eval.hpp"

#include <json.hpp>

namespace modkit {

namespace {

using nlohmann::json;

void check_data(const ScoredLabelSet& data) {
  if (data.empty()) throw Error(Errc::precondition, "no scored labels");
  for (const ScoredLabel& item : data) {
    if (!std::isfinite(item.score) || item.score < 0.0 || item.score > 1.0) {
      throw Error(Errc::out_of_range, "score must lie in [0, 1]");
    }
    if (item.label != 0 && item.label != 1) {
      throw Error(Errc::out_of_range, "label must be 0 or 1");
    }
  }
}

struct TieGroup {
  double score = 0.0;
  std::size_t tp = 0;  // cumulative counts including this group
  std::size_t fp = 0;
};

// Cumulative confusion counts at each distinct score, descending.
std::vector<TieGroup> tie_groups(ScoredLabelSet data) {
  std::sort(data.begin(), data.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    return a.score > b.score;
  });
  std::vector<TieGroup> groups;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < data.size()) {
    const double score = data[i].score;
    while (i < data.size() && data[i].score == score) {
      if (data[i].label == 1) ++tp;
      else ++fp;
      ++i;
    }
    groups.push_back({score, tp, fp});
  }
  return groups;
}

double f1_at(std::size_t tp, std::size_t fp, std::size_t n_pos) {
  if (tp + fp == 0 || n_pos == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

json metric_json(const MetricPair& m) {
  return json{{"au_prc", m.au_prc},
              {"n_neg", m.n_neg},
              {"n_pos", m.n_pos},
              {"optimal_f1", m.optimal_f1},
              {"optimal_threshold", m.optimal_threshold}};
}

json curve_json(const PRCurve& curve) {
  json points = json::array();
  for (const PRPoint& p : curve.points) {
    json point;
    point["precision"] = p.precision;
    point["recall"] = p.recall;
    if (std::isinf(p.threshold)) point["threshold"] = nullptr;
    else point["threshold"] = p.threshold;
    points.push_back(std::move(point));
  }
  return points;
}

std::string csv_cell(double value) { return json(value).dump(); }

std::string hid(HarmType harm) { return std::string(harm_id(harm)); }

}  // namespace

PRCurve pr_curve(const ScoredLabelSet& data) {
  check_data(data);
  std::size_t n_pos = 0;
  for (const ScoredLabel& item : data) n_pos += item.label;
  if (n_pos == 0 || n_pos == data.size()) {
    throw Error(Errc::degenerate_labels, "need at least one positive and one negative");
  }

  const std::vector<TieGroup> groups = tie_groups(data);
  PRCurve curve;
  const double first_precision =
      static_cast<double>(groups.front().tp) /
      static_cast<double>(groups.front().tp + groups.front().fp);
  curve.points.push_back({0.0, first_precision, std::numeric_limits<double>::infinity()});
  for (const TieGroup& g : groups) {
    const double recall = static_cast<double>(g.tp) / static_cast<double>(n_pos);
    const double precision = static_cast<double>(g.tp) / static_cast<double>(g.tp + g.fp);
    curve.points.push_back({recall, precision, g.score});
  }
  return curve;
}

double au_prc(const PRCurve& curve) {
  if (curve.points.empty()) throw Error(Errc::precondition, "empty curve");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    area += (curve.points[i].recall - curve.points[i - 1].recall) *
            curve.points[i].precision;
  }
  return area;
}

std::pair<double, double> optimal_f1(const ScoredLabelSet& data) {
  check_data(data);
  std::size_t n_pos = 0;
  for (const ScoredLabel& item : data) n_pos += item.label;
  if (n_pos == 0) throw Error(Errc::no_positives, "need at least one positive label");

  // The +inf sentinel predicts nothing (F1 = 0); every real group dominates
  // it, so scanning descending with a strict improvement keeps the largest
  // threshold among ties.
  double best_f1 = 0.0;
  double best_threshold = std::numeric_limits<double>::infinity();
  for (const TieGroup& g : tie_groups(data)) {
    const double f1 = f1_at(g.tp, g.fp, n_pos);
    if (f1 > best_f1) {
      best_f1 = f1;
      best_threshold = g.score;
    }
  }
  return {best_f1, best_threshold};
}

EvalReport evaluate(const std::vector<ExampleRecord>& records, Backend& backend,
                    const EvalConfig& cfg, Warnings* warnings) {
  if (records.empty()) throw Error(Errc::empty_corpus, "no records to evaluate");
  if (cfg.harms.empty()) throw Error(Errc::precondition, "empty harm set");

  for (const ExampleRecord& record : records) {
    for (HarmType harm : cfg.harms) {
      if (!record.labels.count(hid(harm))) {
        throw Error(Errc::unlabeled_record,
                    record.id + ": missing label for " + hid(harm));
      }
    }
  }

  std::vector<HarmScores> scored;
  scored.reserve(records.size());
  for (const ExampleRecord& record : records) {
    try {
      scored.push_back(score_example(record.use_case_kind, record.prompt_text,
                                     record.response_text, cfg.harms, cfg.score,
                                     backend, warnings));
    } catch (const Error& e) {
      if (!e.is_backend_failure()) throw;
      throw Error(e.code(), record.id + ": " + e.message());
    }
  }

  EvalReport report;
  report.temperature = cfg.score.temperature;
  report.alpha = cfg.score.alpha;
  report.threshold = cfg.threshold;
  report.model_id = backend.model_id();
  report.mode = cfg.mode == EvalMode::overall ? "overall" : "one_vs_all";
  for (HarmType harm : cfg.harms) report.harm_ids.push_back(hid(harm));

  auto metrics_for = [&](const ScoredLabelSet& data, const std::string& scope) {
    MetricPair m;
    for (const ScoredLabel& item : data) {
      if (item.label == 1) ++m.n_pos;
      else ++m.n_neg;
    }
    try {
      const PRCurve curve = pr_curve(data);
      m.au_prc = au_prc(curve);
      const auto [f1, threshold] = optimal_f1(data);
      m.optimal_f1 = f1;
      m.optimal_threshold = threshold;
      report.curves[scope] = curve;
    } catch (const Error& e) {
      throw Error(e.code(), scope + ": " + e.message());
    }
    return m;
  };

  ScoredLabelSet overall;
  overall.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    int any = 0;
    for (HarmType harm : cfg.harms) {
      any = std::max(any, records[i].labels.at(hid(harm)));
    }
    overall.push_back({aggregate_binary(scored[i]), any});
  }
  report.overall = metrics_for(overall, "overall");

  if (cfg.mode == EvalMode::one_vs_all) {
    for (HarmType harm : cfg.harms) {
      ScoredLabelSet data;
      data.reserve(records.size());
      for (std::size_t i = 0; i < records.size(); ++i) {
        data.push_back({scored[i].probability.at(harm),
                        records[i].labels.at(hid(harm))});
      }
      report.per_harm[harm] = metrics_for(data, hid(harm));
    }
  }
  return report;
}

std::string EvalReport::to_json() const {
  json out;
  out["schema"] = "modkit-eval/1";
  out["config"] = {{"alpha", alpha},
                   {"harms", harm_ids},
                   {"mode", mode},
                   {"model_id", model_id},
                   {"temperature", temperature},
                   {"threshold", threshold}};
  out["overall"] = metric_json(overall);
  if (!per_harm.empty()) {
    json harms = json::object();
    for (const auto& [harm, metrics] : per_harm) {
      harms[hid(harm)] = metric_json(metrics);
    }
    out["per_harm"] = std::move(harms);
  }
  return out.dump();
}

std::string EvalReport::to_csv() const {
  std::string out = "scope,optimal_f1,optimal_threshold,au_prc,n_pos,n_neg\n";
  auto row = [&out](const std::string& scope, const MetricPair& m) {
    out += scope + "," + csv_cell(m.optimal_f1) + "," + csv_cell(m.optimal_threshold) +
           "," + csv_cell(m.au_prc) + "," + std::to_string(m.n_pos) + "," +
           std::to_string(m.n_neg) + "\n";
  };
  row("overall", overall);
  for (const auto& [harm, metrics] : per_harm) row(hid(harm), metrics);
  return out;
}

std::string EvalReport::curves_json() const {
  json out = json::object();
  for (const auto& [scope, curve] : curves) out[scope] = curve_json(curve);
  return out.dump();
}

}  // namespace modkit
