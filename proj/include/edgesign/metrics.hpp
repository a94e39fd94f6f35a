#pragma once

// Link sign prediction metrics: confusion counts at the 0.5 threshold,
// binary/micro/macro F1, per-class precision/recall, and rank-based AUC with
// half credit for ties.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace edgesign {

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  std::size_t num_edges = 0;
  // Confusion counts with "positive sign" as the positive class.
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double binary_f1 = 0.0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;  // absent when the edge set is single-class
  ClassStats positive;
  ClassStats negative;
};

// Predicted sign is positive iff probability > 0.5.
inline bool predicted_positive(double prob) { return prob > 0.5; }

inline MetricReport compute_metrics(const std::vector<double>& scores,
                                    const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::runtime_error("compute_metrics: bad inputs");
  }
  MetricReport r;
  r.num_edges = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = predicted_positive(scores[i]);
    const bool truth = labels[i] != 0;
    if (pred && truth) ++r.tp;
    else if (pred && !truth) ++r.fp;
    else if (!pred && truth) ++r.fn;
    else ++r.tn;
  }
  auto safe_div = [](double num, double den) {
    return den > 0.0 ? num / den : 0.0;
  };
  r.positive.precision = safe_div(double(r.tp), double(r.tp + r.fp));
  r.positive.recall = safe_div(double(r.tp), double(r.tp + r.fn));
  r.positive.f1 = safe_div(2.0 * r.positive.precision * r.positive.recall,
                           r.positive.precision + r.positive.recall);
  r.negative.precision = safe_div(double(r.tn), double(r.tn + r.fn));
  r.negative.recall = safe_div(double(r.tn), double(r.tn + r.fp));
  r.negative.f1 = safe_div(2.0 * r.negative.precision * r.negative.recall,
                           r.negative.precision + r.negative.recall);
  r.binary_f1 = r.positive.f1;
  r.micro_f1 = safe_div(double(r.tp + r.tn), double(r.num_edges));
  r.macro_f1 = 0.5 * (r.positive.f1 + r.negative.f1);

  const std::size_t n_pos = r.tp + r.fn;
  const std::size_t n_neg = r.fp + r.tn;
  if (n_pos > 0 && n_neg > 0) {
    // Rank statistic with average ranks over ties; equals the pairwise
    // P(score_pos > score_neg) + 0.5 P(tie) estimator.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
      return scores[a] < scores[b];
    });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j + 1 < order.size() &&
             scores[order[j + 1]] == scores[order[i]]) {
        ++j;
      }
      const double avg_rank = 0.5 * (double(i + 1) + double(j + 1));
      for (std::size_t k = i; k <= j; ++k) {
        if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
      }
      i = j + 1;
    }
    r.auc = (rank_sum_pos - double(n_pos) * (double(n_pos) + 1.0) / 2.0) /
            (double(n_pos) * double(n_neg));
  }
  return r;
}

inline nlohmann::json metrics_to_json(const MetricReport& r) {
  nlohmann::json j;
  j["num_edges"] = r.num_edges;
  j["confusion"] = {{"tp", r.tp}, {"fp", r.fp}, {"tn", r.tn}, {"fn", r.fn}};
  j["binary_f1"] = r.binary_f1;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  if (r.auc.has_value()) {
    j["auc"] = *r.auc;
  } else {
    j["auc"] = nullptr;
  }
  j["positive"] = {{"precision", r.positive.precision},
                   {"recall", r.positive.recall},
                   {"f1", r.positive.f1}};
  j["negative"] = {{"precision", r.negative.precision},
                   {"recall", r.negative.recall},
                   {"f1", r.negative.f1}};
  return j;
}

inline std::string metrics_table(const MetricReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "edges      %zu\n"
                "binary-F1  %.4f\n"
                "micro-F1   %.4f\n"
                "macro-F1   %.4f\n"
                "AUC        %s\n"
                "confusion  tp=%zu fp=%zu tn=%zu fn=%zu\n",
                r.num_edges, r.binary_f1, r.micro_f1, r.macro_f1,
                r.auc ? std::to_string(*r.auc).c_str() : "n/a", r.tp, r.fp,
                r.tn, r.fn);
  return buf;
}

}  // namespace edgesign
