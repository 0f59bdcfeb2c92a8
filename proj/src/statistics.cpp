#include "scorehub/statistics.hpp"

#include <algorithm>
#include <memory>
#include <numeric>

#include "scorehub/error.hpp"

namespace scorehub {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

ordered_json optional_json(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

std::optional<double> optional_from(const json& doc, const char* key) {
  const auto& v = doc.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

void check_lengths(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scores and labels differ in length");
  }
}

ordered_json averaged_json(const Averaged& a) {
  ordered_json labels = ordered_json::object();
  for (const auto& [label, value] : a.labels) labels[label] = value;
  return {{"macro", a.macro}, {"micro", a.micro}, {"labels", labels}};
}

Averaged averaged_from(const json& doc) {
  Averaged a;
  a.macro = doc.at("macro").get<double>();
  a.micro = doc.at("micro").get<double>();
  a.labels = doc.at("labels").get<std::map<std::string, double>>();
  return a;
}

}  // namespace

ThresholdRow make_row(double threshold, std::size_t tp, std::size_t fp,
                      std::size_t tn, std::size_t fn) {
  ThresholdRow row;
  row.threshold = threshold;
  row.tp = tp;
  row.fp = fp;
  row.tn = tn;
  row.fn = fn;
  std::size_t n = tp + fp + tn + fn;
  row.precision = ratio(tp, tp + fp);
  row.recall = ratio(tp, tp + fn);
  row.fpr = ratio(fp, fp + tn);
  row.accuracy = ratio(tp + tn, n).value_or(0.0);
  if (row.precision && row.recall) {
    double sum = *row.precision + *row.recall;
    row.f1 = sum > 0.0 ? 2.0 * *row.precision * *row.recall / sum : 0.0;
  }
  row.filter_rate = ratio(tn + fn, n).value_or(0.0);
  row.match_rate = 1.0 - row.filter_rate;
  return row;
}

ThresholdTable build_threshold_table(std::span<const double> scores,
                                     std::span<const bool> positive) {
  check_lengths(scores, positive);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (positive[i] ? pos : neg).push_back(scores[i]);
  }
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto at_least = [](const std::vector<double>& sorted, double t) {
    return static_cast<std::size_t>(
        sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };
  ThresholdTable table;
  std::size_t prev_tp = 0, prev_fp = 0;
  for (int i = 0; i <= kThresholdGridSteps; ++i) {
    double t = grid_threshold(i);
    std::size_t tp = at_least(pos, t);
    std::size_t fp = at_least(neg, t);
    // Counts only shrink as t grows, so a change closes the previous run.
    if (i > 0 && (tp != prev_tp || fp != prev_fp)) {
      table.push_back(make_row(grid_threshold(i - 1), prev_tp, prev_fp,
                               neg.size() - prev_fp, pos.size() - prev_tp));
    }
    prev_tp = tp;
    prev_fp = fp;
  }
  table.push_back(make_row(grid_threshold(kThresholdGridSteps), prev_tp, prev_fp,
                           neg.size() - prev_fp, pos.size() - prev_tp));
  return table;
}

double roc_auc(std::span<const double> scores, std::span<const bool> positive) {
  check_lengths(scores, positive);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of positive midranks, Mann-Whitney U.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double pr_auc(std::span<const double> scores, std::span<const bool> positive) {
  check_lengths(scores, positive);
  std::size_t total_pos = std::count(positive.begin(), positive.end(), true);
  if (total_pos == 0) return 0.0;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += positive[order[j]];
      ++j;
    }
    seen = j;
    double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double Statistics::accuracy() const {
  std::size_t correct = 0;
  for (const auto& [actual, row] : predictions) {
    if (auto it = row.find(actual); it != row.end()) correct += it->second;
  }
  return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0;
}

Statistics compute_statistics(std::span<const ScoredExample> examples,
                              const std::vector<std::string>& label_set) {
  if (examples.empty()) {
    throw Error(ErrorCode::kEmptyPredictions, "no predictions to evaluate");
  }
  const std::size_t k = label_set.size();
  Statistics stats;
  stats.n = examples.size();
  stats.label_set = label_set;
  std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
  for (const auto& ex : examples) {
    if (ex.probabilities.size() != k || ex.label >= k) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "prediction does not match the label set");
    }
    std::size_t predicted = static_cast<std::size_t>(
        std::max_element(ex.probabilities.begin(), ex.probabilities.end()) -
        ex.probabilities.begin());
    ++confusion[ex.label][predicted];
  }
  std::vector<double> support(k, 0.0);
  for (std::size_t a = 0; a < k; ++a) {
    std::size_t count = 0;
    for (std::size_t p = 0; p < k; ++p) {
      stats.predictions[label_set[a]][label_set[p]] = confusion[a][p];
      count += confusion[a][p];
    }
    stats.label_counts[label_set[a]] = count;
    support[a] = static_cast<double>(count) / static_cast<double>(stats.n);
  }

  auto finish = [&](Averaged& avg, const std::vector<double>& per_label) {
    for (std::size_t c = 0; c < k; ++c) {
      avg.labels[label_set[c]] = per_label[c];
      avg.macro += per_label[c] / static_cast<double>(k);
      avg.micro += per_label[c] * support[c];
    }
  };
  std::vector<double> precision(k), recall(k), pr(k), roc(k);
  std::vector<double> scores(stats.n);
  std::unique_ptr<bool[]> positive(new bool[stats.n]);
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t predicted_c = 0;
    for (std::size_t a = 0; a < k; ++a) predicted_c += confusion[a][c];
    precision[c] = ratio(confusion[c][c], predicted_c).value_or(0.0);
    recall[c] = ratio(confusion[c][c], stats.label_counts[label_set[c]]).value_or(0.0);
    for (std::size_t i = 0; i < stats.n; ++i) {
      scores[i] = examples[i].probabilities[c];
      positive[i] = examples[i].label == c;
    }
    std::span<const bool> pos(positive.get(), stats.n);
    pr[c] = scorehub::pr_auc(scores, pos);
    roc[c] = scorehub::roc_auc(scores, pos);
    stats.thresholds[label_set[c]] = build_threshold_table(scores, pos);
  }
  finish(stats.precision, precision);
  finish(stats.recall, recall);
  finish(stats.pr_auc, pr);
  finish(stats.roc_auc, roc);
  return stats;
}

ordered_json to_json(const ThresholdRow& row) {
  return {{"threshold", row.threshold},
          {"tp", row.tp},
          {"fp", row.fp},
          {"tn", row.tn},
          {"fn", row.fn},
          {"precision", optional_json(row.precision)},
          {"recall", optional_json(row.recall)},
          {"fpr", optional_json(row.fpr)},
          {"accuracy", row.accuracy},
          {"f1", optional_json(row.f1)},
          {"filter_rate", row.filter_rate},
          {"match_rate", row.match_rate}};
}

ThresholdRow threshold_row_from_json(const json& doc) {
  ThresholdRow row;
  row.threshold = doc.at("threshold").get<double>();
  row.tp = doc.at("tp").get<std::size_t>();
  row.fp = doc.at("fp").get<std::size_t>();
  row.tn = doc.at("tn").get<std::size_t>();
  row.fn = doc.at("fn").get<std::size_t>();
  row.precision = optional_from(doc, "precision");
  row.recall = optional_from(doc, "recall");
  row.fpr = optional_from(doc, "fpr");
  row.accuracy = doc.at("accuracy").get<double>();
  row.f1 = optional_from(doc, "f1");
  row.filter_rate = doc.at("filter_rate").get<double>();
  row.match_rate = doc.at("match_rate").get<double>();
  return row;
}

ordered_json to_json(const Statistics& stats) {
  ordered_json labels = ordered_json::object();
  ordered_json predictions = ordered_json::object();
  for (const auto& [label, count] : stats.label_counts) labels[label] = count;
  for (const auto& [actual, row] : stats.predictions) {
    ordered_json inner = ordered_json::object();
    for (const auto& [predicted, count] : row) inner[predicted] = count;
    predictions[actual] = std::move(inner);
  }
  ordered_json thresholds = ordered_json::object();
  for (const auto& [label, table] : stats.thresholds) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : table) rows.push_back(to_json(row));
    thresholds[label] = std::move(rows);
  }
  return {{"counts", {{"labels", labels}, {"n", stats.n}, {"predictions", predictions}}},
          {"precision", averaged_json(stats.precision)},
          {"recall", averaged_json(stats.recall)},
          {"pr_auc", averaged_json(stats.pr_auc)},
          {"roc_auc", averaged_json(stats.roc_auc)},
          {"thresholds", thresholds}};
}

Statistics statistics_from_json(const json& doc) {
  Statistics stats;
  const auto& counts = doc.at("counts");
  stats.n = counts.at("n").get<std::size_t>();
  stats.label_counts = counts.at("labels").get<std::map<std::string, std::size_t>>();
  for (const auto& [label, count] : stats.label_counts) stats.label_set.push_back(label);
  stats.predictions =
      counts.at("predictions")
          .get<std::map<std::string, std::map<std::string, std::size_t>>>();
  stats.precision = averaged_from(doc.at("precision"));
  stats.recall = averaged_from(doc.at("recall"));
  stats.pr_auc = averaged_from(doc.at("pr_auc"));
  stats.roc_auc = averaged_from(doc.at("roc_auc"));
  for (const auto& [label, rows] : doc.at("thresholds").items()) {
    ThresholdTable table;
    for (const auto& row : rows) table.push_back(threshold_row_from_json(row));
    stats.thresholds[label] = std::move(table);
  }
  return stats;
}

json label_to_json(const std::string& label) {
  if (label == "true") return true;
  if (label == "false") return false;
  return label;
}

std::string label_from_json(const json& value) {
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_string()) return value.get<std::string>();
  throw Error(ErrorCode::kInvalidParams, "label must be a string or boolean");
}

}  // namespace scorehub
