#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scorehub {

// One operating point. A metric whose denominator is zero is undefined
// (nullopt, rendered as JSON null).
struct ThresholdRow {
  double threshold = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> fpr;
  double accuracy = 0.0;
  std::optional<double> f1;
  double filter_rate = 0.0;
  double match_rate = 0.0;

  bool operator==(const ThresholdRow&) const = default;
};

using ThresholdTable = std::vector<ThresholdRow>;

inline constexpr int kThresholdGridSteps = 1000;

// Grid point i of the 1001-point grid {0.000, 0.001, ..., 1.000}.
inline double grid_threshold(int i) { return i / static_cast<double>(kThresholdGridSteps); }

// Confusion counts to a fully populated row.
ThresholdRow make_row(double threshold, std::size_t tp, std::size_t fp,
                      std::size_t tn, std::size_t fn);

// An item is flagged when score >= threshold. Consecutive grid points with
// identical confusion counts collapse into the row with the greatest
// threshold of the run.
ThresholdTable build_threshold_table(std::span<const double> scores,
                                     std::span<const bool> positive);

// Mann-Whitney estimate, ties count one half. 0.5 when either class is empty.
double roc_auc(std::span<const double> scores, std::span<const bool> positive);
// Average precision by step integration over recall. 0 without positives.
double pr_auc(std::span<const double> scores, std::span<const bool> positive);

struct Averaged {
  double micro = 0.0;
  double macro = 0.0;
  std::map<std::string, double> labels;
};

struct Statistics {
  std::size_t n = 0;
  std::vector<std::string> label_set;
  std::map<std::string, std::size_t> label_counts;
  // actual -> predicted -> count
  std::map<std::string, std::map<std::string, std::size_t>> predictions;
  Averaged precision;
  Averaged recall;
  Averaged pr_auc;
  Averaged roc_auc;
  std::map<std::string, ThresholdTable> thresholds;

  double accuracy() const;
};

struct ScoredExample {
  std::vector<double> probabilities;  // label order
  std::size_t label = 0;
};

// Throws kEmptyPredictions on empty input. Predictions are argmax with ties
// resolved by label order. micro = label-frequency weighted mean.
Statistics compute_statistics(std::span<const ScoredExample> examples,
                              const std::vector<std::string>& label_set);

nlohmann::ordered_json to_json(const ThresholdRow& row);
ThresholdRow threshold_row_from_json(const nlohmann::json& doc);
nlohmann::ordered_json to_json(const Statistics& stats);
Statistics statistics_from_json(const nlohmann::json& doc);

// JSON value for a label: "true" and "false" become booleans.
nlohmann::json label_to_json(const std::string& label);
std::string label_from_json(const nlohmann::json& value);

}  // namespace scorehub
