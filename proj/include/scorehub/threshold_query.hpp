#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "scorehub/statistics.hpp"

namespace scorehub {

enum class Direction { kMaximum, kMinimum };
enum class Metric { kPrecision, kRecall, kFpr, kAccuracy, kF1, kFilterRate, kMatchRate };
enum class Comparator { kGe, kLe, kGt, kLt };

std::string_view to_string(Direction d);
std::string_view to_string(Metric m);
std::string_view to_string(Comparator c);
// Throws kUnknownMetric.
Metric parse_metric(std::string_view name);

// Undefined metrics (zero denominator) are nullopt.
std::optional<double> metric_value(const ThresholdRow& row, Metric m);

// direction target '@' constraint comparator bound, e.g.
// "maximum recall @ precision >= 0.9".
struct ThresholdQuery {
  Direction direction = Direction::kMaximum;
  Metric target = Metric::kRecall;
  Metric constraint = Metric::kPrecision;
  Comparator comparator = Comparator::kGe;
  double bound = 0.0;

  bool operator==(const ThresholdQuery&) const = default;
};

// Throws kSyntaxError (with position and expected tokens), kUnknownMetric,
// kBoundOutOfRange.
ThresholdQuery parse_threshold_query(std::string_view text);
// Canonical single-spaced form; re-parses to an equal query.
std::string to_string(const ThresholdQuery& query);

bool satisfies(const ThresholdRow& row, const ThresholdQuery& query);

// Best qualifying row, ties broken by the greater threshold. Rows with an
// undefined constraint or target metric never qualify. nullopt when nothing
// qualifies.
std::optional<ThresholdRow> optimize(const ThresholdQuery& query,
                                     const ThresholdTable& table);

}  // namespace scorehub
