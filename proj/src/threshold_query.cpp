#include "scorehub/threshold_query.hpp"

#include <cctype>
#include <charconv>

#include "scorehub/error.hpp"

namespace scorehub {

namespace {

constexpr std::pair<Metric, std::string_view> kMetrics[] = {
    {Metric::kPrecision, "precision"}, {Metric::kRecall, "recall"},
    {Metric::kFpr, "fpr"},             {Metric::kAccuracy, "accuracy"},
    {Metric::kF1, "f1"},               {Metric::kFilterRate, "filter_rate"},
    {Metric::kMatchRate, "match_rate"}};

constexpr std::pair<Comparator, std::string_view> kComparators[] = {
    {Comparator::kGe, ">="},
    {Comparator::kLe, "<="},
    {Comparator::kGt, ">"},
    {Comparator::kLt, "<"}};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ThresholdQuery parse() {
    ThresholdQuery q;
    auto direction = word("'maximum' or 'minimum'");
    if (direction == "maximum") {
      q.direction = Direction::kMaximum;
    } else if (direction == "minimum") {
      q.direction = Direction::kMinimum;
    } else {
      fail(word_start_, "'maximum' or 'minimum'", direction);
    }
    q.target = parse_metric(word("a metric name"));
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '@') fail(pos_, "'@'", rest());
    ++pos_;
    q.constraint = parse_metric(word("a metric name"));
    q.comparator = comparator();
    q.bound = number();
    skip_space();
    if (pos_ != text_.size()) fail(pos_, "end of query", rest());
    if (!(q.bound >= 0.0 && q.bound <= 1.0)) {
      throw Error(ErrorCode::kBoundOutOfRange,
                  "bound " + std::string(number_text_) + " is outside [0, 1]");
    }
    return q;
  }

 private:
  [[noreturn]] void fail(std::size_t at, std::string_view expected,
                         std::string_view found) {
    std::string shown = found.empty() ? "end of query" : "'" + std::string(found) + "'";
    throw Error(ErrorCode::kSyntaxError,
                "syntax error at position " + std::to_string(at) + ": expected " +
                    std::string(expected) + ", found " + shown);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  std::string_view rest() const {
    auto end = pos_;
    while (end < text_.size() && !std::isspace(static_cast<unsigned char>(text_[end]))) {
      ++end;
    }
    return text_.substr(pos_, end - pos_);
  }

  std::string_view word(std::string_view expected) {
    skip_space();
    word_start_ = pos_;
    auto is_word = [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    while (pos_ < text_.size() && is_word(text_[pos_])) ++pos_;
    if (pos_ == word_start_) fail(word_start_, expected, rest());
    return text_.substr(word_start_, pos_ - word_start_);
  }

  Comparator comparator() {
    skip_space();
    for (const auto& [cmp, token] : kComparators) {
      if (text_.substr(pos_, token.size()) == token) {
        pos_ += token.size();
        return cmp;
      }
    }
    fail(pos_, "one of '>=', '<=', '>', '<'", rest());
  }

  double number() {
    skip_space();
    auto start = pos_;
    auto is_number = [](char c) {
      return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
             c == '+' || c == 'e' || c == 'E';
    };
    while (pos_ < text_.size() && is_number(text_[pos_])) ++pos_;
    number_text_ = text_.substr(start, pos_ - start);
    std::string_view digits = number_text_;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    double value = 0.0;
    auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (digits.empty() || ec != std::errc() || end != digits.data() + digits.size()) {
      pos_ = start;
      fail(start, "a number", rest());
    }
    return value;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t word_start_ = 0;
  std::string_view number_text_;
};

}  // namespace

std::string_view to_string(Direction d) {
  return d == Direction::kMaximum ? "maximum" : "minimum";
}

std::string_view to_string(Metric m) {
  for (const auto& [metric, name] : kMetrics) {
    if (metric == m) return name;
  }
  return "?";
}

std::string_view to_string(Comparator c) {
  for (const auto& [cmp, token] : kComparators) {
    if (cmp == c) return token;
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  for (const auto& [metric, known] : kMetrics) {
    if (known == name) return metric;
  }
  throw Error(ErrorCode::kUnknownMetric, "unknown metric '" + std::string(name) + "'");
}

std::optional<double> metric_value(const ThresholdRow& row, Metric m) {
  switch (m) {
    case Metric::kPrecision: return row.precision;
    case Metric::kRecall: return row.recall;
    case Metric::kFpr: return row.fpr;
    case Metric::kAccuracy: return row.accuracy;
    case Metric::kF1: return row.f1;
    case Metric::kFilterRate: return row.filter_rate;
    case Metric::kMatchRate: return row.match_rate;
  }
  return std::nullopt;
}

ThresholdQuery parse_threshold_query(std::string_view text) {
  return Parser(text).parse();
}

std::string to_string(const ThresholdQuery& query) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, query.bound);
  (void)ec;
  std::string out;
  out += to_string(query.direction);
  out += ' ';
  out += to_string(query.target);
  out += " @ ";
  out += to_string(query.constraint);
  out += ' ';
  out += to_string(query.comparator);
  out += ' ';
  out.append(buf, end);
  return out;
}

bool satisfies(const ThresholdRow& row, const ThresholdQuery& query) {
  auto value = metric_value(row, query.constraint);
  if (!value) return false;
  switch (query.comparator) {
    case Comparator::kGe: return *value >= query.bound;
    case Comparator::kLe: return *value <= query.bound;
    case Comparator::kGt: return *value > query.bound;
    case Comparator::kLt: return *value < query.bound;
  }
  return false;
}

std::optional<ThresholdRow> optimize(const ThresholdQuery& query,
                                     const ThresholdTable& table) {
  const ThresholdRow* best = nullptr;
  double best_value = 0.0;
  for (const auto& row : table) {
    if (!satisfies(row, query)) continue;
    auto value = metric_value(row, query.target);
    if (!value) continue;
    bool better = best == nullptr ||
                  (query.direction == Direction::kMaximum ? *value > best_value
                                                          : *value < best_value) ||
                  (*value == best_value && row.threshold > best->threshold);
    if (better) {
      best = &row;
      best_value = *value;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

}  // namespace scorehub
