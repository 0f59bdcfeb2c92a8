#include "scorehub/value.hpp"

#include <charconv>
#include <cmath>

#include "scorehub/error.hpp"

namespace scorehub {

std::string_view to_string(ValueType type) {
  switch (type) {
    case ValueType::kBoolean: return "boolean";
    case ValueType::kInteger: return "integer";
    case ValueType::kReal: return "real";
    case ValueType::kText: return "text";
  }
  return "text";
}

ValueType parse_value_type(std::string_view name) {
  if (name == "boolean") return ValueType::kBoolean;
  if (name == "integer") return ValueType::kInteger;
  if (name == "real") return ValueType::kReal;
  if (name == "text") return ValueType::kText;
  throw Error(ErrorCode::kInvalidParams,
              "unknown value type '" + std::string(name) + "'");
}

ValueType type_of(const Value& value) {
  return static_cast<ValueType>(value.index());
}

double to_real(const Value& value) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) {
          return v ? 1.0 : 0.0;
        } else if constexpr (std::is_same_v<T, std::string>) {
          throw Error(ErrorCode::kTypeMismatch,
                      "text value cannot be used as a model input");
        } else {
          return static_cast<double>(v);
        }
      },
      value);
}

namespace {

[[noreturn]] void mismatch(std::string_view name, std::string_view raw,
                           ValueType type) {
  throw Error(ErrorCode::kTypeMismatch,
              "value '" + std::string(raw) + "' for '" + std::string(name) +
                  "' is not a valid " + std::string(to_string(type)));
}

}  // namespace

Value coerce(std::string_view raw, ValueType type, std::string_view name) {
  switch (type) {
    case ValueType::kBoolean:
      if (raw == "true") return true;
      if (raw == "false") return false;
      mismatch(name, raw, type);
    case ValueType::kInteger: {
      std::int64_t out = 0;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
      if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size()) {
        mismatch(name, raw, type);
      }
      return out;
    }
    case ValueType::kReal: {
      double out = 0;
      auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), out);
      if (raw.empty() || ec != std::errc() || ptr != raw.data() + raw.size() ||
          !std::isfinite(out)) {
        mismatch(name, raw, type);
      }
      return out;
    }
    case ValueType::kText:
      return std::string(raw);
  }
  mismatch(name, raw, type);
}

Value coerce_json(const nlohmann::json& raw, ValueType type, std::string_view name) {
  switch (type) {
    case ValueType::kBoolean:
      if (raw.is_boolean()) return raw.get<bool>();
      break;
    case ValueType::kInteger:
      if (raw.is_number_integer()) return raw.get<std::int64_t>();
      break;
    case ValueType::kReal:
      if (raw.is_number()) return raw.get<double>();
      break;
    case ValueType::kText:
      if (raw.is_string()) return raw.get<std::string>();
      break;
  }
  mismatch(name, raw.dump(), type);
}

nlohmann::json to_json(const Value& value) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

}  // namespace scorehub
