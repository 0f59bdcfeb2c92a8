#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

namespace scorehub {

enum class ValueType { kBoolean, kInteger, kReal, kText };

// A solved datasource or feature value.
using Value = std::variant<bool, std::int64_t, double, std::string>;

std::string_view to_string(ValueType type);
ValueType parse_value_type(std::string_view name);

ValueType type_of(const Value& value);

// Numeric view used when a feature vector is handed to an estimator.
// Booleans map to 0/1; text is rejected.
double to_real(const Value& value);

// Strict coercion of a raw string (URL parameter, CLI flag) into `type`.
// "1" is not a boolean and "2.5" is not an integer; throws kTypeMismatch.
Value coerce(std::string_view raw, ValueType type, std::string_view name);

// Strict coercion of a JSON value. Integers are accepted for real targets,
// nothing else widens or narrows.
Value coerce_json(const nlohmann::json& raw, ValueType type, std::string_view name);

nlohmann::json to_json(const Value& value);

}  // namespace scorehub
