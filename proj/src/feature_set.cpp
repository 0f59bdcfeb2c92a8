#include "scorehub/feature_set.hpp"

#include <cmath>
#include <fstream>

namespace scorehub {

namespace {

const std::string& text_of(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error(ErrorCode::kTypeMismatch, "expected a text input");
}

std::int64_t count_occurrences(const std::string& haystack,
                               const std::string& needle) {
  if (needle.empty()) return 0;
  std::int64_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

void require_deps(const FeatureSpec& spec, std::size_t n) {
  if (spec.depends_on.size() != n) {
    throw Error(ErrorCode::kInvalidParams,
                "feature '" + spec.name + "' (" + spec.op + ") needs " +
                    std::to_string(n) + " dependencies");
  }
}

void require_type(const FeatureSpec& spec, ValueType type) {
  if (spec.type != type) {
    throw Error(ErrorCode::kInvalidParams,
                "feature '" + spec.name + "' (" + spec.op + ") must be " +
                    std::string(to_string(type)));
  }
}

std::function<Value(std::span<const Value>)> make_compute(
    const FeatureSpec& spec, const FeatureSet& set) {
  const std::string& op = spec.op;
  if (op == "identity") {
    require_deps(spec, 1);
    return [](std::span<const Value> in) { return in[0]; };
  }
  if (op == "token_count") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kInteger);
    return [](std::span<const Value> in) -> Value {
      return static_cast<std::int64_t>(tokenize(text_of(in[0])).size());
    };
  }
  if (op == "char_count") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kInteger);
    return [](std::span<const Value> in) -> Value {
      return static_cast<std::int64_t>(char_count(text_of(in[0])));
    };
  }
  if (op == "lexicon_count") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kInteger);
    auto ref = spec.args.value("lexicon", std::string());
    auto it = set.lexicons.find(ref);
    if (it == set.lexicons.end()) {
      throw Error(ErrorCode::kInvalidParams,
                  "feature '" + spec.name + "' references unknown lexicon '" +
                      ref + "'");
    }
    auto lexicon = std::make_shared<const Lexicon>(it->second.lexicon);
    return [lexicon](std::span<const Value> in) -> Value {
      return static_cast<std::int64_t>(
          informal_word_count(text_of(in[0]), *lexicon));
    };
  }
  if (op == "substring_count") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kInteger);
    std::vector<std::string> patterns;
    const auto listed = spec.args.value("patterns", nlohmann::json::array());
    for (const auto& p : listed) {
      patterns.push_back(ascii_lower(p.get<std::string>()));
    }
    if (patterns.empty()) {
      throw Error(ErrorCode::kInvalidParams,
                  "feature '" + spec.name + "' needs args.patterns");
    }
    return [patterns](std::span<const Value> in) -> Value {
      std::string lowered = ascii_lower(text_of(in[0]));
      std::int64_t total = 0;
      for (const auto& p : patterns) total += count_occurrences(lowered, p);
      return total;
    };
  }
  if (op == "line_prefix_count") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kInteger);
    auto prefix = spec.args.value("prefix", std::string());
    if (prefix.empty()) {
      throw Error(ErrorCode::kInvalidParams,
                  "feature '" + spec.name + "' needs args.prefix");
    }
    return [prefix](std::span<const Value> in) -> Value {
      const std::string& text = text_of(in[0]);
      std::int64_t count = 0;
      std::size_t start = 0;
      while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (text.compare(start, prefix.size(), prefix) == 0) ++count;
        if (end == std::string::npos) break;
        start = end + 1;
      }
      return count;
    };
  }
  if (op == "markup_char_count") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kInteger);
    auto chars = spec.args.value("chars", std::string("[]{}<>|=*#'"));
    return [chars](std::span<const Value> in) -> Value {
      const std::string& text = text_of(in[0]);
      return static_cast<std::int64_t>(std::count_if(
          text.begin(), text.end(),
          [&](char c) { return chars.find(c) != std::string::npos; }));
    };
  }
  if (op == "length_delta") {
    require_deps(spec, 2);
    require_type(spec, ValueType::kInteger);
    return [](std::span<const Value> in) -> Value {
      return static_cast<std::int64_t>(text_of(in[0]).size()) -
             static_cast<std::int64_t>(text_of(in[1]).size());
    };
  }
  if (op == "log1p") {
    require_deps(spec, 1);
    require_type(spec, ValueType::kReal);
    return [](std::span<const Value> in) -> Value {
      return std::log1p(std::max(0.0, to_real(in[0])));
    };
  }
  throw Error(ErrorCode::kInvalidParams,
              "feature '" + spec.name + "' uses unknown op '" + op + "'");
}

void add_root(DependencyGraph& graph, const char* name, ValueType type,
              std::function<Value(const RevisionRecord&)> fetch) {
  DependentRef ref;
  ref.name = name;
  ref.kind = DependentKind::kDatasource;
  ref.value_type = type;
  ref.fetch = std::move(fetch);
  graph.add(std::move(ref));
}

}  // namespace

std::vector<std::string> FeatureSet::feature_names() const {
  std::vector<std::string> names;
  names.reserve(features.size());
  for (const auto& f : features) names.push_back(f.name);
  return names;
}

std::vector<std::string> read_lexicon_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open lexicon " + file.string());
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') continue;
    entries.push_back(line);
  }
  return entries;
}

FeatureSet feature_set_from_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir) {
  try {
    FeatureSet set;
    set.format_version = doc.at("format_version").get<int>();
    if (set.format_version != kFeatureSetFormatVersion) {
      throw Error(ErrorCode::kIncompatibleFormatVersion,
                  "feature set format_version " +
                      std::to_string(set.format_version) + " is not supported");
    }
    set.name = doc.at("name").get<std::string>();
    set.context = doc.at("context").get<std::string>();
    const auto lexicons = doc.value("lexicons", nlohmann::json::object());
    for (const auto& [key, value] : lexicons.items()) {
      LexiconRef ref;
      if (value.is_string()) {
        ref.path = value.get<std::string>();
        ref.lexicon = Lexicon(read_lexicon_file(base_dir / ref.path));
      } else {
        ref.path = value.value("path", std::string());
        ref.lexicon =
            Lexicon(value.at("entries").get<std::vector<std::string>>());
      }
      set.lexicons.emplace(key, std::move(ref));
    }
    for (const auto& f : doc.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.type = parse_value_type(f.at("type").get<std::string>());
      spec.op = f.at("op").get<std::string>();
      spec.depends_on = f.at("depends_on").get<std::vector<std::string>>();
      spec.args = f.value("args", nlohmann::json::object());
      set.features.push_back(std::move(spec));
    }
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidParams,
                std::string("malformed feature set: ") + e.what());
  }
}

FeatureSet load_feature_set(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + file.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidParams,
                file.string() + ": " + std::string(e.what()));
  }
  return feature_set_from_json(doc, file.parent_path());
}

nlohmann::json to_json(const FeatureSet& set, bool inline_lexicons) {
  nlohmann::json doc;
  doc["format_version"] = set.format_version;
  doc["name"] = set.name;
  doc["context"] = set.context;
  nlohmann::json lexicons = nlohmann::json::object();
  for (const auto& [key, ref] : set.lexicons) {
    if (inline_lexicons) {
      lexicons[key] = {{"path", ref.path}, {"entries", ref.lexicon.entries()}};
    } else {
      lexicons[key] = ref.path;
    }
  }
  doc["lexicons"] = lexicons;
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : set.features) {
    nlohmann::json entry = {{"name", f.name},
                            {"type", to_string(f.type)},
                            {"op", f.op},
                            {"depends_on", f.depends_on}};
    if (!f.args.empty()) entry["args"] = f.args;
    features.push_back(std::move(entry));
  }
  doc["features"] = features;
  return doc;
}

std::shared_ptr<const DependencyGraph> build_graph(const FeatureSet& set) {
  auto graph = std::make_shared<DependencyGraph>();
  add_root(*graph, kRevisionText, ValueType::kText,
           [](const RevisionRecord& r) -> Value { return r.text; });
  add_root(*graph, kParentText, ValueType::kText,
           [](const RevisionRecord& r) -> Value { return r.parent_text; });
  add_root(*graph, kUserIsAnon, ValueType::kBoolean,
           [](const RevisionRecord& r) -> Value { return r.user_is_anon; });
  add_root(*graph, kUserAccountAge, ValueType::kInteger,
           [](const RevisionRecord& r) -> Value {
             return r.user_account_age_seconds;
           });
  add_root(*graph, kRevisionTimestamp, ValueType::kInteger,
           [](const RevisionRecord& r) -> Value { return r.timestamp; });
  for (const auto& spec : set.features) {
    DependentRef ref;
    ref.name = spec.name;
    ref.kind = DependentKind::kFeature;
    ref.value_type = spec.type;
    ref.dependencies = spec.depends_on;
    ref.compute = make_compute(spec, set);
    graph->add(std::move(ref));
  }
  graph->validate();
  for (const auto& spec : set.features) {
    if (spec.type == ValueType::kText) {
      throw Error(ErrorCode::kInvalidParams,
                  "feature '" + spec.name + "' is text; model inputs are numeric");
    }
    if (spec.op == "identity" &&
        graph->at(spec.depends_on[0]).value_type != spec.type) {
      throw Error(ErrorCode::kInvalidParams,
                  "identity feature '" + spec.name +
                      "' must match its dependency's type");
    }
  }
  return graph;
}

FeatureSet reference_feature_set(const std::string& context,
                                 std::vector<std::string> informal_words,
                                 std::vector<std::string> bad_words) {
  FeatureSet set;
  set.name = "reference";
  set.context = context;
  set.lexicons["informal"] = {"lexicons/" + context + ".informal.txt",
                              Lexicon(std::move(informal_words))};
  set.lexicons["badwords"] = {"lexicons/" + context + ".badwords.txt",
                              Lexicon(std::move(bad_words))};
  auto add = [&](std::string name, ValueType type, std::string op,
                 std::vector<std::string> deps,
                 nlohmann::json args = nlohmann::json::object()) {
    set.features.push_back(
        {std::move(name), type, std::move(op), std::move(deps), std::move(args)});
  };
  add("words_count", ValueType::kInteger, "token_count", {kRevisionText});
  add("chars_count", ValueType::kInteger, "char_count", {kRevisionText});
  add("informal_word_count", ValueType::kInteger, "lexicon_count",
      {kRevisionText}, {{"lexicon", "informal"}});
  add("revision.user.is_anon", ValueType::kBoolean, "identity", {kUserIsAnon});
  add("revision.user.account_age_seconds", ValueType::kInteger, "identity",
      {kUserAccountAge});
  add("refs_count", ValueType::kInteger, "substring_count", {kRevisionText},
      {{"patterns", {"<ref"}}});
  add("headers_count", ValueType::kInteger, "line_prefix_count", {kRevisionText},
      {{"prefix", "=="}});
  add("images_count", ValueType::kInteger, "substring_count", {kRevisionText},
      {{"patterns", {"[[file:", "[[image:"}}});
  add("categories_count", ValueType::kInteger, "substring_count",
      {kRevisionText}, {{"patterns", {"[[category:"}}});
  add("badwords_count", ValueType::kInteger, "lexicon_count", {kRevisionText},
      {{"lexicon", "badwords"}});
  add("markup_chars", ValueType::kInteger, "markup_char_count", {kRevisionText});
  add("bytes_changed", ValueType::kInteger, "length_delta",
      {kRevisionText, kParentText});
  return set;
}

}  // namespace scorehub
