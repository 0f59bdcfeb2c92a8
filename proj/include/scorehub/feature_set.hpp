#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/feature_graph.hpp"
#include "scorehub/text.hpp"

namespace scorehub {

// Root datasources every graph starts with; each reads one revision field.
inline constexpr const char* kRevisionText = "revision.text";
inline constexpr const char* kParentText = "revision.parent.text";
inline constexpr const char* kUserIsAnon = "user.is_anon";
inline constexpr const char* kUserAccountAge = "user.account_age_seconds";
inline constexpr const char* kRevisionTimestamp = "revision.timestamp";

inline constexpr int kFeatureSetFormatVersion = 1;

// One feature declaration. `op` names a built-in computation:
//   identity          one dependency, passed through
//   token_count       tokens of a text dependency
//   char_count        code points of a text dependency
//   lexicon_count     tokens matched by args.lexicon
//   substring_count   case-insensitive occurrences of any of args.patterns
//   line_prefix_count lines starting with args.prefix
//   markup_char_count characters in args.chars (default "[]{}<>|=*#'")
//   length_delta      byte length of dep 0 minus byte length of dep 1
//   log1p             log(1 + max(0, x)) of a numeric dependency
struct FeatureSpec {
  std::string name;
  ValueType type = ValueType::kInteger;
  std::string op;
  std::vector<std::string> depends_on;
  nlohmann::json args = nlohmann::json::object();
};

struct LexiconRef {
  std::string path;  // as written in the definition file
  Lexicon lexicon;
};

// A declarative feature list for one (context, model).
struct FeatureSet {
  int format_version = kFeatureSetFormatVersion;
  std::string name;
  std::string context;
  std::map<std::string, LexiconRef> lexicons;
  std::vector<FeatureSpec> features;

  std::vector<std::string> feature_names() const;
};

// Lexicon paths are resolved relative to the definition file. A lexicon may
// instead be inlined as {"path": ..., "entries": [...]}.
FeatureSet load_feature_set(const std::filesystem::path& file);
FeatureSet feature_set_from_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir = {});
// With inline_lexicons the document is self-contained (used in model files).
nlohmann::json to_json(const FeatureSet& set, bool inline_lexicons);

std::vector<std::string> read_lexicon_file(const std::filesystem::path& file);

// Root datasources plus every declared feature; validated and acyclic.
std::shared_ptr<const DependencyGraph> build_graph(const FeatureSet& set);

// The twelve-feature reference set over revision text and user metadata.
FeatureSet reference_feature_set(const std::string& context,
                                 std::vector<std::string> informal_words,
                                 std::vector<std::string> bad_words);

}  // namespace scorehub
