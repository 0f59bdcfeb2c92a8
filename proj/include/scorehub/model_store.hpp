#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/estimators.hpp"
#include "scorehub/feature_set.hpp"
#include "scorehub/statistics.hpp"

namespace scorehub {

inline constexpr int kModelFormatVersion = 2;
inline constexpr std::string_view kModelMagic = "scorehub-model";

// machine, os and runtime of the training host.
nlohmann::ordered_json capture_environment();

// A trained, servable model: estimator, feature definitions and the fitness
// statistics computed from cross-validation.
struct Model {
  std::string name;
  std::string context;
  std::string version = "0.1.0";
  Estimator estimator;
  FeatureSet feature_set;
  Statistics statistics;
  nlohmann::ordered_json environment = nlohmann::ordered_json::object();
  // Built from feature_set on load.
  std::shared_ptr<const DependencyGraph> graph;

  const std::vector<std::string>& label_set() const { return estimator.label_set(); }
  const std::vector<std::string>& feature_names() const {
    return estimator.feature_names();
  }

  // {type, version, environment, params, statistics}.
  nlohmann::ordered_json info() const;
  nlohmann::ordered_json params_json() const;
};

// Throws kInvalidParams when the feature set and estimator disagree.
void finalize(Model& model);

// Text container: a header line "scorehub-model <format> sha256:<hex>"
// followed by the JSON payload the checksum covers. Written atomically.
void save_model(const Model& model, const std::filesystem::path& path);
std::string serialize_model(const Model& model);
// Throws kCorruptModelFile, kIncompatibleFormatVersion, kIoError.
Model load_model(const std::filesystem::path& path);
Model parse_model(std::string_view bytes);

// Dotted field addressing into info(). Segments are object keys or array
// indices; a final quoted segment ('...' or "...") under
// statistics.thresholds.<label> is a threshold query whose result is a row
// document or null. Throws kUnknownFieldPath and threshold-query errors.
nlohmann::ordered_json model_info(const Model& model, std::string_view field_path);

enum class VersionPart { kMajor, kMinor, kPatch };
VersionPart parse_version_part(std::string_view part);
// Semver arithmetic; lower parts reset to zero.
std::string bump_version(const std::string& version, VersionPart part);
Model bump_version(Model model, VersionPart part);

// context -> model name -> model. Readers get immutable snapshots; writers
// swap whole entries.
class ModelRegistry {
 public:
  using ModelPtr = std::shared_ptr<const Model>;

  void put(ModelPtr model);
  // Replaces the entire registry contents in one step.
  void replace_all(std::vector<ModelPtr> models);
  // Loads every *.model file beneath dir and swaps them in.
  std::size_t load_directory(const std::filesystem::path& dir);

  // Throws kContextNotFound / kModelNotFound.
  ModelPtr get(const std::string& context, const std::string& name) const;
  bool has_context(const std::string& context) const;
  std::vector<std::string> contexts() const;
  // Throws kContextNotFound.
  std::vector<std::string> model_names(const std::string& context) const;

 private:
  using Map = std::map<std::string, std::map<std::string, ModelPtr>>;
  mutable std::shared_mutex mutex_;
  std::shared_ptr<const Map> models_ = std::make_shared<Map>();
};

}  // namespace scorehub
