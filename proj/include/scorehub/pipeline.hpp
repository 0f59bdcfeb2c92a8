#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/datasources.hpp"
#include "scorehub/model_store.hpp"
#include "scorehub/training.hpp"

namespace scorehub {

class WorkerPool;

enum class LabelSource { kManualCampaign, kTraceExtraction };

std::string_view to_string(LabelSource source);
LabelSource parse_label_source(std::string_view name);

struct LabelRecord {
  std::int64_t rev_id = 0;
  std::string label;
  std::string context;

  bool operator==(const LabelRecord&) const = default;
};

// Newline-delimited JSON. The first line is the header
//   {"campaign_id": ..., "label_set": [...], "source": "manual_campaign"}
// and every following line is {"rev_id": ..., "label": ..., "context": ...}.
// Labels are strings on disk; "true"/"false" stay strings.
struct LabelFile {
  std::string campaign_id;
  std::vector<std::string> label_set;
  LabelSource source = LabelSource::kManualCampaign;
  std::vector<LabelRecord> records;

  // Throws kUnknownLabel, kDuplicateRevision.
  void validate() const;
  std::vector<std::pair<std::int64_t, std::string>> labelled() const;
};

// Throws kMalformedLabelRecord (with the line number), kUnknownLabel and
// kDuplicateRevision (naming both lines).
LabelFile read_label_file(std::istream& in);
LabelFile read_label_file(const std::filesystem::path& file);
void write_label_file(std::ostream& out, const LabelFile& labels);
// temp + rename.
void write_label_file(const std::filesystem::path& file, const LabelFile& labels);

// Converts on-wiki assessment events, one JSON object per line:
//   {"rev_id": 1, "context": "enwiki", "assessment": "B", "timestamp": 10}
// The latest assessment of a revision wins; events whose assessment is not
// in label_set are skipped and counted.
struct TraceConversion {
  LabelFile labels;
  std::size_t events = 0;
  std::size_t skipped = 0;
};
TraceConversion labels_from_trace(std::istream& events, const std::string& campaign_id,
                                  const std::vector<std::string>& label_set);

// Accepts a path, "file://path" or "-" (stdin). Anything with another
// scheme is rejected with kIoError.
std::filesystem::path resolve_source(const std::string& source);

// Extracted rows with cached feature values. Same container style as label
// files: a header line then one row per revision.
//   {"feature_set": ..., "context": ..., "label_set": [...], "features": [...]}
//   {"rev_id": ..., "label": ..., "values": [...]}
struct DatasetFile {
  std::string feature_set;
  std::string context;
  std::vector<std::string> label_set;
  std::vector<std::string> feature_names;
  std::vector<std::int64_t> rev_ids;
  LabeledDataset data;
};

DatasetFile read_dataset_file(const std::filesystem::path& file);
void write_dataset_file(const std::filesystem::path& file, const DatasetFile& dataset);

struct ExtractOptions {
  // Fraction of rows allowed to fail before the run fails.
  double failure_tolerance = 0.10;
  WorkerPool* pool = nullptr;
};

struct ExtractResult {
  DatasetFile dataset;
  std::size_t reused = 0;     // rows taken from an earlier output
  std::size_t extracted = 0;  // rows computed in this run
  std::vector<std::string> failures;  // "line N rev R: message"
  bool failed = false;                // tolerance exceeded
};

// Resumable: rows already present in `output` under the same feature set
// and context are kept, the rest are extracted. The output is rewritten in
// label-file order whether or not the run fails, so a partial run can be
// resumed. Rows are computed on `options.pool` when given.
ExtractResult extract(const LabelFile& labels, const FeatureSet& features,
                      const DatasourceClient& client, const std::filesystem::path& output,
                      const ExtractOptions& options = {});

// The -p/--label-weight/--pop-rate flag forms.
struct CvTrainFlags {
  std::string version = "0.1.0";
  std::vector<std::string> params;         // key=value, value read as JSON when it parses
  std::vector<std::string> label_weights;  // label=weight
  std::vector<std::string> pop_rates;      // label=rate
  bool center = false;
  bool scale = false;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

// Throws kInvalidFlag.
std::pair<std::string, nlohmann::json> parse_param_flag(const std::string& flag);
std::pair<std::string, double> parse_rate_flag(const std::string& flag, const char* what);

// Builds the estimator params; throws kInvalidFlag or kInvalidParams.
TrainingOptions training_options(EstimatorKind kind, const std::string& model_name,
                                 const std::string& context, const CvTrainFlags& flags,
                                 const std::vector<std::string>& label_set);

Model cv_train(const DatasetFile& dataset, const FeatureSet& features, EstimatorKind kind,
               const std::string& model_name, const CvTrainFlags& flags);

// Fitness of a trained model on a held-out dataset.
Statistics test_model(const Model& model, const DatasetFile& dataset);

// Declarative replacement for the model Makefile. Paths are relative to
// the manifest's directory.
//   {"fixtures": "fixtures", "datasets": "datasets", "models": "models",
//    "targets": [{"name": "damaging", "context": "enwiki",
//                 "labels": "...", "feature_set": "...",
//                 "estimator": "gradient_boosting", "params": {...},
//                 "version": "0.4.0", "pop_rates": {...},
//                 "label_weights": {...}, "center": true, "scale": true,
//                 "folds": 5, "seed": 1}]}
struct BuildTarget {
  std::string name;
  std::string context;
  std::filesystem::path labels;
  std::filesystem::path feature_set;
  EstimatorKind estimator = EstimatorKind::kGradientBoosting;
  nlohmann::json params = nlohmann::json::object();
  std::string version = "0.1.0";
  std::map<std::string, double> pop_rates;
  std::map<std::string, double> label_weights;
  bool center = false;
  bool scale = false;
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  double failure_tolerance = 0.10;

  std::string model_file_name() const;    // <context>.<name>.model
  std::string dataset_file_name() const;  // <context>.<name>.w_cache.jsonl
};

struct BuildManifest {
  std::filesystem::path base_dir;
  std::filesystem::path fixtures;
  std::filesystem::path datasets;
  std::filesystem::path models;
  std::vector<BuildTarget> targets;

  // Throws kManifestError for missing paths, bad versions and duplicates.
  void validate() const;
};

// Throws kManifestError.
BuildManifest load_manifest(const std::filesystem::path& file);
BuildManifest manifest_from_json(const nlohmann::json& doc,
                                 const std::filesystem::path& base_dir);

// Digest over everything a target's model depends on: label file bytes,
// feature set and lexicon bytes, fixture bytes and the target's settings.
std::string target_input_hash(const BuildManifest& manifest, const BuildTarget& target);

struct BuildOptions {
  // Rebuild everything regardless of stamps.
  bool force = false;
  // Override manifest output directories (absolute or relative to cwd).
  std::optional<std::filesystem::path> models_dir;
  std::optional<std::filesystem::path> datasets_dir;
  WorkerPool* pool = nullptr;
  std::ostream* log = nullptr;
};

struct BuildStep {
  std::string target;
  std::string version;
  bool rebuilt = false;
  std::size_t rows = 0;
  std::filesystem::path model;
  nlohmann::ordered_json statistics;
};

// Builds targets in manifest order. A target is up to date when its model
// file exists and the stamp beside it (<model>.inputs) records the current
// input hash. The first failing target aborts the build (kManifestError
// wrapping the cause, with the target name).
std::vector<BuildStep> build(const BuildManifest& manifest, const BuildOptions& options = {});

// Fixed-width summary table, one row per step.
std::string build_summary(const std::vector<BuildStep>& steps);

// Writes via a sibling temp file and rename.
void write_file_atomic(const std::filesystem::path& file, const std::string& contents);

}  // namespace scorehub
