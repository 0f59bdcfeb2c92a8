#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "scorehub/datasources.hpp"
#include "scorehub/model_store.hpp"

namespace scorehub {

struct TrainingOptions {
  std::string name;
  std::string context;
  std::string version = "0.1.0";
  EstimatorParams params;
  std::size_t folds = 10;
};

// Numeric feature vector; booleans become 0/1.
std::vector<double> to_feature_vector(const std::vector<Value>& values);

struct ExtractionReport {
  std::size_t failures = 0;
  std::vector<std::string> messages;  // first few failures
};

// Extracts every listed revision through the feature set's graph. Rows that
// fail are skipped and counted in the report.
LabeledDataset extract_dataset(
    const FeatureSet& features, const DatasourceClient& client,
    const std::string& context,
    const std::vector<std::pair<std::int64_t, std::string>>& labelled,
    const std::vector<std::string>& label_set, ExtractionReport* report = nullptr);

// Cross-validates to produce fitness statistics (on recalibrated scores when
// population rates are set), then fits the shipped estimator on all rows.
// The dataset's feature names must match the feature set.
Model train_model(const LabeledDataset& data, const FeatureSet& features,
                  const TrainingOptions& options);

}  // namespace scorehub
