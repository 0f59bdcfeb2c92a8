#include "scorehub/training.hpp"

#include "scorehub/error.hpp"

namespace scorehub {

std::vector<double> to_feature_vector(const std::vector<Value>& values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(to_real(v));
  return out;
}

LabeledDataset extract_dataset(
    const FeatureSet& features, const DatasourceClient& client,
    const std::string& context,
    const std::vector<std::pair<std::int64_t, std::string>>& labelled,
    const std::vector<std::string>& label_set, ExtractionReport* report) {
  auto graph = build_graph(features);
  auto names = features.feature_names();
  LabeledDataset data;
  data.label_set = label_set;
  data.feature_names = names;
  std::vector<double> flat;
  for (const auto& [rev_id, label] : labelled) {
    ExtractionContext ctx;
    ctx.context_id = context;
    ctx.revision_id = rev_id;
    ctx.datasource_client = &client;
    try {
      auto row = to_feature_vector(extract_many(*graph, ctx, names));
      flat.insert(flat.end(), row.begin(), row.end());
      data.labels.push_back(label);
    } catch (const Error& e) {
      if (!report) throw;
      ++report->failures;
      if (report->messages.size() < 10) {
        report->messages.push_back("revision " + std::to_string(rev_id) + ": " + e.what());
      }
    }
  }
  data.features.rows = data.labels.size();
  data.features.cols = names.size();
  data.features.data = std::move(flat);
  return data;
}

Model train_model(const LabeledDataset& data, const FeatureSet& features,
                  const TrainingOptions& options) {
  if (data.feature_names != features.feature_names()) {
    throw Error(ErrorCode::kInvalidParams,
                "dataset columns do not match feature set '" + features.name + "'");
  }
  auto cv = cross_validate(data, options.params, options.folds);
  std::vector<ScoredExample> examples;
  examples.reserve(cv.size());
  for (auto& p : cv) examples.push_back({std::move(p.probabilities), p.label});

  Model model;
  model.name = options.name;
  model.context = options.context;
  model.version = options.version;
  model.statistics = compute_statistics(examples, data.label_set);
  model.estimator = train(data, options.params);
  model.feature_set = features;
  model.environment = capture_environment();
  finalize(model);
  return model;
}

}  // namespace scorehub
