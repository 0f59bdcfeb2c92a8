#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/error.hpp"

namespace scorehub {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }

  Matrix select_rows(std::span<const std::size_t> indices) const;
};

struct LabeledDataset {
  Matrix features;
  std::vector<std::string> labels;
  std::vector<std::string> label_set;
  std::vector<std::string> feature_names;

  std::size_t size() const { return labels.size(); }
  // Throws kInvalidParams / kUnknownLabel / kDimensionMismatch.
  void validate() const;
  // Label indices into label_set.
  std::vector<std::size_t> label_indices() const;
  LabeledDataset subset(std::span<const std::size_t> indices) const;
};

// Column standardization. Population std (divide by n); a zero std is
// stored as 1 so constant columns pass through centered.
struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;

  static Scaler fit(const Matrix& x, bool center, bool scale);
  std::vector<double> transform(std::span<const double> row) const;
  std::vector<double> inverse_transform(std::span<const double> row) const;
  Matrix transform(const Matrix& x) const;

  nlohmann::json to_json() const;
  static Scaler from_json(const nlohmann::json& doc);
};

enum class EstimatorKind { kLinearLogistic, kGradientBoosting };

std::string_view to_string(EstimatorKind kind);
// Accepts "linear_logistic" / "gradient_boosting" and the model-info type
// names "LogisticRegression" / "GradientBoosting".
EstimatorKind parse_estimator_kind(std::string_view name);
// Model-info type name, e.g. "GradientBoosting".
std::string_view type_name(EstimatorKind kind);

struct EstimatorParams {
  EstimatorKind kind = EstimatorKind::kGradientBoosting;
  // learning_rate, n_estimators, max_depth, max_features, min_samples_leaf,
  // max_bins (boosting); learning_rate, iterations, l2 (linear).
  nlohmann::json hyperparameters = nlohmann::json::object();
  std::map<std::string, double> label_weights;
  std::optional<std::map<std::string, double>> population_rates;
  bool center = false;
  bool scale = false;
  std::uint64_t seed = 0;

  // Throws kInvalidParams. population_rates must cover label_set exactly and
  // sum to 1 within 1e-9.
  void validate(const std::vector<std::string>& label_set) const;
  nlohmann::json to_json() const;
  static EstimatorParams from_json(const nlohmann::json& doc);
};

// Hyperparameters with defaults filled in for every key the kind accepts.
nlohmann::json resolved_hyperparameters(const EstimatorParams& params);

// p'_c proportional to (population_c / sample_c) * raw_c, renormalized.
// All maps are in label order. Throws kZeroRate for any rate <= 0.
std::vector<double> recalibrate(std::span<const double> raw,
                                std::span<const double> sample_rates,
                                std::span<const double> population_rates);
std::map<std::string, double> recalibrate(
    const std::map<std::string, double>& raw,
    const std::map<std::string, double>& sample_rates,
    const std::map<std::string, double>& population_rates);

namespace linear {

// Multinomial logistic regression; weights are K x d row-major.
struct Model {
  std::size_t classes = 0;
  std::size_t dims = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::vector<double> predict_proba(std::span<const double> x) const;
};

// Weighted mean cross-entropy plus (l2 / 2) * |weights|^2; the bias is not
// penalized. Exposed for gradient checking.
double loss(const Model& model, const Matrix& x,
            std::span<const std::size_t> labels,
            std::span<const double> sample_weights, double l2);
// Gradient of loss() with the same layout as the model.
Model gradient(const Model& model, const Matrix& x,
               std::span<const std::size_t> labels,
               std::span<const double> sample_weights, double l2);

}  // namespace linear

namespace boosting {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Tree {
  std::vector<Node> nodes;
  double predict(std::span<const double> x) const;
};

// Binary problems use one output (log-odds of label_set[0]); K > 2 classes
// use K softmax outputs. trees[m][k] is iteration m, output k.
struct Model {
  std::size_t classes = 0;
  std::vector<double> init;
  double learning_rate = 0.1;
  std::vector<std::vector<Tree>> trees;
  // Weighted mean deviance after each iteration on the training data.
  std::vector<double> training_loss;

  std::vector<double> raw_scores(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;
};

}  // namespace boosting

class Estimator {
 public:
  EstimatorKind kind() const { return params_.kind; }
  const EstimatorParams& params() const { return params_; }
  const std::vector<std::string>& label_set() const { return label_set_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t dimension() const { return feature_names_.size(); }
  const std::optional<Scaler>& scaler() const { return scaler_; }
  // Class frequencies of the training data, in label order.
  const std::vector<double>& sample_rates() const { return sample_rates_; }
  const std::vector<double>& training_loss() const;

  // Probabilities in label order, recalibrated when population rates are
  // configured. Throws kDimensionMismatch.
  std::vector<double> predict_proba(std::span<const double> features) const;
  std::map<std::string, double> predict_proba_map(
      std::span<const double> features) const;

  nlohmann::json to_json() const;
  static Estimator from_json(const nlohmann::json& doc);

  friend Estimator train(const LabeledDataset& data,
                         const EstimatorParams& params);

 private:
  EstimatorParams params_;
  std::vector<std::string> label_set_;
  std::vector<std::string> feature_names_;
  std::optional<Scaler> scaler_;
  std::vector<double> sample_rates_;
  std::variant<linear::Model, boosting::Model> model_;
};

// Deterministic given params.seed. Throws kDegenerateData when fewer than
// two rows or any label_set class is absent, kNonFiniteLoss on divergence.
Estimator train(const LabeledDataset& data, const EstimatorParams& params);

struct CvPrediction {
  std::vector<double> probabilities;  // label order
  std::size_t label = 0;              // index into label_set
};

// Stratified k-fold. Every example is scored exactly once by a model that
// did not see it. Throws kInvalidParams (folds < 2), kDegenerateData,
// kTooFewExamplesPerClass.
std::vector<CvPrediction> cross_validate(const LabeledDataset& data,
                                         const EstimatorParams& params,
                                         std::size_t folds);

// Fold assignment used by cross_validate; exposed for testing.
std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels,
                                          std::size_t classes,
                                          std::size_t folds,
                                          std::uint64_t seed);

}  // namespace scorehub
