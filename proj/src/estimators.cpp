#include "scorehub/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace scorehub {

namespace {

using nlohmann::json;

Error invalid(const std::string& message) {
  return Error(ErrorCode::kInvalidParams, message);
}

double stable_log(double p) { return std::log(std::max(p, 1e-300)); }

// In-place softmax over raw scores.
void softmax(std::vector<double>& z) {
  double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> example_weights(const LabeledDataset& data,
                                    std::span<const std::size_t> labels,
                                    const EstimatorParams& params) {
  std::vector<double> per_class(data.label_set.size(), 1.0);
  for (std::size_t k = 0; k < data.label_set.size(); ++k) {
    if (auto it = params.label_weights.find(data.label_set[k]);
        it != params.label_weights.end()) {
      per_class[k] = it->second;
    }
  }
  std::vector<double> weights(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) weights[i] = per_class[labels[i]];
  return weights;
}

double number_param(const json& hp, const char* key, double fallback) {
  if (!hp.contains(key)) return fallback;
  const auto& v = hp.at(key);
  if (!v.is_number()) throw invalid(std::string(key) + " must be a number");
  return v.get<double>();
}

std::size_t count_param(const json& hp, const char* key, std::size_t fallback) {
  if (!hp.contains(key)) return fallback;
  const auto& v = hp.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
    throw invalid(std::string(key) + " must be a positive integer");
  }
  return v.get<std::size_t>();
}

const json& defaults_for(EstimatorKind kind) {
  static const json linear_defaults = {
      {"learning_rate", 0.1}, {"iterations", 500}, {"l2", 1e-3}};
  static const json boosting_defaults = {
      {"learning_rate", 0.1},     {"n_estimators", 100},   {"max_depth", 3},
      {"max_features", nullptr},  {"min_samples_leaf", 1}, {"max_bins", 255}};
  return kind == EstimatorKind::kLinearLogistic ? linear_defaults : boosting_defaults;
}

}  // namespace

// ---------------------------------------------------------------------------
// Datasets and scaling

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = row(indices[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

void LabeledDataset::validate() const {
  if (features.rows != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature matrix has " + std::to_string(features.rows) +
                    " rows but there are " + std::to_string(labels.size()) +
                    " labels");
  }
  if (features.cols != feature_names.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature matrix has " + std::to_string(features.cols) +
                    " columns but there are " +
                    std::to_string(feature_names.size()) + " feature names");
  }
  if (label_set.size() < 2) throw invalid("label_set needs at least two classes");
  std::set<std::string> distinct(label_set.begin(), label_set.end());
  if (distinct.size() != label_set.size()) throw invalid("label_set has duplicates");
  for (const auto& label : labels) {
    if (!distinct.count(label)) {
      throw Error(ErrorCode::kUnknownLabel,
                  "label '" + label + "' is not in the label set");
    }
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw invalid("feature matrix contains a non-finite value");
  }
}

std::vector<std::size_t> LabeledDataset::label_indices() const {
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    auto it = std::find(label_set.begin(), label_set.end(), label);
    if (it == label_set.end()) {
      throw Error(ErrorCode::kUnknownLabel,
                  "label '" + label + "' is not in the label set");
    }
    out.push_back(static_cast<std::size_t>(it - label_set.begin()));
  }
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.features = features.select_rows(indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels[i]);
  out.label_set = label_set;
  out.feature_names = feature_names;
  return out;
}

Scaler Scaler::fit(const Matrix& x, bool center, bool scale) {
  Scaler s;
  s.means.assign(x.cols, 0.0);
  s.stds.assign(x.cols, 1.0);
  if (x.rows == 0) return s;
  for (std::size_t j = 0; j < x.cols; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) mean += x(i, j);
    mean /= static_cast<double>(x.rows);
    double var = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    double sd = std::sqrt(var / static_cast<double>(x.rows));
    if (center) s.means[j] = mean;
    if (scale) s.stds[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

std::vector<double> Scaler::transform(std::span<const double> row) const {
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - means[j]) / stds[j];
  return out;
}

std::vector<double> Scaler::inverse_transform(std::span<const double> row) const {
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = row[j] * stds[j] + means[j];
  return out;
}

Matrix Scaler::transform(const Matrix& x) const {
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto t = transform(x.row(i));
    std::copy(t.begin(), t.end(), out.row(i).begin());
  }
  return out;
}

json Scaler::to_json() const { return {{"means", means}, {"stds", stds}}; }

Scaler Scaler::from_json(const json& doc) {
  Scaler s;
  s.means = doc.at("means").get<std::vector<double>>();
  s.stds = doc.at("stds").get<std::vector<double>>();
  if (s.means.size() != s.stds.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scaler means/stds differ in length");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parameters

std::string_view to_string(EstimatorKind kind) {
  return kind == EstimatorKind::kLinearLogistic ? "linear_logistic"
                                                : "gradient_boosting";
}

std::string_view type_name(EstimatorKind kind) {
  return kind == EstimatorKind::kLinearLogistic ? "LogisticRegression"
                                                : "GradientBoosting";
}

EstimatorKind parse_estimator_kind(std::string_view name) {
  if (name == "linear_logistic" || name == "LogisticRegression") {
    return EstimatorKind::kLinearLogistic;
  }
  if (name == "gradient_boosting" || name == "GradientBoosting") {
    return EstimatorKind::kGradientBoosting;
  }
  throw invalid("unknown estimator kind '" + std::string(name) + "'");
}

void EstimatorParams::validate(const std::vector<std::string>& label_set) const {
  if (!hyperparameters.is_object()) throw invalid("hyperparameters must be an object");
  const auto& allowed = defaults_for(kind);
  for (const auto& [key, value] : hyperparameters.items()) {
    if (!allowed.contains(key)) {
      throw invalid("unknown hyperparameter '" + key + "' for " +
                    std::string(to_string(kind)));
    }
  }
  double lr = number_param(hyperparameters, "learning_rate", 0.1);
  if (!(lr > 0.0) || !std::isfinite(lr)) throw invalid("learning_rate must be > 0");
  if (kind == EstimatorKind::kLinearLogistic) {
    count_param(hyperparameters, "iterations", 1);
    double l2 = number_param(hyperparameters, "l2", 0.0);
    if (!(l2 >= 0.0)) throw invalid("l2 must be >= 0");
  } else {
    count_param(hyperparameters, "n_estimators", 1);
    count_param(hyperparameters, "max_depth", 1);
    count_param(hyperparameters, "min_samples_leaf", 1);
    if (count_param(hyperparameters, "max_bins", 255) < 2) {
      throw invalid("max_bins must be >= 2");
    }
    if (hyperparameters.contains("max_features")) {
      const auto& mf = hyperparameters.at("max_features");
      bool ok = mf.is_null() ||
                (mf.is_string() && (mf == "log2" || mf == "sqrt" || mf == "all")) ||
                (mf.is_number_integer() && mf.get<std::int64_t>() >= 1) ||
                (mf.is_number_float() && mf.get<double>() > 0.0 &&
                 mf.get<double>() <= 1.0);
      if (!ok) throw invalid("max_features must be log2, sqrt, all, an integer or a fraction");
    }
  }
  std::set<std::string> labels(label_set.begin(), label_set.end());
  for (const auto& [label, weight] : label_weights) {
    if (!labels.count(label)) {
      throw Error(ErrorCode::kUnknownLabel,
                  "label weight for unknown label '" + label + "'");
    }
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw invalid("label weight for '" + label + "' must be > 0");
    }
  }
  if (population_rates) {
    double sum = 0.0;
    for (const auto& [label, rate] : *population_rates) {
      if (!labels.count(label)) {
        throw Error(ErrorCode::kUnknownLabel,
                    "population rate for unknown label '" + label + "'");
      }
      if (!(rate > 0.0)) {
        throw Error(ErrorCode::kZeroRate,
                    "population rate for '" + label + "' must be > 0");
      }
      if (rate > 1.0) throw invalid("population rate for '" + label + "' exceeds 1");
      sum += rate;
    }
    if (population_rates->size() != labels.size()) {
      throw invalid("population rates must cover every label");
    }
    if (std::abs(sum - 1.0) > 1e-9) throw invalid("population rates must sum to 1");
  }
}

json resolved_hyperparameters(const EstimatorParams& params) {
  json out = defaults_for(params.kind);
  for (const auto& [key, value] : params.hyperparameters.items()) out[key] = value;
  return out;
}

json EstimatorParams::to_json() const {
  json doc = json::object();
  doc["estimator"] = std::string(to_string(kind));
  doc["hyperparameters"] = hyperparameters;
  doc["label_weights"] = label_weights;
  doc["population_rates"] =
      population_rates ? json(*population_rates) : json(nullptr);
  doc["center"] = center;
  doc["scale"] = scale;
  doc["seed"] = seed;
  return doc;
}

EstimatorParams EstimatorParams::from_json(const json& doc) {
  EstimatorParams p;
  p.kind = parse_estimator_kind(doc.at("estimator").get<std::string>());
  p.hyperparameters = doc.value("hyperparameters", json::object());
  p.label_weights =
      doc.value("label_weights", std::map<std::string, double>{});
  if (doc.contains("population_rates") && !doc.at("population_rates").is_null()) {
    p.population_rates =
        doc.at("population_rates").get<std::map<std::string, double>>();
  }
  p.center = doc.value("center", false);
  p.scale = doc.value("scale", false);
  p.seed = doc.value("seed", std::uint64_t{0});
  return p;
}

// ---------------------------------------------------------------------------
// Recalibration

std::vector<double> recalibrate(std::span<const double> raw,
                                std::span<const double> sample_rates,
                                std::span<const double> population_rates) {
  if (raw.size() != sample_rates.size() || raw.size() != population_rates.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "recalibration inputs differ in length");
  }
  std::vector<double> out(raw.size());
  double total = 0.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (!(sample_rates[k] > 0.0) || !(population_rates[k] > 0.0)) {
      throw Error(ErrorCode::kZeroRate, "recalibration rates must be > 0");
    }
    out[k] = population_rates[k] / sample_rates[k] * raw[k];
    total += out[k];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "raw probabilities must sum to 1");
  }
  for (double& p : out) p /= total;
  return out;
}

std::map<std::string, double> recalibrate(
    const std::map<std::string, double>& raw,
    const std::map<std::string, double>& sample_rates,
    const std::map<std::string, double>& population_rates) {
  std::vector<double> r, s, p;
  for (const auto& [label, value] : raw) {
    auto sit = sample_rates.find(label);
    auto pit = population_rates.find(label);
    if (sit == sample_rates.end() || pit == population_rates.end()) {
      throw Error(ErrorCode::kZeroRate, "no rate given for '" + label + "'");
    }
    r.push_back(value);
    s.push_back(sit->second);
    p.push_back(pit->second);
  }
  auto adjusted = recalibrate(r, s, p);
  std::map<std::string, double> out;
  std::size_t k = 0;
  for (const auto& [label, value] : raw) out[label] = adjusted[k++];
  return out;
}

// ---------------------------------------------------------------------------
// Linear logistic

namespace linear {

namespace {

std::vector<double> logits(const Model& m, std::span<const double> x) {
  std::vector<double> z(m.classes);
  for (std::size_t k = 0; k < m.classes; ++k) {
    double acc = m.bias[k];
    const double* w = m.weights.data() + k * m.dims;
    for (std::size_t j = 0; j < m.dims; ++j) acc += w[j] * x[j];
    z[k] = acc;
  }
  return z;
}

double weight_sum(std::span<const double> w) {
  return std::accumulate(w.begin(), w.end(), 0.0);
}

}  // namespace

std::vector<double> Model::predict_proba(std::span<const double> x) const {
  auto z = logits(*this, x);
  softmax(z);
  return z;
}

double loss(const Model& model, const Matrix& x,
            std::span<const std::size_t> labels,
            std::span<const double> sample_weights, double l2) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto z = logits(model, x.row(i));
    double top = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - top);
    lse = top + std::log(lse);
    total += sample_weights[i] * (lse - z[labels[i]]);
  }
  double penalty = 0.0;
  for (double w : model.weights) penalty += w * w;
  return total / weight_sum(sample_weights) + 0.5 * l2 * penalty;
}

Model gradient(const Model& model, const Matrix& x,
               std::span<const std::size_t> labels,
               std::span<const double> sample_weights, double l2) {
  Model g;
  g.classes = model.classes;
  g.dims = model.dims;
  g.weights.assign(model.weights.size(), 0.0);
  g.bias.assign(model.bias.size(), 0.0);
  double norm = weight_sum(sample_weights);
  for (std::size_t i = 0; i < x.rows; ++i) {
    auto p = model.predict_proba(x.row(i));
    auto row = x.row(i);
    for (std::size_t k = 0; k < model.classes; ++k) {
      double r = sample_weights[i] * (p[k] - (labels[i] == k ? 1.0 : 0.0)) / norm;
      g.bias[k] += r;
      double* gw = g.weights.data() + k * model.dims;
      for (std::size_t j = 0; j < model.dims; ++j) gw[j] += r * row[j];
    }
  }
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    g.weights[i] += l2 * model.weights[i];
  }
  return g;
}

Model fit(const Matrix& x, std::span<const std::size_t> labels,
          std::span<const double> sample_weights, std::size_t classes,
          const json& hp) {
  double lr = hp.at("learning_rate").get<double>();
  std::size_t iterations = hp.at("iterations").get<std::size_t>();
  double l2 = hp.at("l2").get<double>();
  Model m;
  m.classes = classes;
  m.dims = x.cols;
  m.weights.assign(classes * x.cols, 0.0);
  m.bias.assign(classes, 0.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    auto g = gradient(m, x, labels, sample_weights, l2);
    for (std::size_t i = 0; i < m.weights.size(); ++i) m.weights[i] -= lr * g.weights[i];
    for (std::size_t k = 0; k < classes; ++k) m.bias[k] -= lr * g.bias[k];
  }
  double final_loss = loss(m, x, labels, sample_weights, l2);
  bool finite = std::isfinite(final_loss);
  for (double w : m.weights) finite = finite && std::isfinite(w);
  if (!finite) {
    throw Error(ErrorCode::kNonFiniteLoss,
                "linear training diverged; try a smaller learning_rate or --scale");
  }
  return m;
}

}  // namespace linear

// ---------------------------------------------------------------------------
// Gradient boosting

namespace boosting {

double Tree::predict(std::span<const double> x) const {
  int at = 0;
  while (nodes[at].feature >= 0) {
    const Node& n = nodes[at];
    at = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[at].value;
}

std::vector<double> Model::raw_scores(std::span<const double> x) const {
  std::vector<double> f = init;
  for (const auto& stage : trees) {
    for (std::size_t k = 0; k < stage.size(); ++k) {
      f[k] += learning_rate * stage[k].predict(x);
    }
  }
  return f;
}

std::vector<double> Model::predict_proba(std::span<const double> x) const {
  auto f = raw_scores(x);
  if (classes == 2) {
    double p = sigmoid(f[0]);
    return {p, 1.0 - p};
  }
  softmax(f);
  return f;
}

namespace {

// Quantile bin edges per feature; bin(x) = number of edges strictly below x,
// so bin b covers (edge[b-1], edge[b]] and a split at b is "x <= edge[b]".
struct Binned {
  std::vector<std::vector<double>> edges;
  std::vector<std::vector<std::uint8_t>> bins;  // [feature][row]
};

Binned bin_features(const Matrix& x, std::size_t max_bins) {
  Binned out;
  out.edges.resize(x.cols);
  out.bins.assign(x.cols, std::vector<std::uint8_t>(x.rows));
  std::vector<double> column(x.rows);
  for (std::size_t j = 0; j < x.cols; ++j) {
    for (std::size_t i = 0; i < x.rows; ++i) column[i] = x(i, j);
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> distinct;
    std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(distinct));
    auto& edges = out.edges[j];
    if (distinct.size() <= max_bins) {
      for (std::size_t u = 0; u + 1 < distinct.size(); ++u) {
        edges.push_back(0.5 * (distinct[u] + distinct[u + 1]));
      }
    } else {
      for (std::size_t b = 1; b < max_bins; ++b) {
        std::size_t pos = b * sorted.size() / max_bins;
        double lo = sorted[pos - 1];
        double hi = sorted[pos];
        double edge = lo == hi ? lo : 0.5 * (lo + hi);
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
      }
    }
    for (std::size_t i = 0; i < x.rows; ++i) {
      out.bins[j][i] = static_cast<std::uint8_t>(
          std::lower_bound(edges.begin(), edges.end(), column[i]) - edges.begin());
    }
  }
  return out;
}

std::size_t features_per_split(const json& spec, std::size_t d) {
  if (spec.is_null()) return d;
  if (spec.is_string()) {
    if (spec == "log2") {
      return std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(d)))));
    }
    if (spec == "sqrt") {
      return std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
    }
    return d;
  }
  if (spec.is_number_integer()) return std::min(d, spec.get<std::size_t>());
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(spec.get<double>() * d)));
}

struct TreeBuilder {
  const Binned& binned;
  const Matrix& x;
  std::span<const double> residual;
  std::span<const double> hessian;
  std::span<const double> weight;
  std::size_t max_depth;
  std::size_t min_leaf;
  std::size_t max_features;
  double leaf_scale;  // (K - 1) / K for multiclass, 1 for binary
  std::mt19937_64& rng;
  std::vector<std::size_t> feature_order;
  Tree tree;

  double leaf_value(const std::vector<std::size_t>& rows) const {
    double num = 0.0;
    double den = 0.0;
    for (auto i : rows) {
      num += weight[i] * residual[i];
      den += weight[i] * hessian[i];
    }
    if (std::abs(den) < 1e-150) return 0.0;
    return leaf_scale * num / den;
  }

  std::vector<std::size_t> sample_features() {
    std::size_t d = feature_order.size();
    for (std::size_t i = 0; i < max_features && i + 1 < d; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, d - 1);
      std::swap(feature_order[i], feature_order[pick(rng)]);
    }
    std::vector<std::size_t> chosen(feature_order.begin(),
                                    feature_order.begin() + max_features);
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  int build(std::vector<std::size_t> rows, std::size_t depth) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (depth >= max_depth || rows.size() < 2 * min_leaf) {
      tree.nodes[id].value = leaf_value(rows);
      return id;
    }
    double total_wr = 0.0;
    double total_w = 0.0;
    for (auto i : rows) {
      total_wr += weight[i] * residual[i];
      total_w += weight[i];
    }
    double parent_score = total_w > 0.0 ? total_wr * total_wr / total_w : 0.0;
    double best_gain = 1e-12;
    int best_feature = -1;
    std::size_t best_bin = 0;
    std::vector<double> hist_wr, hist_w;
    std::vector<std::size_t> hist_n;
    for (std::size_t j : sample_features()) {
      std::size_t nbins = binned.edges[j].size() + 1;
      if (nbins < 2) continue;
      hist_wr.assign(nbins, 0.0);
      hist_w.assign(nbins, 0.0);
      hist_n.assign(nbins, 0);
      for (auto i : rows) {
        auto b = binned.bins[j][i];
        hist_wr[b] += weight[i] * residual[i];
        hist_w[b] += weight[i];
        ++hist_n[b];
      }
      double left_wr = 0.0, left_w = 0.0;
      std::size_t left_n = 0;
      for (std::size_t b = 0; b + 1 < nbins; ++b) {
        left_wr += hist_wr[b];
        left_w += hist_w[b];
        left_n += hist_n[b];
        std::size_t right_n = rows.size() - left_n;
        if (left_n < min_leaf || right_n < min_leaf) continue;
        double right_wr = total_wr - left_wr;
        double right_w = total_w - left_w;
        if (left_w <= 0.0 || right_w <= 0.0) continue;
        double gain = left_wr * left_wr / left_w + right_wr * right_wr / right_w -
                      parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) {
      tree.nodes[id].value = leaf_value(rows);
      return id;
    }
    std::vector<std::size_t> left, right;
    for (auto i : rows) {
      (binned.bins[best_feature][i] <= best_bin ? left : right).push_back(i);
    }
    rows.clear();
    rows.shrink_to_fit();
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = binned.edges[best_feature][best_bin];
    int l = build(std::move(left), depth + 1);
    int r = build(std::move(right), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

double deviance(const std::vector<std::vector<double>>& f,
                std::span<const std::size_t> labels,
                std::span<const double> weights, std::size_t classes) {
  double total = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double p;
    if (classes == 2) {
      double p0 = sigmoid(f[i][0]);
      p = labels[i] == 0 ? p0 : 1.0 - p0;
    } else {
      auto z = f[i];
      softmax(z);
      p = z[labels[i]];
    }
    total += -weights[i] * stable_log(p);
    norm += weights[i];
  }
  return total / norm;
}

}  // namespace

Model fit(const Matrix& x, std::span<const std::size_t> labels,
          std::span<const double> weights, std::size_t classes, const json& hp,
          std::uint64_t seed) {
  Model m;
  m.classes = classes;
  m.learning_rate = hp.at("learning_rate").get<double>();
  std::size_t n_estimators = hp.at("n_estimators").get<std::size_t>();
  std::size_t max_depth = hp.at("max_depth").get<std::size_t>();
  std::size_t min_leaf = hp.at("min_samples_leaf").get<std::size_t>();
  std::size_t max_bins = std::min<std::size_t>(hp.at("max_bins").get<std::size_t>(), 255);
  std::size_t max_features =
      features_per_split(hp.at("max_features"), x.cols);

  std::size_t n = x.rows;
  std::size_t outputs = classes == 2 ? 1 : classes;
  std::vector<double> class_weight(classes, 0.0);
  double total_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    class_weight[labels[i]] += weights[i];
    total_weight += weights[i];
  }
  if (classes == 2) {
    m.init = {std::log(class_weight[0] / class_weight[1])};
  } else {
    m.init.resize(classes);
    for (std::size_t k = 0; k < classes; ++k) {
      m.init[k] = std::log(class_weight[k] / total_weight);
    }
  }

  Binned binned = bin_features(x, max_bins);
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> f(n, m.init);
  std::vector<double> residual(n), hessian(n);
  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<std::size_t> feature_order(x.cols);
  std::iota(feature_order.begin(), feature_order.end(), 0);

  for (std::size_t stage = 0; stage < n_estimators; ++stage) {
    std::vector<std::vector<double>> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (classes == 2) {
        probs[i] = {sigmoid(f[i][0])};
      } else {
        probs[i] = f[i];
        softmax(probs[i]);
      }
    }
    std::vector<Tree> stage_trees;
    for (std::size_t k = 0; k < outputs; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        double y = labels[i] == k ? 1.0 : 0.0;
        double p = probs[i][k];
        residual[i] = y - p;
        double r = std::abs(residual[i]);
        hessian[i] = classes == 2 ? p * (1.0 - p) : r * (1.0 - r);
      }
      TreeBuilder builder{binned,
                          x,
                          residual,
                          hessian,
                          weights,
                          max_depth,
                          min_leaf,
                          std::min(max_features, x.cols),
                          classes == 2 ? 1.0
                                       : static_cast<double>(classes - 1) / classes,
                          rng,
                          feature_order,
                          {}};
      builder.build(all_rows, 0);
      feature_order = builder.feature_order;
      stage_trees.push_back(std::move(builder.tree));
      for (std::size_t i = 0; i < n; ++i) {
        f[i][k] += m.learning_rate * stage_trees.back().predict(x.row(i));
      }
    }
    m.trees.push_back(std::move(stage_trees));
    double dev = deviance(f, labels, weights, classes);
    if (!std::isfinite(dev)) {
      throw Error(ErrorCode::kNonFiniteLoss,
                  "boosting diverged; try a smaller learning_rate");
    }
    m.training_loss.push_back(dev);
  }
  return m;
}

}  // namespace boosting

// ---------------------------------------------------------------------------
// Estimator

namespace {

json tree_to_json(const boosting::Tree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    if (n.feature < 0) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right}});
    }
  }
  return nodes;
}

boosting::Tree tree_from_json(const json& doc, std::size_t dims) {
  boosting::Tree tree;
  for (const auto& n : doc) {
    boosting::Node node;
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    } else {
      node.value = n.at("value").get<double>();
    }
    tree.nodes.push_back(node);
  }
  const int size = static_cast<int>(tree.nodes.size());
  if (size == 0) throw Error(ErrorCode::kCorruptModelFile, "empty tree");
  for (int i = 0; i < size; ++i) {
    const auto& n = tree.nodes[i];
    if (n.feature < 0) continue;
    if (n.feature >= static_cast<int>(dims) || n.left <= i || n.right <= i ||
        n.left >= size || n.right >= size) {
      throw Error(ErrorCode::kCorruptModelFile, "malformed tree node");
    }
  }
  return tree;
}

}  // namespace

const std::vector<double>& Estimator::training_loss() const {
  static const std::vector<double> none;
  if (auto* b = std::get_if<boosting::Model>(&model_)) return b->training_loss;
  return none;
}

std::vector<double> Estimator::predict_proba(std::span<const double> features) const {
  if (features.size() != dimension()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(dimension()) + " features, got " +
                    std::to_string(features.size()));
  }
  std::vector<double> x(features.begin(), features.end());
  if (scaler_) x = scaler_->transform(x);
  std::vector<double> p = std::visit(
      [&](const auto& m) { return m.predict_proba(x); }, model_);
  if (params_.population_rates) {
    std::vector<double> pop;
    for (const auto& label : label_set_) pop.push_back(params_.population_rates->at(label));
    p = recalibrate(p, sample_rates_, pop);
  }
  return p;
}

std::map<std::string, double> Estimator::predict_proba_map(
    std::span<const double> features) const {
  auto p = predict_proba(features);
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < label_set_.size(); ++k) out[label_set_[k]] = p[k];
  return out;
}

json Estimator::to_json() const {
  json doc = json::object();
  doc["params"] = params_.to_json();
  doc["label_set"] = label_set_;
  doc["feature_names"] = feature_names_;
  doc["scaler"] = scaler_ ? scaler_->to_json() : json(nullptr);
  doc["sample_rates"] = sample_rates_;
  if (auto* lin = std::get_if<linear::Model>(&model_)) {
    doc["linear"] = {{"weights", lin->weights}, {"bias", lin->bias}};
  } else {
    const auto& b = std::get<boosting::Model>(model_);
    json stages = json::array();
    for (const auto& stage : b.trees) {
      json trees = json::array();
      for (const auto& tree : stage) trees.push_back(tree_to_json(tree));
      stages.push_back(std::move(trees));
    }
    doc["boosting"] = {{"init", b.init},
                       {"learning_rate", b.learning_rate},
                       {"training_loss", b.training_loss},
                       {"stages", std::move(stages)}};
  }
  return doc;
}

Estimator Estimator::from_json(const json& doc) {
  Estimator est;
  est.params_ = EstimatorParams::from_json(doc.at("params"));
  est.label_set_ = doc.at("label_set").get<std::vector<std::string>>();
  est.feature_names_ = doc.at("feature_names").get<std::vector<std::string>>();
  if (!doc.at("scaler").is_null()) est.scaler_ = Scaler::from_json(doc.at("scaler"));
  est.sample_rates_ = doc.at("sample_rates").get<std::vector<double>>();
  std::size_t classes = est.label_set_.size();
  std::size_t dims = est.feature_names_.size();
  if (classes < 2 || est.sample_rates_.size() != classes ||
      (est.scaler_ && est.scaler_->means.size() != dims)) {
    throw Error(ErrorCode::kCorruptModelFile, "estimator dimensions disagree");
  }
  est.params_.validate(est.label_set_);
  if (est.params_.kind == EstimatorKind::kLinearLogistic) {
    linear::Model m;
    m.classes = classes;
    m.dims = dims;
    m.weights = doc.at("linear").at("weights").get<std::vector<double>>();
    m.bias = doc.at("linear").at("bias").get<std::vector<double>>();
    if (m.weights.size() != classes * dims || m.bias.size() != classes) {
      throw Error(ErrorCode::kCorruptModelFile, "linear weights have the wrong shape");
    }
    est.model_ = std::move(m);
  } else {
    const auto& b = doc.at("boosting");
    boosting::Model m;
    m.classes = classes;
    m.init = b.at("init").get<std::vector<double>>();
    m.learning_rate = b.at("learning_rate").get<double>();
    m.training_loss = b.at("training_loss").get<std::vector<double>>();
    std::size_t outputs = classes == 2 ? 1 : classes;
    if (m.init.size() != outputs) {
      throw Error(ErrorCode::kCorruptModelFile, "boosting init has the wrong shape");
    }
    for (const auto& stage : b.at("stages")) {
      if (stage.size() != outputs) {
        throw Error(ErrorCode::kCorruptModelFile, "boosting stage has the wrong shape");
      }
      std::vector<boosting::Tree> trees;
      for (const auto& tree : stage) trees.push_back(tree_from_json(tree, dims));
      m.trees.push_back(std::move(trees));
    }
    est.model_ = std::move(m);
  }
  return est;
}

Estimator train(const LabeledDataset& data, const EstimatorParams& params) {
  data.validate();
  params.validate(data.label_set);
  if (data.size() < 2) {
    throw Error(ErrorCode::kDegenerateData, "training needs at least two examples");
  }
  auto labels = data.label_indices();
  std::size_t classes = data.label_set.size();
  std::vector<std::size_t> counts(classes, 0);
  for (auto k : labels) ++counts[k];
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] == 0) {
      throw Error(ErrorCode::kDegenerateData,
                  "class '" + data.label_set[k] + "' has no training examples");
    }
  }

  Estimator est;
  est.params_ = params;
  est.label_set_ = data.label_set;
  est.feature_names_ = data.feature_names;
  for (auto c : counts) {
    est.sample_rates_.push_back(static_cast<double>(c) / static_cast<double>(data.size()));
  }
  const Matrix* x = &data.features;
  Matrix scaled;
  if (params.center || params.scale) {
    est.scaler_ = Scaler::fit(data.features, params.center, params.scale);
    scaled = est.scaler_->transform(data.features);
    x = &scaled;
  }
  auto weights = example_weights(data, labels, params);
  if (params.kind == EstimatorKind::kLinearLogistic) {
    est.model_ = linear::fit(*x, labels, weights, classes,
                             resolved_hyperparameters(params));
  } else {
    est.model_ = boosting::fit(*x, labels, weights, classes,
                               resolved_hyperparameters(params), params.seed);
  }
  return est;
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels,
                                          std::size_t classes,
                                          std::size_t folds,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> assignment(labels.size());
  std::size_t offset = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      assignment[members[j]] = (offset + j) % folds;
    }
    offset += members.size();
  }
  return assignment;
}

std::vector<CvPrediction> cross_validate(const LabeledDataset& data,
                                         const EstimatorParams& params,
                                         std::size_t folds) {
  if (folds < 2) throw invalid("cross-validation needs at least 2 folds");
  data.validate();
  params.validate(data.label_set);
  auto labels = data.label_indices();
  std::size_t classes = data.label_set.size();
  std::vector<std::size_t> counts(classes, 0);
  for (auto k : labels) ++counts[k];
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] == 0) {
      throw Error(ErrorCode::kDegenerateData,
                  "class '" + data.label_set[k] + "' has no examples");
    }
    if (counts[k] < folds) {
      throw Error(ErrorCode::kTooFewExamplesPerClass,
                  "class '" + data.label_set[k] + "' has " +
                      std::to_string(counts[k]) + " examples, fewer than " +
                      std::to_string(folds) + " folds");
    }
  }
  auto assignment = stratified_folds(labels, classes, folds, params.seed);
  std::vector<CvPrediction> out(data.size());
  for (std::size_t fold = 0; fold < folds; ++fold) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (assignment[i] == fold ? test_rows : train_rows).push_back(i);
    }
    EstimatorParams fold_params = params;
    fold_params.seed = params.seed + fold + 1;
    Estimator est = train(data.subset(train_rows), fold_params);
    for (auto i : test_rows) {
      out[i] = {est.predict_proba(data.features.row(i)), labels[i]};
    }
  }
  return out;
}

}  // namespace scorehub
