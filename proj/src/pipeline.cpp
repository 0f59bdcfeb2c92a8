#include "scorehub/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "scorehub/hashing.hpp"
#include "scorehub/worker_pool.hpp"

namespace scorehub {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_all(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + file.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json parse_line(const std::string& line, std::size_t number, ErrorCode code) {
  try {
    auto doc = json::parse(line);
    if (!doc.is_object()) throw Error(code, "line " + std::to_string(number) + ": not an object");
    return doc;
  } catch (const json::exception& e) {
    throw Error(code, "line " + std::to_string(number) + ": " + e.what());
  }
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::string feature_set_digest(const FeatureSet& features) {
  return sha256_hex(to_json(features, true).dump());
}

std::string fixtures_digest(const fs::path& root) {
  std::vector<fs::path> files;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".ndjson" || ext == ".jsonl")) {
        files.push_back(entry.path());
      }
    }
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) {
    acc += fs::relative(f, root).generic_string() + " " + sha256_file(f) + "\n";
  }
  return sha256_hex(acc);
}

}  // namespace

void write_file_atomic(const fs::path& file, const std::string& contents) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  fs::rename(tmp, file);
}

std::string_view to_string(LabelSource source) {
  return source == LabelSource::kManualCampaign ? "manual_campaign" : "trace_extraction";
}

LabelSource parse_label_source(std::string_view name) {
  if (name == "manual_campaign") return LabelSource::kManualCampaign;
  if (name == "trace_extraction") return LabelSource::kTraceExtraction;
  throw Error(ErrorCode::kMalformedLabelRecord, "unknown label source '" + std::string(name) + "'");
}

void LabelFile::validate() const {
  std::set<std::string> allowed(label_set.begin(), label_set.end());
  std::unordered_map<std::int64_t, std::size_t> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!allowed.count(r.label)) {
      throw Error(ErrorCode::kUnknownLabel, "revision " + std::to_string(r.rev_id) +
                                                " has label '" + r.label +
                                                "' outside the label set");
    }
    auto [it, inserted] = seen.emplace(r.rev_id, i);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateRevision,
                  "revision " + std::to_string(r.rev_id) + " at record " +
                      std::to_string(i + 1) + " duplicates record " +
                      std::to_string(it->second + 1));
    }
  }
}

std::vector<std::pair<std::int64_t, std::string>> LabelFile::labelled() const {
  std::vector<std::pair<std::int64_t, std::string>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.emplace_back(r.rev_id, r.label);
  return out;
}

LabelFile read_label_file(std::istream& in) {
  LabelFile file;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  std::set<std::string> allowed;
  std::unordered_map<std::int64_t, std::size_t> line_of;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    auto doc = parse_line(line, number, ErrorCode::kMalformedLabelRecord);
    auto where = "line " + std::to_string(number) + ": ";
    try {
      if (!have_header) {
        file.campaign_id = doc.at("campaign_id").get<std::string>();
        file.label_set = doc.at("label_set").get<std::vector<std::string>>();
        file.source = parse_label_source(doc.at("source").get<std::string>());
        if (file.label_set.empty()) {
          throw Error(ErrorCode::kMalformedLabelRecord, where + "empty label_set");
        }
        allowed.insert(file.label_set.begin(), file.label_set.end());
        have_header = true;
        continue;
      }
      LabelRecord record;
      record.rev_id = doc.at("rev_id").get<std::int64_t>();
      record.label = label_from_json(doc.at("label"));
      record.context = doc.at("context").get<std::string>();
      if (!allowed.count(record.label)) {
        throw Error(ErrorCode::kUnknownLabel,
                    where + "label '" + record.label + "' is not in the label set");
      }
      auto [it, inserted] = line_of.emplace(record.rev_id, number);
      if (!inserted) {
        throw Error(ErrorCode::kDuplicateRevision,
                    "revision " + std::to_string(record.rev_id) + " appears on line " +
                        std::to_string(it->second) + " and line " + std::to_string(number));
      }
      file.records.push_back(std::move(record));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedLabelRecord, where + e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::kMalformedLabelRecord, "missing header line");
  return file;
}

LabelFile read_label_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + file.string());
  return read_label_file(in);
}

void write_label_file(std::ostream& out, const LabelFile& labels) {
  json header = {{"campaign_id", labels.campaign_id},
                 {"label_set", labels.label_set},
                 {"source", to_string(labels.source)}};
  out << header.dump() << '\n';
  for (const auto& r : labels.records) {
    json row = {{"rev_id", r.rev_id}, {"label", r.label}, {"context", r.context}};
    out << row.dump() << '\n';
  }
}

void write_label_file(const fs::path& file, const LabelFile& labels) {
  std::ostringstream out;
  write_label_file(out, labels);
  write_file_atomic(file, out.str());
}

TraceConversion labels_from_trace(std::istream& events, const std::string& campaign_id,
                                  const std::vector<std::string>& label_set) {
  TraceConversion result;
  result.labels.campaign_id = campaign_id;
  result.labels.label_set = label_set;
  result.labels.source = LabelSource::kTraceExtraction;
  std::set<std::string> allowed(label_set.begin(), label_set.end());

  struct Latest {
    std::int64_t timestamp;
    std::size_t order;
    LabelRecord record;
  };
  std::map<std::int64_t, Latest> latest;
  std::string line;
  std::size_t number = 0;
  while (std::getline(events, line)) {
    ++number;
    if (blank(line)) continue;
    auto doc = parse_line(line, number, ErrorCode::kMalformedLabelRecord);
    ++result.events;
    try {
      LabelRecord record{doc.at("rev_id").get<std::int64_t>(),
                         doc.at("assessment").get<std::string>(),
                         doc.at("context").get<std::string>()};
      auto ts = doc.value("timestamp", std::int64_t{0});
      if (!allowed.count(record.label)) {
        ++result.skipped;
        continue;
      }
      auto it = latest.find(record.rev_id);
      if (it == latest.end()) {
        latest.emplace(record.rev_id, Latest{ts, number, std::move(record)});
      } else if (ts >= it->second.timestamp) {
        it->second.timestamp = ts;
        it->second.record = std::move(record);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kMalformedLabelRecord,
                  "line " + std::to_string(number) + ": " + e.what());
    }
  }
  // First-seen order keeps the output stable.
  std::vector<const Latest*> ordered;
  for (const auto& [id, l] : latest) ordered.push_back(&l);
  std::sort(ordered.begin(), ordered.end(),
            [](const Latest* a, const Latest* b) { return a->order < b->order; });
  for (const auto* l : ordered) result.labels.records.push_back(l->record);
  return result;
}

fs::path resolve_source(const std::string& source) {
  if (source == "-") return source;
  constexpr std::string_view kFile = "file://";
  if (source.rfind(kFile, 0) == 0) return source.substr(kFile.size());
  if (source.find("://") != std::string::npos) {
    throw Error(ErrorCode::kIoError, "only local sources are supported: " + source);
  }
  return source;
}

DatasetFile read_dataset_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + file.string());
  DatasetFile out;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  std::vector<double> flat;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    auto doc = parse_line(line, number, ErrorCode::kIoError);
    try {
      if (!have_header) {
        out.feature_set = doc.at("feature_set").get<std::string>();
        out.context = doc.at("context").get<std::string>();
        out.label_set = doc.at("label_set").get<std::vector<std::string>>();
        out.feature_names = doc.at("features").get<std::vector<std::string>>();
        have_header = true;
        continue;
      }
      auto values = doc.at("values").get<std::vector<double>>();
      if (values.size() != out.feature_names.size()) {
        throw Error(ErrorCode::kDimensionMismatch,
                    file.string() + ":" + std::to_string(number) + ": expected " +
                        std::to_string(out.feature_names.size()) + " values");
      }
      out.rev_ids.push_back(doc.at("rev_id").get<std::int64_t>());
      out.data.labels.push_back(label_from_json(doc.at("label")));
      flat.insert(flat.end(), values.begin(), values.end());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kIoError, file.string() + ":" + std::to_string(number) + ": " +
                                           e.what());
    }
  }
  if (!have_header) throw Error(ErrorCode::kIoError, file.string() + ": missing header");
  out.data.label_set = out.label_set;
  out.data.feature_names = out.feature_names;
  out.data.features.rows = out.rev_ids.size();
  out.data.features.cols = out.feature_names.size();
  out.data.features.data = std::move(flat);
  return out;
}

namespace {

std::string dataset_text(const DatasetFile& dataset, const std::string& digest) {
  std::ostringstream out;
  json header = {{"feature_set", dataset.feature_set},
                 {"context", dataset.context},
                 {"label_set", dataset.label_set},
                 {"features", dataset.feature_names}};
  if (!digest.empty()) header["feature_set_sha256"] = digest;
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < dataset.rev_ids.size(); ++i) {
    auto row = dataset.data.features.row(i);
    json doc = {{"rev_id", dataset.rev_ids[i]},
                {"label", dataset.data.labels[i]},
                {"values", std::vector<double>(row.begin(), row.end())}};
    out << doc.dump() << '\n';
  }
  return out.str();
}

// Rows of an earlier output that can be reused, or empty when the header
// does not match.
std::unordered_map<std::int64_t, std::vector<double>> reusable_rows(
    const fs::path& output, const FeatureSet& features, const std::string& digest) {
  std::unordered_map<std::int64_t, std::vector<double>> rows;
  if (!fs::exists(output)) return rows;
  std::ifstream in(output);
  std::string line;
  if (!std::getline(in, line)) return rows;
  try {
    auto header = json::parse(line);
    if (header.value("feature_set_sha256", "") != digest ||
        header.value("context", "") != features.context) {
      return rows;
    }
    while (std::getline(in, line)) {
      if (blank(line)) continue;
      auto doc = json::parse(line);
      rows[doc.at("rev_id").get<std::int64_t>()] = doc.at("values").get<std::vector<double>>();
    }
  } catch (const json::exception&) {
    // A torn or foreign file is ignored and rebuilt from scratch.
    rows.clear();
  }
  return rows;
}

}  // namespace

void write_dataset_file(const fs::path& file, const DatasetFile& dataset) {
  write_file_atomic(file, dataset_text(dataset, {}));
}

ExtractResult extract(const LabelFile& labels, const FeatureSet& features,
                      const DatasourceClient& client, const fs::path& output,
                      const ExtractOptions& options) {
  labels.validate();
  auto digest = feature_set_digest(features);
  auto previous = reusable_rows(output, features, digest);
  auto graph = build_graph(features);
  auto names = features.feature_names();

  const auto n = labels.records.size();
  std::vector<std::optional<std::vector<double>>> rows(n);
  std::vector<std::string> errors(n);
  std::vector<std::size_t> todo;
  ExtractResult result;
  for (std::size_t i = 0; i < n; ++i) {
    auto it = previous.find(labels.records[i].rev_id);
    if (it != previous.end() && it->second.size() == names.size()) {
      rows[i] = std::move(it->second);
      ++result.reused;
    } else {
      todo.push_back(i);
    }
  }
  parallel_for(options.pool, todo.size(), [&](std::size_t k) {
    auto i = todo[k];
    const auto& record = labels.records[i];
    ExtractionContext ctx;
    ctx.context_id = record.context;
    ctx.revision_id = record.rev_id;
    ctx.datasource_client = &client;
    try {
      rows[i] = to_feature_vector(extract_many(*graph, ctx, names));
    } catch (const Error& e) {
      errors[i] = std::string(e.type()) + ": " + e.what();
    }
  });
  result.extracted = todo.size();

  auto& ds = result.dataset;
  ds.feature_set = features.name;
  ds.context = features.context;
  ds.label_set = labels.label_set;
  ds.feature_names = names;
  std::vector<double> flat;
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i]) {
      result.failures.push_back("record " + std::to_string(i + 1) + " rev " +
                                std::to_string(labels.records[i].rev_id) + ": " + errors[i]);
      continue;
    }
    ds.rev_ids.push_back(labels.records[i].rev_id);
    ds.data.labels.push_back(labels.records[i].label);
    flat.insert(flat.end(), rows[i]->begin(), rows[i]->end());
  }
  result.extracted -= result.failures.size();
  ds.data.label_set = ds.label_set;
  ds.data.feature_names = names;
  ds.data.features.rows = ds.rev_ids.size();
  ds.data.features.cols = names.size();
  ds.data.features.data = std::move(flat);
  write_file_atomic(output, dataset_text(ds, digest));

  result.failed = n > 0 && static_cast<double>(result.failures.size()) >
                               options.failure_tolerance * static_cast<double>(n);
  return result;
}

std::pair<std::string, json> parse_param_flag(const std::string& flag) {
  auto eq = flag.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kInvalidFlag, "expected key=value, got '" + flag + "'");
  }
  auto key = flag.substr(0, eq);
  auto raw = flag.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  return {key, value};
}

std::pair<std::string, double> parse_rate_flag(const std::string& flag, const char* what) {
  auto eq = flag.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error(ErrorCode::kInvalidFlag,
                std::string(what) + " expects label=number, got '" + flag + "'");
  }
  auto label = flag.substr(0, eq);
  auto raw = flag.substr(eq + 1);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(raw, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != raw.size() || raw.empty() || !std::isfinite(value)) {
    throw Error(ErrorCode::kInvalidFlag,
                std::string(what) + " value '" + raw + "' is not a number");
  }
  return {label, value};
}

TrainingOptions training_options(EstimatorKind kind, const std::string& model_name,
                                 const std::string& context, const CvTrainFlags& flags,
                                 const std::vector<std::string>& label_set) {
  TrainingOptions options;
  options.name = model_name;
  options.context = context;
  options.version = flags.version;
  options.folds = flags.folds;
  auto& p = options.params;
  p.kind = kind;
  p.center = flags.center;
  p.scale = flags.scale;
  p.seed = flags.seed;
  for (const auto& f : flags.params) {
    auto [key, value] = parse_param_flag(f);
    p.hyperparameters[key] = value;
  }
  for (const auto& f : flags.label_weights) {
    auto [label, w] = parse_rate_flag(f, "--label-weight");
    p.label_weights[label] = w;
  }
  if (!flags.pop_rates.empty()) {
    std::map<std::string, double> rates;
    for (const auto& f : flags.pop_rates) {
      auto [label, r] = parse_rate_flag(f, "--pop-rate");
      rates[label] = r;
    }
    p.population_rates = std::move(rates);
  }
  try {
    bump_version(flags.version, VersionPart::kPatch);
  } catch (const Error&) {
    throw Error(ErrorCode::kInvalidFlag, "--version '" + flags.version + "' is not x.y.z");
  }
  p.validate(label_set);
  resolved_hyperparameters(p);
  return options;
}

Model cv_train(const DatasetFile& dataset, const FeatureSet& features, EstimatorKind kind,
               const std::string& model_name, const CvTrainFlags& flags) {
  auto options = training_options(kind, model_name, dataset.context, flags, dataset.label_set);
  return train_model(dataset.data, features, options);
}

Statistics test_model(const Model& model, const DatasetFile& dataset) {
  if (dataset.feature_names != model.feature_names()) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset columns do not match model '" +
                                                   model.name + "'");
  }
  const auto& labels = model.label_set();
  std::vector<ScoredExample> examples;
  examples.reserve(dataset.rev_ids.size());
  for (std::size_t i = 0; i < dataset.rev_ids.size(); ++i) {
    auto it = std::find(labels.begin(), labels.end(), dataset.data.labels[i]);
    if (it == labels.end()) {
      throw Error(ErrorCode::kUnknownLabel, "label '" + dataset.data.labels[i] +
                                                "' is not known to model '" + model.name + "'");
    }
    examples.push_back({model.estimator.predict_proba(dataset.data.features.row(i)),
                        static_cast<std::size_t>(it - labels.begin())});
  }
  return compute_statistics(examples, labels);
}

std::string BuildTarget::model_file_name() const { return context + "." + name + ".model"; }
std::string BuildTarget::dataset_file_name() const {
  return context + "." + name + ".w_cache.jsonl";
}

namespace {

json target_settings(const BuildTarget& t) {
  return {{"name", t.name},
          {"context", t.context},
          {"estimator", to_string(t.estimator)},
          {"params", t.params},
          {"version", t.version},
          {"pop_rates", t.pop_rates},
          {"label_weights", t.label_weights},
          {"center", t.center},
          {"scale", t.scale},
          {"folds", t.folds},
          {"seed", t.seed},
          {"failure_tolerance", t.failure_tolerance}};
}

CvTrainFlags flags_for(const BuildTarget& t) {
  CvTrainFlags flags;
  flags.version = t.version;
  for (const auto& [k, v] : t.params.items()) flags.params.push_back(k + "=" + v.dump());
  for (const auto& [label, w] : t.label_weights) {
    flags.label_weights.push_back(label + "=" + json(w).dump());
  }
  for (const auto& [label, r] : t.pop_rates) {
    flags.pop_rates.push_back(label + "=" + json(r).dump());
  }
  flags.center = t.center;
  flags.scale = t.scale;
  flags.folds = t.folds;
  flags.seed = t.seed;
  return flags;
}

}  // namespace

void BuildManifest::validate() const {
  std::set<std::string> outputs;
  for (const auto& t : targets) {
    auto where = "target '" + t.name + "': ";
    if (t.name.empty() || t.context.empty()) {
      throw Error(ErrorCode::kManifestError, where + "name and context are required");
    }
    if (!outputs.insert(t.model_file_name()).second) {
      throw Error(ErrorCode::kManifestError, where + "duplicate output " + t.model_file_name());
    }
    for (const auto& p : {t.labels, t.feature_set}) {
      if (!fs::exists(p)) throw Error(ErrorCode::kManifestError, where + p.string() + " missing");
    }
    try {
      bump_version(t.version, VersionPart::kPatch);
    } catch (const Error&) {
      throw Error(ErrorCode::kManifestError, where + "version '" + t.version + "' is not x.y.z");
    }
  }
  if (!fs::is_directory(fixtures)) {
    throw Error(ErrorCode::kManifestError, "fixtures directory " + fixtures.string() + " missing");
  }
}

BuildManifest manifest_from_json(const json& doc, const fs::path& base_dir) {
  BuildManifest m;
  m.base_dir = base_dir;
  auto resolve = [&](const std::string& p) { return base_dir / p; };
  try {
    m.fixtures = resolve(doc.value("fixtures", "fixtures"));
    m.datasets = resolve(doc.value("datasets", "datasets"));
    m.models = resolve(doc.value("models", "models"));
    for (const auto& t : doc.at("targets")) {
      BuildTarget target;
      target.name = t.at("name").get<std::string>();
      target.context = t.at("context").get<std::string>();
      target.labels = resolve(t.at("labels").get<std::string>());
      target.feature_set = resolve(t.at("feature_set").get<std::string>());
      target.estimator = parse_estimator_kind(t.value("estimator", "gradient_boosting"));
      target.params = t.value("params", json::object());
      target.version = t.value("version", "0.1.0");
      target.pop_rates = t.value("pop_rates", std::map<std::string, double>{});
      target.label_weights = t.value("label_weights", std::map<std::string, double>{});
      target.center = t.value("center", false);
      target.scale = t.value("scale", false);
      target.folds = t.value("folds", std::size_t{10});
      target.seed = t.value("seed", std::uint64_t{0});
      target.failure_tolerance = t.value("failure_tolerance", 0.10);
      m.targets.push_back(std::move(target));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifestError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kManifestError) throw;
    throw Error(ErrorCode::kManifestError, e.what());
  }
  return m;
}

BuildManifest load_manifest(const fs::path& file) {
  json doc;
  try {
    doc = json::parse(read_all(file));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kManifestError, file.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kManifestError, e.what());
  }
  auto m = manifest_from_json(doc, file.parent_path());
  m.validate();
  return m;
}

std::string target_input_hash(const BuildManifest& manifest, const BuildTarget& target) {
  std::string acc;
  acc += "model-format " + std::to_string(kModelFormatVersion) + "\n";
  acc += "labels " + sha256_file(target.labels) + "\n";
  acc += "feature_set " + feature_set_digest(load_feature_set(target.feature_set)) + "\n";
  acc += "fixtures " + fixtures_digest(manifest.fixtures) + "\n";
  acc += "settings " + target_settings(target).dump() + "\n";
  return sha256_hex(acc);
}

std::vector<BuildStep> build(const BuildManifest& manifest, const BuildOptions& options) {
  manifest.validate();
  auto models_dir = options.models_dir.value_or(manifest.models);
  auto datasets_dir = options.datasets_dir.value_or(manifest.datasets);
  std::shared_ptr<FixtureClient> client;
  auto fixtures_hash = fixtures_digest(manifest.fixtures);

  std::vector<BuildStep> steps;
  for (const auto& target : manifest.targets) {
    BuildStep step;
    step.target = target.name;
    step.version = target.version;
    step.model = models_dir / target.model_file_name();
    auto stamp = step.model;
    stamp += ".inputs";
    try {
      auto hash = target_input_hash(manifest, target);
      bool current = !options.force && fs::exists(step.model) && fs::exists(stamp) &&
                     json::parse(read_all(stamp)).value("inputs", "") == hash;
      if (current) {
        auto model = load_model(step.model);
        step.rows = model.statistics.n;
        step.statistics = to_json(model.statistics);
        if (options.log) *options.log << target.name << ": up to date\n";
        steps.push_back(std::move(step));
        continue;
      }
      if (!client) client = FixtureClient::from_directory(manifest.fixtures);

      auto dataset_path = datasets_dir / target.dataset_file_name();
      // Cached rows are only valid for the fixtures they came from.
      if (fs::exists(stamp)) {
        auto old = json::parse(read_all(stamp));
        if (old.value("fixtures", "") != fixtures_hash) fs::remove(dataset_path);
      } else {
        fs::remove(dataset_path);
      }

      auto labels = read_label_file(target.labels);
      auto features = load_feature_set(target.feature_set);
      ExtractOptions extract_options;
      extract_options.failure_tolerance = target.failure_tolerance;
      extract_options.pool = options.pool;
      auto extracted = extract(labels, features, *client, dataset_path, extract_options);
      if (options.log) {
        *options.log << target.name << ": " << extracted.dataset.rev_ids.size() << " rows ("
                     << extracted.reused << " cached, " << extracted.extracted << " extracted, "
                     << extracted.failures.size() << " failed)\n";
      }
      if (extracted.failed) {
        std::string msg = std::to_string(extracted.failures.size()) + " of " +
                          std::to_string(labels.records.size()) + " rows failed extraction";
        for (std::size_t i = 0; i < extracted.failures.size() && i < 5; ++i) {
          msg += "\n  " + extracted.failures[i];
        }
        throw Error(ErrorCode::kExtractionFailed, msg);
      }
      auto model = cv_train(extracted.dataset, features, target.estimator, target.name,
                            flags_for(target));
      save_model(model, step.model);
      json stamp_doc = {{"inputs", hash}, {"fixtures", fixtures_hash}};
      write_file_atomic(stamp, stamp_doc.dump() + "\n");
      step.rebuilt = true;
      step.rows = model.statistics.n;
      step.statistics = to_json(model.statistics);
      if (options.log) *options.log << target.name << ": wrote " << step.model.string() << "\n";
    } catch (const Error& e) {
      throw Error(ErrorCode::kManifestError, "target '" + target.name + "' failed: " +
                                                 std::string(e.type()) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kManifestError, "target '" + target.name + "' failed: " + e.what());
    }
    steps.push_back(std::move(step));
  }
  return steps;
}

std::string build_summary(const std::vector<BuildStep>& steps) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "target" << std::setw(10) << "version" << std::setw(12)
      << "status" << std::setw(8) << "rows" << "roc_auc(micro)\n";
  for (const auto& s : steps) {
    out << std::left << std::setw(20) << s.target << std::setw(10) << s.version << std::setw(12)
        << (s.rebuilt ? "built" : "up-to-date") << std::setw(8) << s.rows;
    const auto& roc = s.statistics.contains("roc_auc") ? s.statistics["roc_auc"]
                                                       : nlohmann::ordered_json();
    if (roc.is_object() && roc.contains("micro")) {
      out << std::fixed << std::setprecision(3) << roc["micro"].get<double>();
    } else {
      out << "-";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace scorehub
