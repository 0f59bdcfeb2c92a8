#include "scorehub/model_store.hpp"

#include <sys/utsname.h>
#include <unistd.h>

#include <charconv>
#include <fstream>
#include <mutex>
#include <sstream>

#include "scorehub/error.hpp"
#include "scorehub/hashing.hpp"
#include "scorehub/threshold_query.hpp"

namespace scorehub {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Error corrupt(const std::string& message) {
  return Error(ErrorCode::kCorruptModelFile, message);
}

std::vector<std::string> split_field_path(std::string_view path) {
  std::vector<std::string> segments;
  std::size_t i = 0;
  while (i <= path.size()) {
    if (i < path.size() && (path[i] == '\'' || path[i] == '"')) {
      auto close = path.find(path[i], i + 1);
      if (close == std::string_view::npos) {
        throw Error(ErrorCode::kUnknownFieldPath, "unterminated quote in field path");
      }
      if (close + 1 != path.size()) {
        throw Error(ErrorCode::kUnknownFieldPath,
                    "a quoted threshold query must be the last path segment");
      }
      segments.emplace_back(path.substr(i, close - i + 1));
      break;
    }
    auto dot = path.find('.', i);
    if (dot == std::string_view::npos) dot = path.size();
    if (dot == i) {
      throw Error(ErrorCode::kUnknownFieldPath,
                  "empty segment in field path '" + std::string(path) + "'");
    }
    segments.emplace_back(path.substr(i, dot - i));
    i = dot + 1;
  }
  return segments;
}

const ordered_json& step(const ordered_json& node, const std::string& segment,
                         const std::string& path) {
  if (node.is_object()) {
    auto it = node.find(segment);
    if (it != node.end()) return *it;
  } else if (node.is_array()) {
    std::size_t index = 0;
    auto [end, ec] = std::from_chars(segment.data(), segment.data() + segment.size(), index);
    if (ec == std::errc() && end == segment.data() + segment.size() && index < node.size()) {
      return node[index];
    }
  }
  throw Error(ErrorCode::kUnknownFieldPath,
              "no field '" + segment + "' in path '" + path + "'");
}

int parse_semver_part(std::string_view text, const std::string& version) {
  int value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size() || value < 0) {
    throw Error(ErrorCode::kInvalidParams, "invalid version '" + version + "'");
  }
  return value;
}

}  // namespace

ordered_json capture_environment() {
  utsname info{};
  ordered_json env = ordered_json::object();
  if (uname(&info) == 0) {
    env["machine"] = info.machine;
    env["os"] = std::string(info.sysname) + " " + info.release;
  } else {
    env["machine"] = "unknown";
    env["os"] = "unknown";
  }
#if defined(__clang__)
  env["runtime"] = "clang " __clang_version__;
#elif defined(__GNUC__)
  env["runtime"] = "gcc " __VERSION__;
#else
  env["runtime"] = "unknown";
#endif
  env["cxx_standard"] = static_cast<long>(__cplusplus);
  return env;
}

ordered_json Model::params_json() const {
  const auto& params = estimator.params();
  ordered_json out = ordered_json::object();
  ordered_json labels = ordered_json::array();
  for (const auto& label : label_set()) {
    json value = label_to_json(label);
    if (value.is_boolean()) {
      labels.push_back(value.get<bool>());
    } else {
      labels.push_back(label);
    }
  }
  out["labels"] = labels;
  out["estimator"] = std::string(to_string(params.kind));
  const json hyperparameters = resolved_hyperparameters(params);
  for (const auto& [key, value] : hyperparameters.items()) out[key] = value;
  out["label_weights"] = params.label_weights;
  out["population_rates"] =
      params.population_rates ? ordered_json(*params.population_rates) : ordered_json();
  out["center"] = params.center;
  out["scale"] = params.scale;
  out["seed"] = params.seed;
  return out;
}

ordered_json Model::info() const {
  ordered_json doc = ordered_json::object();
  doc["type"] = std::string(type_name(estimator.kind()));
  doc["version"] = version;
  doc["environment"] = environment;
  doc["params"] = params_json();
  doc["statistics"] = to_json(statistics);
  return doc;
}

void finalize(Model& model) {
  if (model.feature_set.feature_names() != model.estimator.feature_names()) {
    throw Error(ErrorCode::kInvalidParams,
                "model '" + model.name + "' feature list does not match its estimator");
  }
  bump_version(model.version, VersionPart::kPatch);  // validates the format
  model.graph = build_graph(model.feature_set);
}

std::string serialize_model(const Model& model) {
  ordered_json payload = ordered_json::object();
  payload["name"] = model.name;
  payload["context"] = model.context;
  payload["version"] = model.version;
  payload["environment"] = model.environment;
  payload["estimator"] = model.estimator.to_json();
  payload["feature_set"] = to_json(model.feature_set, true);
  payload["statistics"] = to_json(model.statistics);
  std::string body = payload.dump(1);
  body += '\n';
  std::ostringstream out;
  out << kModelMagic << ' ' << kModelFormatVersion << " sha256:" << sha256_hex(body)
      << '\n'
      << body;
  return out.str();
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::string bytes = serialize_model(model);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    out << bytes;
    if (!out.flush()) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Model parse_model(std::string_view bytes) {
  auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) throw corrupt("missing model header");
  std::istringstream header{std::string(bytes.substr(0, newline))};
  std::string magic, version_text, checksum;
  header >> magic >> version_text >> checksum;
  if (magic != kModelMagic) throw corrupt("not a scorehub model file");
  int format = 0;
  auto [end, ec] = std::from_chars(version_text.data(),
                                   version_text.data() + version_text.size(), format);
  if (ec != std::errc() || end != version_text.data() + version_text.size()) {
    throw corrupt("unreadable format version '" + version_text + "'");
  }
  if (format != kModelFormatVersion) {
    throw Error(ErrorCode::kIncompatibleFormatVersion,
                "model format " + std::to_string(format) + " is not supported (reader is " +
                    std::to_string(kModelFormatVersion) + ")");
  }
  constexpr std::string_view kPrefix = "sha256:";
  if (checksum.rfind(kPrefix, 0) != 0) throw corrupt("missing checksum");
  auto body = bytes.substr(newline + 1);
  if (sha256_hex(body) != checksum.substr(kPrefix.size())) {
    throw corrupt("checksum mismatch (truncated or modified file)");
  }
  try {
    auto payload = json::parse(body);
    Model model;
    model.name = payload.at("name").get<std::string>();
    model.context = payload.at("context").get<std::string>();
    model.version = payload.at("version").get<std::string>();
    model.environment = ordered_json::parse(body).at("environment");
    model.estimator = Estimator::from_json(payload.at("estimator"));
    model.feature_set = feature_set_from_json(payload.at("feature_set"));
    model.statistics = statistics_from_json(payload.at("statistics"));
    model.statistics.label_set = model.estimator.label_set();
    finalize(model);
    return model;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIncompatibleFormatVersion) throw;
    throw corrupt(e.what());
  } catch (const std::exception& e) {
    throw corrupt(e.what());
  }
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_model(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

ordered_json model_info(const Model& model, std::string_view field_path) {
  ordered_json info = model.info();
  if (field_path.empty()) return info;
  std::string path(field_path);
  auto segments = split_field_path(field_path);
  bool has_query = segments.back().front() == '\'' || segments.back().front() == '"';
  if (has_query) {
    if (segments.size() != 4 || segments[0] != "statistics" || segments[1] != "thresholds") {
      throw Error(ErrorCode::kUnknownFieldPath,
                  "threshold queries apply to statistics.thresholds.<label>");
    }
    const auto& label = segments[2];
    auto table = model.statistics.thresholds.find(label);
    if (table == model.statistics.thresholds.end()) {
      throw Error(ErrorCode::kUnknownFieldPath,
                  "no threshold table for label '" + label + "'");
    }
    const auto& quoted = segments[3];
    auto query = parse_threshold_query(std::string_view(quoted).substr(1, quoted.size() - 2));
    auto row = optimize(query, table->second);
    return row ? to_json(*row) : ordered_json(nullptr);
  }
  const ordered_json* node = &info;
  for (const auto& segment : segments) node = &step(*node, segment, path);
  return *node;
}

VersionPart parse_version_part(std::string_view part) {
  if (part == "major") return VersionPart::kMajor;
  if (part == "minor") return VersionPart::kMinor;
  if (part == "patch") return VersionPart::kPatch;
  throw Error(ErrorCode::kInvalidParams,
              "version part must be major, minor or patch, not '" + std::string(part) + "'");
}

std::string bump_version(const std::string& version, VersionPart part) {
  std::vector<std::string_view> pieces;
  std::string_view rest = version;
  for (int i = 0; i < 2; ++i) {
    auto dot = rest.find('.');
    if (dot == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidParams, "invalid version '" + version + "'");
    }
    pieces.push_back(rest.substr(0, dot));
    rest.remove_prefix(dot + 1);
  }
  pieces.push_back(rest);
  int major = parse_semver_part(pieces[0], version);
  int minor = parse_semver_part(pieces[1], version);
  int patch = parse_semver_part(pieces[2], version);
  switch (part) {
    case VersionPart::kMajor: ++major; minor = 0; patch = 0; break;
    case VersionPart::kMinor: ++minor; patch = 0; break;
    case VersionPart::kPatch: ++patch; break;
  }
  return std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
}

Model bump_version(Model model, VersionPart part) {
  model.version = bump_version(model.version, part);
  return model;
}

void ModelRegistry::put(ModelPtr model) {
  std::unique_lock lock(mutex_);
  auto next = std::make_shared<Map>(*models_);
  (*next)[model->context][model->name] = std::move(model);
  models_ = std::move(next);
}

void ModelRegistry::replace_all(std::vector<ModelPtr> models) {
  auto next = std::make_shared<Map>();
  for (auto& m : models) (*next)[m->context][m->name] = std::move(m);
  std::unique_lock lock(mutex_);
  models_ = std::move(next);
}

std::size_t ModelRegistry::load_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".model") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<ModelPtr> models;
  for (const auto& file : files) {
    models.push_back(std::make_shared<const Model>(load_model(file)));
  }
  std::size_t count = models.size();
  replace_all(std::move(models));
  return count;
}

ModelRegistry::ModelPtr ModelRegistry::get(const std::string& context,
                                           const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto ctx = models_->find(context);
  if (ctx == models_->end()) {
    throw Error(ErrorCode::kContextNotFound, "unknown context '" + context + "'");
  }
  auto it = ctx->second.find(name);
  if (it == ctx->second.end()) {
    throw Error(ErrorCode::kModelNotFound,
                "no model '" + name + "' in context '" + context + "'");
  }
  return it->second;
}

bool ModelRegistry::has_context(const std::string& context) const {
  std::shared_lock lock(mutex_);
  return models_->count(context) > 0;
}

std::vector<std::string> ModelRegistry::contexts() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [ctx, models] : *models_) out.push_back(ctx);
  return out;
}

std::vector<std::string> ModelRegistry::model_names(const std::string& context) const {
  std::shared_lock lock(mutex_);
  auto ctx = models_->find(context);
  if (ctx == models_->end()) {
    throw Error(ErrorCode::kContextNotFound, "unknown context '" + context + "'");
  }
  std::vector<std::string> out;
  for (const auto& [name, model] : ctx->second) out.push_back(name);
  return out;
}

}  // namespace scorehub
