#include "scorehub/feature_graph.hpp"

#include <algorithm>
#include <set>

namespace scorehub {

namespace {

constexpr std::string_view kFeaturePrefix = "feature.";
constexpr std::string_view kDatasourcePrefix = "datasource.";

bool starts_with(const std::string& s, std::string_view prefix) {
  return s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0;
}

Error unknown(const std::string& name) {
  return Error(ErrorCode::kUnknownDependent, "unknown dependent '" + name + "'");
}

}  // namespace

std::string_view to_string(DependentKind kind) {
  return kind == DependentKind::kDatasource ? "datasource" : "feature";
}

DependencyGraph& DependencyGraph::add(DependentRef node) {
  if (node.name.empty()) {
    throw Error(ErrorCode::kInvalidParams, "dependent name must not be empty");
  }
  if (nodes_.count(node.name)) {
    throw Error(ErrorCode::kDuplicateName,
                "dependent '" + node.name + "' is already registered");
  }
  if (node.is_root() && !node.dependencies.empty()) {
    throw Error(ErrorCode::kInvalidParams,
                "root datasource '" + node.name + "' cannot have dependencies");
  }
  if (!node.is_root() && !node.compute) {
    throw Error(ErrorCode::kInvalidParams,
                "dependent '" + node.name + "' has neither fetch nor compute");
  }
  std::string name = node.name;
  nodes_.emplace(name, std::move(node));
  // The graph was acyclic before, so any new cycle runs through `name`.
  if (auto cycle = find_cycle_through(name)) {
    nodes_.erase(name);
    std::string path;
    for (std::size_t i = 0; i < cycle->size(); ++i) {
      if (i) path += "->";
      path += (*cycle)[i];
    }
    throw Error(ErrorCode::kCycleDetected, "dependency cycle " + path);
  }
  return *this;
}

std::optional<std::vector<std::string>> DependencyGraph::find_cycle_through(
    const std::string& start) const {
  std::vector<std::string> path{start};
  std::set<std::string> visited;
  std::function<bool(const std::string&)> dfs = [&](const std::string& at) {
    auto it = nodes_.find(at);
    if (it == nodes_.end()) return false;
    for (const auto& dep : it->second.dependencies) {
      if (dep == start) {
        path.push_back(dep);
        return true;
      }
      if (visited.insert(dep).second) {
        path.push_back(dep);
        if (dfs(dep)) return true;
        path.pop_back();
      }
    }
    return false;
  };
  if (!dfs(start)) return std::nullopt;
  // Rotate so the reported cycle starts at its smallest name.
  path.pop_back();
  auto smallest = std::min_element(path.begin(), path.end());
  std::rotate(path.begin(), smallest, path.end());
  path.push_back(path.front());
  return path;
}

const DependentRef& DependencyGraph::at(const std::string& canonical) const {
  auto it = nodes_.find(canonical);
  if (it == nodes_.end()) throw unknown(canonical);
  return it->second;
}

std::string DependencyGraph::canonical_name(const std::string& name) const {
  if (nodes_.count(name)) return name;
  auto try_prefix = [&](std::string_view prefix,
                        DependentKind kind) -> std::optional<std::string> {
    if (!starts_with(name, prefix)) return std::nullopt;
    std::string bare = name.substr(prefix.size());
    auto it = nodes_.find(bare);
    if (it == nodes_.end() || it->second.kind != kind) return std::nullopt;
    return bare;
  };
  if (auto bare = try_prefix(kFeaturePrefix, DependentKind::kFeature)) return *bare;
  if (auto bare = try_prefix(kDatasourcePrefix, DependentKind::kDatasource)) {
    return *bare;
  }
  throw unknown(name);
}

void DependencyGraph::validate() const {
  for (const auto& [name, node] : nodes_) {
    for (const auto& dep : node.dependencies) {
      if (!nodes_.count(dep)) {
        throw Error(ErrorCode::kUnknownDependent,
                    "'" + name + "' depends on unknown '" + dep + "'");
      }
    }
  }
}

std::vector<std::string> DependencyGraph::dependency_cone(
    const std::vector<std::string>& names) const {
  std::set<std::string> seen;
  std::vector<std::string> stack;
  for (const auto& n : names) stack.push_back(canonical_name(n));
  while (!stack.empty()) {
    auto name = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(name).second) continue;
    for (const auto& dep : at(name).dependencies) stack.push_back(dep);
  }
  return {seen.begin(), seen.end()};
}

InjectionOverlay DependencyGraph::make_overlay(const RawOverlay& raw) const {
  InjectionOverlay overlay;
  for (const auto& [key, text] : raw) {
    auto name = canonical_name(key);
    overlay[name] = coerce(text, at(name).value_type, key);
  }
  return overlay;
}

InjectionOverlay DependencyGraph::make_overlay(const nlohmann::json& raw) const {
  if (!raw.is_object()) {
    throw Error(ErrorCode::kTypeMismatch, "overlay must be a JSON object");
  }
  InjectionOverlay overlay;
  for (const auto& [key, value] : raw.items()) {
    auto name = canonical_name(key);
    overlay[name] = coerce_json(value, at(name).value_type, key);
  }
  return overlay;
}

InjectionOverlay DependencyGraph::check_overlay(
    const InjectionOverlay& overlay) const {
  InjectionOverlay checked;
  for (const auto& [key, value] : overlay) {
    auto name = canonical_name(key);
    auto expected = at(name).value_type;
    if (type_of(value) != expected) {
      throw Error(ErrorCode::kTypeMismatch,
                  "injected value for '" + key + "' must be " +
                      std::string(to_string(expected)));
    }
    checked[name] = value;
  }
  return checked;
}

std::vector<std::string> DependencyGraph::names() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& [name, node] : nodes_) out.push_back(name);
  return out;
}

namespace {

void check_deadline(const ExtractionContext& ctx, const std::string& name) {
  if (ctx.deadline && std::chrono::steady_clock::now() > *ctx.deadline) {
    throw Error(ErrorCode::kTimeoutError,
                "scoring budget exceeded while solving '" + name + "'");
  }
}

const RevisionRecord& ensure_record(ExtractionContext& ctx,
                                    const std::string& name) {
  if (ctx.record) return *ctx.record;
  if (ctx.datasource_client == nullptr) {
    throw Error(ErrorCode::kDatasourceError,
                "no datasource client available for '" + name + "'");
  }
  ++ctx.record_fetches;
  try {
    ctx.record =
        ctx.datasource_client->get_revision(ctx.context_id, ctx.revision_id);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kRevisionNotFound) throw;
    throw Error(ErrorCode::kDatasourceError,
                "datasource '" + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kDatasourceError,
                "datasource '" + name + "': " + e.what());
  }
  check_deadline(ctx, name);
  return *ctx.record;
}

const Value& solve_canonical(const DependencyGraph& graph,
                             ExtractionContext& ctx, const std::string& name) {
  if (auto hit = ctx.memo.find(name); hit != ctx.memo.end()) return hit->second;
  if (auto injected = ctx.overlay.find(name); injected != ctx.overlay.end()) {
    return ctx.memo.emplace(name, injected->second).first->second;
  }
  check_deadline(ctx, name);
  const DependentRef& node = graph.at(name);
  Value value;
  if (node.is_root()) {
    value = node.fetch(ensure_record(ctx, name));
  } else {
    std::vector<Value> inputs;
    inputs.reserve(node.dependencies.size());
    for (const auto& dep : node.dependencies) {
      inputs.push_back(solve_canonical(graph, ctx, dep));
    }
    try {
      value = node.compute(inputs);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kFeatureExtractionError,
                  "computing '" + name + "': " + e.what());
    }
  }
  if (type_of(value) != node.value_type) {
    throw Error(ErrorCode::kFeatureExtractionError,
                "'" + name + "' produced a " +
                    std::string(to_string(type_of(value))) + ", declared " +
                    std::string(to_string(node.value_type)));
  }
  return ctx.memo.emplace(name, std::move(value)).first->second;
}

}  // namespace

Value solve(const DependencyGraph& graph, ExtractionContext& ctx,
            const std::string& name) {
  return solve_canonical(graph, ctx, graph.canonical_name(name));
}

std::vector<Value> extract_many(const DependencyGraph& graph,
                                ExtractionContext& ctx,
                                const std::vector<std::string>& names) {
  std::vector<Value> values;
  values.reserve(names.size());
  for (const auto& name : names) {
    try {
      values.push_back(solve(graph, ctx, name));
    } catch (const Error& e) {
      throw Error(e.code(), "extracting '" + name + "': " + e.what());
    }
  }
  return values;
}

}  // namespace scorehub
