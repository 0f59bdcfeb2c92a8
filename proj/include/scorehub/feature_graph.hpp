#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "scorehub/datasources.hpp"
#include "scorehub/value.hpp"

namespace scorehub {

enum class DependentKind { kDatasource, kFeature };

std::string_view to_string(DependentKind kind);

// A named node in the dependency graph. Root datasources carry `fetch` and
// read a field of the revision; every other node carries `compute`, a pure
// function of its dependency values in declaration order.
struct DependentRef {
  std::string name;
  DependentKind kind = DependentKind::kFeature;
  ValueType value_type = ValueType::kInteger;
  std::vector<std::string> dependencies;
  std::function<Value(std::span<const Value>)> compute;
  std::function<Value(const RevisionRecord&)> fetch;

  bool is_root() const { return static_cast<bool>(fetch); }
};

// Canonical name -> injected value.
using InjectionOverlay = std::map<std::string, Value>;

// Textual overlay as it arrives from a URL or a CLI flag, keyed by any
// accepted spelling ("revision.user.is_anon" or "feature.revision.user.is_anon").
using RawOverlay = std::map<std::string, std::string>;

class DependencyGraph {
 public:
  // Throws kDuplicateName, or kCycleDetected naming the cycle path. Forward
  // references to nodes registered later are allowed.
  DependencyGraph& add(DependentRef node);

  bool contains(const std::string& canonical_name) const {
    return nodes_.count(canonical_name) != 0;
  }
  const DependentRef& at(const std::string& canonical_name) const;

  // Maps any accepted spelling to the canonical (bare) name. The
  // "feature." / "datasource." prefixes must agree with the node kind.
  // Throws kUnknownDependent.
  std::string canonical_name(const std::string& name) const;

  // Throws kUnknownDependent if any dependency is unregistered.
  void validate() const;

  // Every node reachable from `names` through dependency edges, inclusive.
  std::vector<std::string> dependency_cone(
      const std::vector<std::string>& names) const;

  // Strict typed overlay; throws kUnknownDependent / kTypeMismatch.
  InjectionOverlay make_overlay(const RawOverlay& raw) const;
  InjectionOverlay make_overlay(const nlohmann::json& raw) const;
  // Type-checks an already typed overlay and canonicalizes its keys.
  InjectionOverlay check_overlay(const InjectionOverlay& overlay) const;

  std::vector<std::string> names() const;
  std::size_t size() const { return nodes_.size(); }

 private:
  std::optional<std::vector<std::string>> find_cycle_through(
      const std::string& start) const;

  std::map<std::string, DependentRef> nodes_;
};

// Per-request solving state. Never shared between requests.
struct ExtractionContext {
  std::string context_id;
  std::int64_t revision_id = 0;
  const DatasourceClient* datasource_client = nullptr;
  InjectionOverlay overlay;
  std::unordered_map<std::string, Value> memo;

  // Supplied by the batch IO stage; otherwise fetched on first need.
  std::optional<RevisionRecord> record;
  std::optional<std::chrono::steady_clock::time_point> deadline;
  std::uint64_t record_fetches = 0;
};

// Resolves `name` (any accepted spelling). Overlay values are returned
// verbatim; everything else is memoized in ctx.memo.
// Throws kUnknownDependent, kRevisionNotFound, kDatasourceError,
// kFeatureExtractionError or kTimeoutError.
Value solve(const DependencyGraph& graph, ExtractionContext& ctx,
            const std::string& name);

// Values in input order, sharing one memo. Errors are annotated with the
// failing name.
std::vector<Value> extract_many(const DependencyGraph& graph,
                                ExtractionContext& ctx,
                                const std::vector<std::string>& names);

}  // namespace scorehub
