#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/datasources.hpp"
#include "scorehub/feature_graph.hpp"
#include "scorehub/model_store.hpp"
#include "scorehub/worker_pool.hpp"

namespace scorehub {

struct ScoreDocument {
  std::string prediction;
  // Label-set order.
  std::vector<std::pair<std::string, double>> probability;
  std::optional<std::vector<std::pair<std::string, Value>>> features;

  bool operator==(const ScoreDocument&) const = default;
};

struct ErrorDocument {
  ErrorCode code = ErrorCode::kInternalError;
  std::string message;

  bool operator==(const ErrorDocument&) const = default;
};

using ScoreResult = std::variant<ScoreDocument, ErrorDocument>;

// {"prediction", "probability"[, "features"]}; "true"/"false" labels are
// rendered as JSON booleans in the prediction.
nlohmann::ordered_json to_json(const ScoreDocument& doc);
nlohmann::ordered_json to_json(const ErrorDocument& doc);
// {"score": ...} or {"error": ...}
nlohmann::ordered_json to_json(const ScoreResult& result);

ErrorDocument error_document(const Error& error);
inline bool is_error(const ScoreResult& r) { return std::holds_alternative<ErrorDocument>(r); }

// Argmax with ties broken by label order.
ScoreDocument make_score_document(const std::vector<std::string>& labels,
                                  const std::vector<double>& probabilities);

// Copy without the features block.
ScoreDocument without_features(ScoreDocument doc);

struct ScoreRequest {
  std::string context_id;
  std::vector<std::string> model_names;
  std::vector<std::int64_t> revision_ids;
  RawOverlay overlay;
  bool include_features = false;

  // Throws kMalformedRequest.
  void validate() const;
};

// rev_id -> model name -> result.
using BatchResult = std::map<std::int64_t, std::map<std::string, ScoreResult>>;

struct ScoringOptions {
  std::chrono::milliseconds timeout{10000};
};

// Turns (context, model, revision) into score documents. Reentrant; the
// registry and client are shared and must be thread-safe.
class ScoringEngine {
 public:
  ScoringEngine(std::shared_ptr<const ModelRegistry> registry,
                std::shared_ptr<const DatasourceClient> client,
                ScoringOptions options = {});

  // Fetches go to `io`, extraction and prediction to `cpu`. Null pools run
  // the stage on the calling thread. The pools must outlive the engine's use.
  void set_pools(WorkerPool* io, WorkerPool* cpu) {
    io_ = io;
    cpu_ = cpu;
  }

  // Request-level problems throw: kContextNotFound, and kUnknownDependent or
  // kTypeMismatch for a bad overlay. Everything else comes back as an
  // ErrorDocument.
  ScoreResult score_one(const std::string& context, const std::string& model_name,
                        std::int64_t revision_id, const RawOverlay& overlay = {},
                        bool include_features = false) const;

  // Same, against an already resolved model and typed overlay.
  ScoreResult score_model(const Model& model, std::int64_t revision_id,
                          const InjectionOverlay& overlay = {},
                          bool include_features = false) const;

  // CPU stage only: extraction and prediction over a fetched record.
  ScoreResult score_record(const Model& model, const RevisionRecord& record,
                           const InjectionOverlay& overlay, bool include_features,
                           std::chrono::steady_clock::time_point deadline) const;

  // One batched fetch on the IO pool. Throws only on transport failure.
  std::vector<RevisionResult> fetch_batch(const std::string& context,
                                          const std::vector<std::int64_t>& ids) const;

  struct Cell {
    std::size_t revision_index = 0;  // into the ids passed alongside
    const Model* model = nullptr;
  };
  // One batched fetch of `ids` on the IO pool, then every cell scored on the
  // CPU pool. Results follow `cells`; fetch failures are embedded.
  std::vector<ScoreResult> score_cells(const std::string& context,
                                       const std::vector<std::int64_t>& ids,
                                       const std::vector<Cell>& cells,
                                       bool include_features) const;

  // IO stage then CPU fan-out. Throws kMalformedRequest (including an
  // overlay), kContextNotFound; per-item failures are embedded.
  BatchResult score_batch(const ScoreRequest& request) const;

  // Throws kUnknownDependent / kTypeMismatch.
  static InjectionOverlay overlay_for(const Model& model, const RawOverlay& raw);

  // Number of feature extractions performed so far.
  std::uint64_t extraction_count() const { return extractions_.load(); }

  const ModelRegistry& registry() const { return *registry_; }
  const DatasourceClient& client() const { return *client_; }
  const ScoringOptions& options() const { return options_; }
  WorkerPool* io_pool() const { return io_; }
  WorkerPool* cpu_pool() const { return cpu_; }

 private:
  std::variant<RevisionRecord, ErrorDocument> fetch(
      const std::string& context, std::int64_t revision_id,
      std::chrono::steady_clock::time_point deadline) const;

  std::shared_ptr<const ModelRegistry> registry_;
  std::shared_ptr<const DatasourceClient> client_;
  ScoringOptions options_;
  WorkerPool* io_ = nullptr;
  WorkerPool* cpu_ = nullptr;
  mutable std::atomic<std::uint64_t> extractions_{0};
};

inline constexpr std::size_t kAuditBins = 50;

// Distribution of one class's probability over a dataset.
struct AuditSummary {
  std::string target_label;
  std::array<std::size_t, kAuditBins> histogram{};
  std::size_t scored = 0;
  double mean = 0.0;
  double median = 0.0;
  std::map<std::string, std::size_t> errors;  // error type -> count
  std::vector<double> probabilities;          // in dataset order, errors skipped

  nlohmann::ordered_json to_json() const;
};

// Scores every revision with the overlay applied; all other features keep
// their natural values. The target defaults to "true" when the model has
// it, else the first label.
AuditSummary audit_inject(const ScoringEngine& engine, const Model& model,
                          const std::vector<std::int64_t>& revision_ids,
                          const RawOverlay& overlay, std::string target_label = {});

}  // namespace scorehub
