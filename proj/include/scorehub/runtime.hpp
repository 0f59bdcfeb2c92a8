#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scorehub/model_store.hpp"
#include "scorehub/scoring.hpp"
#include "scorehub/worker_pool.hpp"

namespace scorehub {

struct ScoreJobKey {
  std::string context_id;
  std::string model_name;
  std::string model_version;
  std::int64_t revision_id = 0;

  // context:model:version:revid
  std::string str() const;
  bool operator==(const ScoreJobKey&) const = default;
};

// Thread-safe least-recently-used map. Capacity 0 stores nothing.
template <typename K, typename V>
class LruCache {
 public:
  explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

  std::optional<V> get(const K& key) {
    std::lock_guard lock(mutex_);
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    order_.splice(order_.begin(), order_, it->second);
    return it->second->second;
  }

  void put(const K& key, V value) {
    if (capacity_ == 0) return;
    std::lock_guard lock(mutex_);
    if (auto it = index_.find(key); it != index_.end()) {
      it->second->second = std::move(value);
      order_.splice(order_.begin(), order_, it->second);
      return;
    }
    order_.emplace_front(key, std::move(value));
    index_[key] = order_.begin();
    while (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
  }

  bool contains(const K& key) const {
    std::lock_guard lock(mutex_);
    return index_.count(key) != 0;
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return order_.size();
  }
  std::size_t capacity() const { return capacity_; }
  void clear() {
    std::lock_guard lock(mutex_);
    index_.clear();
    order_.clear();
  }

 private:
  using Entry = std::pair<K, V>;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::list<Entry> order_;  // most recent first
  std::unordered_map<K, typename std::list<Entry>::iterator> index_;
};

// Collapses concurrent computations of the same key into one. Waiters get
// the leader's value or its exception; the entry is removed once the
// leader finishes either way.
template <typename V>
class SingleFlight {
 public:
  struct Outcome {
    V value;
    bool shared = false;  // true when this caller waited on another's work
  };

  Outcome run(const std::string& key, const std::function<V()>& compute) {
    std::promise<V> promise;
    {
      std::unique_lock lock(mutex_);
      if (auto it = flights_.find(key); it != flights_.end()) {
        auto future = it->second;
        lock.unlock();
        return {future.get(), true};
      }
      flights_.emplace(key, promise.get_future().share());
    }
    try {
      V value = compute();
      promise.set_value(value);
      finish(key);
      return {std::move(value), false};
    } catch (...) {
      promise.set_exception(std::current_exception());
      finish(key);
      throw;
    }
  }

  std::size_t in_flight() const {
    std::lock_guard lock(mutex_);
    return flights_.size();
  }

 private:
  void finish(const std::string& key) {
    std::lock_guard lock(mutex_);
    flights_.erase(key);
  }

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_future<V>> flights_;
};

enum class Counter {
  kScoresRequested,
  kCacheHits,
  kCacheMisses,
  kDedupMerges,
  kPrecacheRequests,
  kDroppedEvents,
  kMalformedEvents,
};

struct LatencySummary {
  std::size_t count = 0;
  double min = 0, p50 = 0, p75 = 0, p95 = 0, max = 0;  // seconds
};

// Counters and a latency histogram behind one lock, so a snapshot is a
// single point in time.
class MetricsRegistry {
 public:
  // Latency percentiles are computed over the most recent samples.
  static constexpr std::size_t kLatencyWindow = 65536;

  void add(Counter counter, std::uint64_t n = 1);
  void count_error(ErrorCode code);
  void record_score_duration(std::chrono::duration<double> elapsed);

  std::uint64_t get(Counter counter) const;
  std::uint64_t errors(ErrorCode code) const;
  LatencySummary score_duration() const;

  // Plain-text `name value` lines.
  std::string snapshot() const;

 private:
  LatencySummary summarize_locked() const;

  mutable std::mutex mutex_;
  std::map<Counter, std::uint64_t> counters_;
  std::map<std::string, std::uint64_t> errors_;
  std::vector<double> samples_;
  std::size_t next_sample_ = 0;
  std::size_t sample_count_ = 0;
  double min_ = 0, max_ = 0;
};

struct ServiceOptions {
  std::size_t cache_capacity = 10000;  // 0 disables the score cache
  std::size_t io_workers = 4;
  std::size_t cpu_workers = 0;         // 0 means hardware concurrency
  std::size_t queue_capacity = 1024;
  ScoringOptions scoring;
};

// Response for a scores request: resolved model versions plus the nested
// rev_id -> model -> result cells.
struct ScoresResponse {
  std::string context;
  std::map<std::string, std::string> model_versions;
  BatchResult scores;

  // {context: {"models": {name: {"version"}}, "scores": {rev: {model: cell}}}}
  nlohmann::ordered_json to_json() const;
};

// The serving core: score cache, in-flight de-duplication, IO/CPU pools and
// metrics in front of a ScoringEngine.
class ScoringService {
 public:
  ScoringService(std::shared_ptr<ModelRegistry> registry,
                 std::shared_ptr<const DatasourceClient> client, ServiceOptions options = {});
  ~ScoringService();

  // Single cell. Overlays bypass cache and de-duplication. Throws
  // kContextNotFound, overlay errors and kLoadShed.
  ScoreResult score(const std::string& context, const std::string& model_name,
                    std::int64_t revision_id, const RawOverlay& overlay = {},
                    bool include_features = false);

  // Any request shape. One revision goes through score(); several go
  // through the batch path with cache lookups per cell.
  ScoresResponse scores(const ScoreRequest& request);

  // Warms the cache for one cell; used by the precacher.
  void precache(const std::string& context, const std::string& model_name,
                std::int64_t revision_id);

  // Cache + de-duplication around `compute`, keyed by `key`. Successful
  // documents are cached; error documents and exceptions are not.
  ScoreResult cached_score(const ScoreJobKey& key, const std::function<ScoreResult()>& compute);

  nlohmann::ordered_json model_info(const std::string& context, const std::string& model_name,
                                    std::string_view field_path = {}) const;

  ModelRegistry& registry() { return *registry_; }
  const ScoringEngine& engine() const { return engine_; }
  MetricsRegistry& metrics() { return metrics_; }
  const MetricsRegistry& metrics() const { return metrics_; }
  std::size_t cache_size() const { return cache_.size(); }
  std::size_t in_flight() const { return flights_.in_flight(); }
  WorkerPool& io_pool() { return *io_; }
  WorkerPool& cpu_pool() { return *cpu_; }

 private:
  ScoreResult score_pinned(const ModelRegistry::ModelPtr& model, std::int64_t revision_id,
                           bool include_features);
  void note_result(const ScoreResult& result);

  std::shared_ptr<ModelRegistry> registry_;
  ServiceOptions options_;
  std::unique_ptr<WorkerPool> io_;
  std::unique_ptr<WorkerPool> cpu_;
  ScoringEngine engine_;
  LruCache<std::string, ScoreDocument> cache_;
  SingleFlight<ScoreResult> flights_;
  MetricsRegistry metrics_;
};

}  // namespace scorehub
