#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <istream>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/runtime.hpp"

namespace scorehub {

// One change-stream record: {"context": str, "event": str, "rev_id": int}.
struct PrecacheEvent {
  std::string context;
  std::string event;
  std::int64_t rev_id = 0;
};

// Throws kMalformedRequest.
PrecacheEvent parse_precache_event(std::string_view line);

// Which event types warrant precaching for each (context, model).
class PrecacheConfig {
 public:
  void add(const std::string& context, const std::string& model, const std::string& event);

  // {"enwiki": {"damaging": ["revision-create", ...], ...}, ...}
  static PrecacheConfig from_json(const nlohmann::json& doc);
  static PrecacheConfig load(const std::filesystem::path& file);
  // Every registered model of every context, for the given event types.
  static PrecacheConfig for_all_models(const ModelRegistry& registry,
                                       const std::vector<std::string>& events);

  std::vector<std::string> models_for(const std::string& context,
                                      const std::string& event) const;
  // Throws kContextNotFound / kModelNotFound for references to unknown models.
  void validate(const ModelRegistry& registry) const;
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, std::map<std::string, std::set<std::string>>> entries_;
};

// Reads a change stream and warms the score cache. The reader never blocks:
// events beyond the queue capacity are dropped and counted. A single
// consumer thread feeds matching events into the service.
class Precacher {
 public:
  Precacher(ScoringService& service, PrecacheConfig config, std::size_t queue_capacity = 1024);
  ~Precacher();
  Precacher(const Precacher&) = delete;
  Precacher& operator=(const Precacher&) = delete;

  // Returns true when the event was queued.
  bool offer(std::string_view line);
  bool offer(PrecacheEvent event);

  // Offers every line until EOF or stop().
  void consume(std::istream& in);
  // "-" reads standard input, "tcp://host:port" connects and reads the
  // socket, anything else is opened as a file or named pipe.
  void consume_source(const std::string& source);

  // Waits until every queued event has been processed.
  void drain();
  void stop();

  std::uint64_t processed() const { return processed_.load(); }
  std::uint64_t scheduled() const { return scheduled_.load(); }

 private:
  void run();

  ScoringService& service_;
  PrecacheConfig config_;
  std::size_t capacity_;
  std::mutex mutex_;
  std::condition_variable ready_;
  std::condition_variable idle_;
  std::deque<PrecacheEvent> queue_;
  bool busy_ = false;
  bool stopping_ = false;
  std::atomic<std::uint64_t> processed_{0};
  std::atomic<std::uint64_t> scheduled_{0};
  std::thread consumer_;
};

}  // namespace scorehub
