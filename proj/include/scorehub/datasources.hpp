#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "scorehub/error.hpp"

namespace scorehub {

struct RevisionRecord {
  std::int64_t revision_id = 0;
  std::string context_id;
  std::string text;
  std::string parent_text;
  bool user_is_anon = false;
  std::int64_t user_account_age_seconds = 0;
  std::int64_t timestamp = 0;

  bool operator==(const RevisionRecord&) const = default;
};

nlohmann::json to_json(const RevisionRecord& record);
// Requires exactly the RevisionRecord fields; throws kMalformedRequest.
RevisionRecord revision_from_json(const nlohmann::json& doc);

// Either a fetched record or the per-item error that replaced it.
using RevisionResult = std::variant<RevisionRecord, Error>;

// Fetches root data for scoring. Implementations must tolerate concurrent
// calls from any number of threads.
class DatasourceClient {
 public:
  virtual ~DatasourceClient() = default;

  // Throws kRevisionNotFound or kUpstreamError.
  virtual RevisionRecord get_revision(const std::string& context_id,
                                      std::int64_t revision_id) const = 0;

  // One result per id, in input order. Missing ids are embedded as
  // kRevisionNotFound; only I/O failure throws.
  virtual std::vector<RevisionResult> get_revisions_batch(
      const std::string& context_id,
      const std::vector<std::int64_t>& revision_ids) const = 0;

  virtual bool has_context(const std::string& context_id) const = 0;
};

// Serves revisions from newline-delimited JSON fixture files. Every `*.ndjson`
// or `*.jsonl` file under the root is loaded into a read-only index.
class FixtureClient final : public DatasourceClient {
 public:
  struct Options {
    // Charged once per physical fetch, so a batch pays it once.
    std::chrono::milliseconds simulated_latency{0};
  };

  explicit FixtureClient(std::vector<RevisionRecord> records);
  FixtureClient(std::vector<RevisionRecord> records, Options options);

  static std::shared_ptr<FixtureClient> from_directory(
      const std::filesystem::path& root);
  static std::shared_ptr<FixtureClient> from_directory(
      const std::filesystem::path& root, Options options);

  RevisionRecord get_revision(const std::string& context_id,
                              std::int64_t revision_id) const override;
  std::vector<RevisionResult> get_revisions_batch(
      const std::string& context_id,
      const std::vector<std::int64_t>& revision_ids) const override;
  bool has_context(const std::string& context_id) const override;

  void set_simulated_latency(std::chrono::milliseconds latency) {
    latency_ms_.store(latency.count());
  }

  // Number of physical fetches (single or batch) served so far.
  std::uint64_t fetch_count() const { return fetches_.load(); }
  std::size_t size() const { return index_.size(); }
  std::vector<std::int64_t> revision_ids(const std::string& context_id) const;

 private:
  void charge_fetch() const;

  std::map<std::pair<std::string, std::int64_t>, RevisionRecord> index_;
  std::atomic<std::int64_t> latency_ms_{0};
  mutable std::atomic<std::uint64_t> fetches_{0};
};

// Every fixture record under `root`, in sorted file order.
std::vector<RevisionRecord> load_fixture_directory(
    const std::filesystem::path& root);

// Reads one fixture file; line numbers are reported on malformed records.
std::vector<RevisionRecord> read_revision_fixtures(
    const std::filesystem::path& file);

void write_revision_fixtures(const std::filesystem::path& file,
                             const std::vector<RevisionRecord>& records);

}  // namespace scorehub
