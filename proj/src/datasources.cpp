#include "scorehub/datasources.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <thread>

namespace scorehub {

namespace {

constexpr const char* kRecordFields[] = {
    "revision_id", "context_id",   "text",
    "parent_text", "user_is_anon", "user_account_age_seconds",
    "timestamp"};

Error not_found(const std::string& context_id, std::int64_t revision_id) {
  return Error(ErrorCode::kRevisionNotFound,
               "revision " + std::to_string(revision_id) +
                   " not found in context '" + context_id + "'");
}

}  // namespace

nlohmann::json to_json(const RevisionRecord& record) {
  nlohmann::json doc = nlohmann::json::object();
  doc["revision_id"] = record.revision_id;
  doc["context_id"] = record.context_id;
  doc["text"] = record.text;
  doc["parent_text"] = record.parent_text;
  doc["user_is_anon"] = record.user_is_anon;
  doc["user_account_age_seconds"] = record.user_account_age_seconds;
  doc["timestamp"] = record.timestamp;
  return doc;
}

RevisionRecord revision_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) {
    throw Error(ErrorCode::kMalformedRequest, "revision record is not an object");
  }
  for (const char* field : kRecordFields) {
    if (!doc.contains(field)) {
      throw Error(ErrorCode::kMalformedRequest,
                  std::string("revision record missing field '") + field + "'");
    }
  }
  if (doc.size() != std::size(kRecordFields)) {
    throw Error(ErrorCode::kMalformedRequest,
                "revision record has unexpected fields");
  }
  try {
    RevisionRecord record;
    record.revision_id = doc.at("revision_id").get<std::int64_t>();
    record.context_id = doc.at("context_id").get<std::string>();
    record.text = doc.at("text").get<std::string>();
    record.parent_text = doc.at("parent_text").get<std::string>();
    record.user_is_anon = doc.at("user_is_anon").get<bool>();
    record.user_account_age_seconds =
        doc.at("user_account_age_seconds").get<std::int64_t>();
    record.timestamp = doc.at("timestamp").get<std::int64_t>();
    if (record.user_account_age_seconds < 0 || record.revision_id < 0) {
      throw Error(ErrorCode::kMalformedRequest,
                  "revision_id and user_account_age_seconds must be >= 0");
    }
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRequest,
                std::string("bad revision record: ") + e.what());
  }
}

std::vector<RevisionRecord> read_revision_fixtures(
    const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) {
    throw Error(ErrorCode::kUpstreamError, "cannot open " + file.string());
  }
  std::vector<RevisionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(revision_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kUpstreamError,
                  file.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void write_revision_fixtures(const std::filesystem::path& file,
                             const std::vector<RevisionRecord>& records) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + file.string());
  for (const auto& record : records) out << to_json(record).dump() << '\n';
}

FixtureClient::FixtureClient(std::vector<RevisionRecord> records)
    : FixtureClient(std::move(records), Options{}) {}

FixtureClient::FixtureClient(std::vector<RevisionRecord> records,
                             Options options)
    : latency_ms_(options.simulated_latency.count()) {
  for (auto& record : records) {
    auto key = std::make_pair(record.context_id, record.revision_id);
    if (index_.count(key)) {
      throw Error(ErrorCode::kDuplicateRevision,
                  "duplicate fixture revision " +
                      std::to_string(record.revision_id) + " in context '" +
                      record.context_id + "'");
    }
    index_.emplace(std::move(key), std::move(record));
  }
}

std::vector<RevisionRecord> load_fixture_directory(
    const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) {
    throw Error(ErrorCode::kUpstreamError,
                "fixture root '" + root.string() + "' is not a directory");
  }
  // Sorted for a deterministic load order.
  std::set<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".ndjson" || ext == ".jsonl")) {
      files.insert(entry.path());
    }
  }
  std::vector<RevisionRecord> records;
  for (const auto& file : files) {
    auto part = read_revision_fixtures(file);
    records.insert(records.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return records;
}

std::shared_ptr<FixtureClient> FixtureClient::from_directory(
    const std::filesystem::path& root) {
  return from_directory(root, Options{});
}

std::shared_ptr<FixtureClient> FixtureClient::from_directory(
    const std::filesystem::path& root, Options options) {
  return std::make_shared<FixtureClient>(load_fixture_directory(root), options);
}

void FixtureClient::charge_fetch() const {
  fetches_.fetch_add(1);
  auto latency = latency_ms_.load();
  if (latency > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(latency));
  }
}

RevisionRecord FixtureClient::get_revision(const std::string& context_id,
                                           std::int64_t revision_id) const {
  charge_fetch();
  auto it = index_.find({context_id, revision_id});
  if (it == index_.end()) throw not_found(context_id, revision_id);
  return it->second;
}

std::vector<RevisionResult> FixtureClient::get_revisions_batch(
    const std::string& context_id,
    const std::vector<std::int64_t>& revision_ids) const {
  if (revision_ids.empty()) {
    throw Error(ErrorCode::kMalformedRequest, "empty revision batch");
  }
  charge_fetch();
  std::vector<RevisionResult> results;
  results.reserve(revision_ids.size());
  for (auto id : revision_ids) {
    auto it = index_.find({context_id, id});
    if (it == index_.end()) {
      results.emplace_back(not_found(context_id, id));
    } else {
      results.emplace_back(it->second);
    }
  }
  return results;
}

bool FixtureClient::has_context(const std::string& context_id) const {
  auto it = index_.lower_bound({context_id, INT64_MIN});
  return it != index_.end() && it->first.first == context_id;
}

std::vector<std::int64_t> FixtureClient::revision_ids(
    const std::string& context_id) const {
  std::vector<std::int64_t> ids;
  for (auto it = index_.lower_bound({context_id, INT64_MIN});
       it != index_.end() && it->first.first == context_id; ++it) {
    ids.push_back(it->first.second);
  }
  return ids;
}

}  // namespace scorehub
