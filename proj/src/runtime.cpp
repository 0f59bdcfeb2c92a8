#include "scorehub/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "scorehub/statistics.hpp"

namespace scorehub {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string ScoreJobKey::str() const {
  return context_id + ":" + model_name + ":" + model_version + ":" +
         std::to_string(revision_id);
}

namespace {

constexpr std::pair<Counter, const char*> kCounterNames[] = {
    {Counter::kScoresRequested, "scores_requested"},
    {Counter::kCacheHits, "cache_hits"},
    {Counter::kCacheMisses, "cache_misses"},
    {Counter::kDedupMerges, "dedup_merges"},
    {Counter::kPrecacheRequests, "precache_requests"},
    {Counter::kDroppedEvents, "dropped_events"},
    {Counter::kMalformedEvents, "malformed_events"},
};

// Nearest-rank percentile of sorted samples.
double percentile(const std::vector<double>& sorted, double q) {
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

std::string format_number(double x) {
  std::ostringstream out;
  out.precision(9);
  out << x;
  return out.str();
}

}  // namespace

void MetricsRegistry::add(Counter counter, std::uint64_t n) {
  std::lock_guard lock(mutex_);
  counters_[counter] += n;
}

void MetricsRegistry::count_error(ErrorCode code) {
  std::lock_guard lock(mutex_);
  ++errors_[std::string(to_string(code))];
}

void MetricsRegistry::record_score_duration(std::chrono::duration<double> elapsed) {
  double seconds = elapsed.count();
  std::lock_guard lock(mutex_);
  if (samples_.size() < kLatencyWindow) {
    samples_.push_back(seconds);
  } else {
    samples_[next_sample_] = seconds;
  }
  next_sample_ = (next_sample_ + 1) % kLatencyWindow;
  if (sample_count_ == 0) {
    min_ = max_ = seconds;
  } else {
    min_ = std::min(min_, seconds);
    max_ = std::max(max_, seconds);
  }
  ++sample_count_;
}

std::uint64_t MetricsRegistry::get(Counter counter) const {
  std::lock_guard lock(mutex_);
  auto it = counters_.find(counter);
  return it == counters_.end() ? 0 : it->second;
}

std::uint64_t MetricsRegistry::errors(ErrorCode code) const {
  std::lock_guard lock(mutex_);
  auto it = errors_.find(std::string(to_string(code)));
  return it == errors_.end() ? 0 : it->second;
}

LatencySummary MetricsRegistry::summarize_locked() const {
  LatencySummary s;
  s.count = sample_count_;
  if (samples_.empty()) return s;
  auto sorted = samples_;
  std::sort(sorted.begin(), sorted.end());
  s.min = min_;
  s.max = max_;
  s.p50 = percentile(sorted, 0.50);
  s.p75 = percentile(sorted, 0.75);
  s.p95 = percentile(sorted, 0.95);
  return s;
}

LatencySummary MetricsRegistry::score_duration() const {
  std::lock_guard lock(mutex_);
  return summarize_locked();
}

std::string MetricsRegistry::snapshot() const {
  std::lock_guard lock(mutex_);
  std::ostringstream out;
  for (const auto& [counter, name] : kCounterNames) {
    auto it = counters_.find(counter);
    out << name << ' ' << (it == counters_.end() ? 0 : it->second) << '\n';
  }
  for (const auto& [type, count] : errors_) {
    out << "errors_by_type{type=\"" << type << "\"} " << count << '\n';
  }
  auto s = summarize_locked();
  out << "score_duration_seconds_count " << s.count << '\n';
  out << "score_duration_seconds_min " << format_number(s.min) << '\n';
  out << "score_duration_seconds{quantile=\"0.5\"} " << format_number(s.p50) << '\n';
  out << "score_duration_seconds{quantile=\"0.75\"} " << format_number(s.p75) << '\n';
  out << "score_duration_seconds{quantile=\"0.95\"} " << format_number(s.p95) << '\n';
  out << "score_duration_seconds_max " << format_number(s.max) << '\n';
  return out.str();
}

ordered_json ScoresResponse::to_json() const {
  ordered_json models = ordered_json::object();
  for (const auto& [name, version] : model_versions) models[name] = {{"version", version}};
  ordered_json cells = ordered_json::object();
  for (const auto& [rev, row] : scores) {
    ordered_json by_model = ordered_json::object();
    for (const auto& [name, result] : row) by_model[name] = scorehub::to_json(result);
    cells[std::to_string(rev)] = std::move(by_model);
  }
  ordered_json body = {{"models", std::move(models)}, {"scores", std::move(cells)}};
  return {{context, std::move(body)}};
}

namespace {

std::size_t resolve_cpu_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

ScoringService::ScoringService(std::shared_ptr<ModelRegistry> registry,
                               std::shared_ptr<const DatasourceClient> client,
                               ServiceOptions options)
    : registry_(registry),
      options_(options),
      io_(std::make_unique<WorkerPool>("io", options.io_workers, options.queue_capacity)),
      cpu_(std::make_unique<WorkerPool>("cpu", resolve_cpu_workers(options.cpu_workers),
                                        options.queue_capacity)),
      engine_(std::move(registry), std::move(client), options.scoring),
      cache_(options.cache_capacity) {
  engine_.set_pools(io_.get(), cpu_.get());
}

ScoringService::~ScoringService() {
  // Pools drain before the engine and cache they reference go away.
  cpu_.reset();
  io_.reset();
}

void ScoringService::note_result(const ScoreResult& result) {
  if (const auto* error = std::get_if<ErrorDocument>(&result)) metrics_.count_error(error->code);
}

ScoreResult ScoringService::cached_score(const ScoreJobKey& key,
                                         const std::function<ScoreResult()>& compute) {
  auto name = key.str();
  if (auto hit = cache_.get(name)) {
    metrics_.add(Counter::kCacheHits);
    return *hit;
  }
  metrics_.add(Counter::kCacheMisses);
  auto outcome = flights_.run(name, [&] {
    auto result = compute();
    if (const auto* doc = std::get_if<ScoreDocument>(&result)) cache_.put(name, *doc);
    return result;
  });
  if (outcome.shared) metrics_.add(Counter::kDedupMerges);
  return std::move(outcome.value);
}

ScoreResult ScoringService::score_pinned(const ModelRegistry::ModelPtr& model,
                                         std::int64_t revision_id, bool include_features) {
  ScoreJobKey key{model->context, model->name, model->version, revision_id};
  // Cached documents always carry features; callers that did not ask for
  // them get a trimmed copy.
  auto result = cached_score(key, [&] {
    return engine_.score_model(*model, revision_id, {}, true);
  });
  if (auto* doc = std::get_if<ScoreDocument>(&result); doc && !include_features) {
    doc->features.reset();
  }
  return result;
}

ScoreResult ScoringService::score(const std::string& context, const std::string& model_name,
                                  std::int64_t revision_id, const RawOverlay& overlay,
                                  bool include_features) {
  ScoreRequest request{context, {model_name}, {revision_id}, overlay, include_features};
  auto response = scores(request);
  return response.scores.at(revision_id).at(model_name);
}

ScoresResponse ScoringService::scores(const ScoreRequest& request) {
  request.validate();
  if (!registry_->has_context(request.context_id)) {
    throw Error(ErrorCode::kContextNotFound,
                "no models for context '" + request.context_id + "'");
  }
  std::vector<std::int64_t> ids;
  for (auto id : request.revision_ids) {
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  std::vector<std::string> names;
  for (const auto& name : request.model_names) {
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
  }

  ScoresResponse response;
  response.context = request.context_id;
  std::vector<ModelRegistry::ModelPtr> models(names.size());
  std::vector<std::optional<ErrorDocument>> missing(names.size());
  std::vector<InjectionOverlay> overlays(names.size());
  for (std::size_t m = 0; m < names.size(); ++m) {
    try {
      models[m] = registry_->get(request.context_id, names[m]);
      response.model_versions[names[m]] = models[m]->version;
      overlays[m] = ScoringEngine::overlay_for(*models[m], request.overlay);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kModelNotFound) throw;
      missing[m] = error_document(e);
    }
  }
  metrics_.add(Counter::kScoresRequested, ids.size() * names.size());

  auto place = [&](std::int64_t rev, std::size_t m, ScoreResult result) {
    note_result(result);
    response.scores[rev].insert_or_assign(names[m], std::move(result));
  };

  if (ids.size() == 1) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      if (missing[m]) {
        place(ids[0], m, *missing[m]);
        continue;
      }
      auto start = Clock::now();
      ScoreResult result =
          request.overlay.empty()
              ? score_pinned(models[m], ids[0], request.include_features)
              : engine_.score_model(*models[m], ids[0], overlays[m], request.include_features);
      metrics_.record_score_duration(Clock::now() - start);
      place(ids[0], m, std::move(result));
    }
    return response;
  }

  // Batch: answer what the cache can, then one IO round trip for the rest.
  std::vector<std::int64_t> fetch_ids;
  std::vector<ScoringEngine::Cell> cells;
  std::vector<std::pair<std::int64_t, std::size_t>> cell_keys;
  for (auto rev : ids) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      if (missing[m]) {
        place(rev, m, *missing[m]);
        continue;
      }
      ScoreJobKey key{models[m]->context, models[m]->name, models[m]->version, rev};
      if (auto hit = cache_.get(key.str())) {
        metrics_.add(Counter::kCacheHits);
        if (!request.include_features) hit->features.reset();
        place(rev, m, std::move(*hit));
        continue;
      }
      metrics_.add(Counter::kCacheMisses);
      if (fetch_ids.empty() || fetch_ids.back() != rev) fetch_ids.push_back(rev);
      cells.push_back({fetch_ids.size() - 1, models[m].get()});
      cell_keys.emplace_back(rev, m);
    }
  }
  if (!cells.empty()) {
    auto results = engine_.score_cells(request.context_id, fetch_ids, cells, true);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto [rev, m] = cell_keys[i];
      if (auto* doc = std::get_if<ScoreDocument>(&results[i])) {
        ScoreJobKey key{models[m]->context, models[m]->name, models[m]->version, rev};
        cache_.put(key.str(), *doc);
        if (!request.include_features) doc->features.reset();
      }
      place(rev, m, std::move(results[i]));
    }
  }
  return response;
}

void ScoringService::precache(const std::string& context, const std::string& model_name,
                              std::int64_t revision_id) {
  metrics_.add(Counter::kPrecacheRequests);
  auto model = registry_->get(context, model_name);
  score_pinned(model, revision_id, false);
}

ordered_json ScoringService::model_info(const std::string& context,
                                        const std::string& model_name,
                                        std::string_view field_path) const {
  return scorehub::model_info(*registry_->get(context, model_name), field_path);
}

}  // namespace scorehub
