#include "scorehub/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "scorehub/statistics.hpp"
#include "scorehub/training.hpp"

namespace scorehub {

using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

ordered_json to_json(const ScoreDocument& doc) {
  ordered_json probability = ordered_json::object();
  for (const auto& [label, p] : doc.probability) probability[label] = p;
  ordered_json out = {{"prediction", label_to_json(doc.prediction)},
                      {"probability", std::move(probability)}};
  if (doc.features) {
    ordered_json features = ordered_json::object();
    for (const auto& [name, value] : *doc.features) features[name] = to_json(value);
    out["features"] = std::move(features);
  }
  return out;
}

ordered_json to_json(const ErrorDocument& doc) {
  return {{"type", std::string(to_string(doc.code))}, {"message", doc.message}};
}

ordered_json to_json(const ScoreResult& result) {
  if (const auto* doc = std::get_if<ScoreDocument>(&result)) {
    return {{"score", to_json(*doc)}};
  }
  return {{"error", to_json(std::get<ErrorDocument>(result))}};
}

ErrorDocument error_document(const Error& error) { return {error.code(), error.what()}; }

ScoreDocument make_score_document(const std::vector<std::string>& labels,
                                  const std::vector<double>& probabilities) {
  if (labels.empty() || labels.size() != probabilities.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "score document needs one probability per label");
  }
  ScoreDocument doc;
  std::size_t best = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    doc.probability.emplace_back(labels[i], probabilities[i]);
    if (probabilities[i] > probabilities[best]) best = i;
  }
  doc.prediction = labels[best];
  return doc;
}

ScoreDocument without_features(ScoreDocument doc) {
  doc.features.reset();
  return doc;
}

void ScoreRequest::validate() const {
  if (context_id.empty()) throw Error(ErrorCode::kMalformedRequest, "context is required");
  if (model_names.empty()) {
    throw Error(ErrorCode::kMalformedRequest, "at least one model is required");
  }
  if (revision_ids.empty()) {
    throw Error(ErrorCode::kMalformedRequest, "at least one revision id is required");
  }
  if (!overlay.empty() && revision_ids.size() != 1) {
    throw Error(ErrorCode::kMalformedRequest,
                "feature injection needs exactly one revision id");
  }
}

ScoringEngine::ScoringEngine(std::shared_ptr<const ModelRegistry> registry,
                             std::shared_ptr<const DatasourceClient> client,
                             ScoringOptions options)
    : registry_(std::move(registry)), client_(std::move(client)), options_(options) {
  if (!registry_ || !client_) {
    throw Error(ErrorCode::kInvalidParams, "scoring engine needs a registry and a client");
  }
}

InjectionOverlay ScoringEngine::overlay_for(const Model& model, const RawOverlay& raw) {
  if (raw.empty()) return {};
  return model.graph->make_overlay(raw);
}

namespace {

std::variant<RevisionRecord, ErrorDocument> fetch_now(const DatasourceClient& client,
                                                      const std::string& context,
                                                      std::int64_t revision_id) {
  try {
    return client.get_revision(context, revision_id);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kRevisionNotFound) return error_document(e);
    return ErrorDocument{ErrorCode::kDatasourceError, e.what()};
  } catch (const std::exception& e) {
    return ErrorDocument{ErrorCode::kDatasourceError, e.what()};
  }
}

}  // namespace

std::variant<RevisionRecord, ErrorDocument> ScoringEngine::fetch(
    const std::string& context, std::int64_t revision_id, Clock::time_point deadline) const {
  if (io_ == nullptr) return fetch_now(*client_, context, revision_id);
  // The task owns everything it touches so a timed-out fetch can finish late.
  auto future = io_->submit([client = client_, context, revision_id] {
    return fetch_now(*client, context, revision_id);
  });
  if (future.wait_until(deadline) != std::future_status::ready) {
    return ErrorDocument{ErrorCode::kTimeoutError,
                         "fetching revision " + std::to_string(revision_id) +
                             " exceeded the scoring budget"};
  }
  return future.get();
}

ScoreResult ScoringEngine::score_record(const Model& model, const RevisionRecord& record,
                                        const InjectionOverlay& overlay,
                                        bool include_features,
                                        Clock::time_point deadline) const {
  ++extractions_;
  ExtractionContext ctx;
  ctx.context_id = record.context_id;
  ctx.revision_id = record.revision_id;
  ctx.datasource_client = client_.get();
  ctx.overlay = overlay;
  ctx.record = record;
  ctx.deadline = deadline;
  try {
    auto values = extract_many(*model.graph, ctx, model.feature_names());
    auto probabilities = model.estimator.predict_proba(to_feature_vector(values));
    auto doc = make_score_document(model.label_set(), probabilities);
    if (include_features) {
      doc.features.emplace();
      const auto& names = model.feature_names();
      for (std::size_t i = 0; i < names.size(); ++i) {
        doc.features->emplace_back(names[i], values[i]);
      }
    }
    return doc;
  } catch (const Error& e) {
    return error_document(e);
  } catch (const std::exception& e) {
    return ErrorDocument{ErrorCode::kInternalError, e.what()};
  }
}

ScoreResult ScoringEngine::score_model(const Model& model, std::int64_t revision_id,
                                       const InjectionOverlay& overlay,
                                       bool include_features) const {
  auto deadline = Clock::now() + options_.timeout;
  auto fetched = fetch(model.context, revision_id, deadline);
  if (auto* error = std::get_if<ErrorDocument>(&fetched)) return *error;
  const auto& record = std::get<RevisionRecord>(fetched);
  if (cpu_ == nullptr) return score_record(model, record, overlay, include_features, deadline);
  return cpu_
      ->submit([&] { return score_record(model, record, overlay, include_features, deadline); })
      .get();
}

ScoreResult ScoringEngine::score_one(const std::string& context,
                                     const std::string& model_name,
                                     std::int64_t revision_id, const RawOverlay& overlay,
                                     bool include_features) const {
  ModelRegistry::ModelPtr model;
  try {
    model = registry_->get(context, model_name);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kModelNotFound) return error_document(e);
    throw;
  }
  return score_model(*model, revision_id, overlay_for(*model, overlay), include_features);
}

std::vector<RevisionResult> ScoringEngine::fetch_batch(
    const std::string& context, const std::vector<std::int64_t>& ids) const {
  if (io_ == nullptr) return client_->get_revisions_batch(context, ids);
  return io_->submit([client = client_, context, ids] {
              return client->get_revisions_batch(context, ids);
            })
      .get();
}

BatchResult ScoringEngine::score_batch(const ScoreRequest& request) const {
  request.validate();
  if (!request.overlay.empty()) {
    throw Error(ErrorCode::kMalformedRequest,
                "feature injection is not supported on the batch path");
  }
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
  std::vector<std::variant<ModelRegistry::ModelPtr, ErrorDocument>> models;
  for (const auto& name : names) {
    try {
      models.emplace_back(registry_->get(request.context_id, name));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kModelNotFound) throw;
      models.emplace_back(error_document(e));
    }
  }

  std::vector<Cell> cells;
  std::vector<std::size_t> cell_index(ids.size() * names.size(), SIZE_MAX);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    for (std::size_t m = 0; m < names.size(); ++m) {
      if (const auto* model = std::get_if<ModelRegistry::ModelPtr>(&models[m])) {
        cell_index[r * names.size() + m] = cells.size();
        cells.push_back({r, model->get()});
      }
    }
  }
  auto scored = score_cells(request.context_id, ids, cells, request.include_features);

  BatchResult result;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    auto& row = result[ids[r]];
    for (std::size_t m = 0; m < names.size(); ++m) {
      auto c = cell_index[r * names.size() + m];
      if (c == SIZE_MAX) {
        row.emplace(names[m], std::get<ErrorDocument>(models[m]));
      } else {
        row.emplace(names[m], std::move(scored[c]));
      }
    }
  }
  return result;
}

std::vector<ScoreResult> ScoringEngine::score_cells(const std::string& context,
                                                    const std::vector<std::int64_t>& ids,
                                                    const std::vector<Cell>& cells,
                                                    bool include_features) const {
  // IO stage: one round trip for the whole request.
  std::vector<std::variant<RevisionRecord, ErrorDocument>> records;
  records.reserve(ids.size());
  try {
    for (auto& fetched : fetch_batch(context, ids)) {
      if (auto* record = std::get_if<RevisionRecord>(&fetched)) {
        records.emplace_back(std::move(*record));
      } else {
        const auto& e = std::get<Error>(fetched);
        if (e.code() == ErrorCode::kRevisionNotFound) {
          records.emplace_back(error_document(e));
        } else {
          records.emplace_back(ErrorDocument{ErrorCode::kDatasourceError, e.what()});
        }
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kLoadShed) throw;
    records.assign(ids.size(), ErrorDocument{ErrorCode::kDatasourceError, e.what()});
  } catch (const std::exception& e) {
    records.assign(ids.size(), ErrorDocument{ErrorCode::kDatasourceError, e.what()});
  }

  // CPU stage.
  std::vector<ScoreResult> results(cells.size());
  parallel_for(cpu_, cells.size(), [&](std::size_t i) {
    const auto& record = records.at(cells[i].revision_index);
    if (const auto* error = std::get_if<ErrorDocument>(&record)) {
      results[i] = *error;
    } else {
      results[i] = score_record(*cells[i].model, std::get<RevisionRecord>(record), {},
                                include_features, Clock::now() + options_.timeout);
    }
  });
  return results;
}

ordered_json AuditSummary::to_json() const {
  ordered_json bins = ordered_json::array();
  for (std::size_t i = 0; i < kAuditBins; ++i) {
    bins.push_back({{"lower", static_cast<double>(i) / kAuditBins},
                    {"upper", static_cast<double>(i + 1) / kAuditBins},
                    {"count", histogram[i]}});
  }
  ordered_json error_counts = ordered_json::object();
  for (const auto& [type, count] : errors) error_counts[type] = count;
  return {{"target", label_to_json(target_label)},
          {"scored", scored},
          {"mean", mean},
          {"median", median},
          {"errors", std::move(error_counts)},
          {"histogram", std::move(bins)}};
}

AuditSummary audit_inject(const ScoringEngine& engine, const Model& model,
                          const std::vector<std::int64_t>& revision_ids,
                          const RawOverlay& overlay, std::string target_label) {
  const auto& labels = model.label_set();
  if (target_label.empty()) {
    target_label =
        std::find(labels.begin(), labels.end(), "true") != labels.end() ? "true" : labels[0];
  }
  auto target = std::find(labels.begin(), labels.end(), target_label);
  if (target == labels.end()) {
    throw Error(ErrorCode::kUnknownLabel,
                "model '" + model.name + "' has no label '" + target_label + "'");
  }
  auto target_index = static_cast<std::size_t>(target - labels.begin());
  auto typed = ScoringEngine::overlay_for(model, overlay);

  auto fetched = engine.fetch_batch(model.context, revision_ids);
  std::vector<ScoreResult> results(revision_ids.size());
  for (std::size_t i = 0; i < fetched.size(); ++i) {
    if (const auto* e = std::get_if<Error>(&fetched[i])) results[i] = error_document(*e);
  }
  auto budget = engine.options().timeout;
  parallel_for(engine.cpu_pool(), results.size(), [&](std::size_t i) {
    if (const auto* record = std::get_if<RevisionRecord>(&fetched[i])) {
      results[i] = engine.score_record(model, *record, typed, false, Clock::now() + budget);
    }
  });

  AuditSummary summary;
  summary.target_label = target_label;
  for (const auto& result : results) {
    if (const auto* error = std::get_if<ErrorDocument>(&result)) {
      ++summary.errors[std::string(to_string(error->code))];
      continue;
    }
    double p = std::get<ScoreDocument>(result).probability[target_index].second;
    summary.probabilities.push_back(p);
    auto bin = static_cast<std::size_t>(std::floor(p * kAuditBins));
    ++summary.histogram[std::min(bin, kAuditBins - 1)];
  }
  summary.scored = summary.probabilities.size();
  if (summary.scored > 0) {
    const auto& ps = summary.probabilities;
    summary.mean = std::accumulate(ps.begin(), ps.end(), 0.0) / static_cast<double>(ps.size());
    auto sorted = ps;
    std::sort(sorted.begin(), sorted.end());
    std::size_t mid = sorted.size() / 2;
    summary.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  }
  return summary;
}

}  // namespace scorehub
