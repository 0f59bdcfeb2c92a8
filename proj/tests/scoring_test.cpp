#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "scorehub/scoring.hpp"
#include "test_fixtures.hpp"

using namespace scorehub;
using namespace std::chrono_literals;

namespace {

std::shared_ptr<ModelRegistry> fixture_registry() {
  const auto& w = fixtures::world();
  auto registry = std::make_shared<ModelRegistry>();
  registry->put(w.damaging);
  registry->put(w.damaging_linear);
  registry->put(w.articlequality);
  return registry;
}

// Type invariants of a score document.
void expect_valid(const ScoreResult& result, const std::vector<std::string>& labels) {
  ASSERT_FALSE(is_error(result)) << to_json(result).dump();
  const auto& doc = std::get<ScoreDocument>(result);
  ASSERT_EQ(doc.probability.size(), labels.size());
  double total = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    EXPECT_EQ(doc.probability[i].first, labels[i]);
    EXPECT_GE(doc.probability[i].second, 0.0);
    total += doc.probability[i].second;
    if (doc.probability[i].second > doc.probability[best].second) best = i;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_EQ(doc.prediction, labels[best]);
}

ErrorCode error_code(const ScoreResult& result) {
  return std::get<ErrorDocument>(result).code;
}

// A client that fails one revision with an upstream error.
class PoisonClient final : public DatasourceClient {
 public:
  PoisonClient(std::shared_ptr<const DatasourceClient> inner, std::int64_t poisoned)
      : inner_(std::move(inner)), poisoned_(poisoned) {}

  RevisionRecord get_revision(const std::string& context, std::int64_t id) const override {
    if (id == poisoned_) throw Error(ErrorCode::kUpstreamError, "backend exploded");
    return inner_->get_revision(context, id);
  }
  std::vector<RevisionResult> get_revisions_batch(
      const std::string& context, const std::vector<std::int64_t>& ids) const override {
    auto out = inner_->get_revisions_batch(context, ids);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == poisoned_) out[i] = Error(ErrorCode::kUpstreamError, "backend exploded");
    }
    return out;
  }
  bool has_context(const std::string& context) const override {
    return inner_->has_context(context);
  }

 private:
  std::shared_ptr<const DatasourceClient> inner_;
  std::int64_t poisoned_;
};

std::vector<std::int64_t> sample_ids(const synthetic::Corpus& corpus, std::size_t n,
                                     std::uint64_t seed) {
  std::vector<std::int64_t> ids;
  for (const auto& rec : corpus.revisions) ids.push_back(rec.revision_id);
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(n, ids.size()));
  return ids;
}

}  // namespace

TEST(ScoreDocumentTest, ArticleQualityShape) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  // The corpus cycles Stub..FA, so index 5 is a long, referenced FA article.
  auto rev = w.articles.revisions[5].revision_id;
  auto result = engine.score_one("enwiki", "articlequality", rev);
  expect_valid(result, synthetic::kQualityClasses);
  auto doc = to_json(result);
  ASSERT_TRUE(doc.contains("score"));
  std::vector<std::string> keys;
  for (const auto& [k, v] : doc["score"].items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"prediction", "probability"}));
  std::vector<std::string> classes;
  for (const auto& [k, v] : doc["score"]["probability"].items()) classes.push_back(k);
  EXPECT_EQ(classes, synthetic::kQualityClasses);
  EXPECT_TRUE(doc["score"]["prediction"].is_string());
}

TEST(ScoreDocumentTest, BooleanPredictionsAndTieBreak) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  auto result = engine.score_one("enwiki", "damaging", w.edits.revisions[0].revision_id);
  expect_valid(result, {"true", "false"});
  EXPECT_TRUE(to_json(result)["score"]["prediction"].is_boolean());

  auto tie = make_score_document({"a", "b", "c"}, {0.4, 0.4, 0.2});
  EXPECT_EQ(tie.prediction, "a");
  auto later = make_score_document({"a", "b", "c"}, {0.2, 0.4, 0.4});
  EXPECT_EQ(later.prediction, "b");
}

TEST(ScoreOneTest, ErrorsAreDocuments) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  auto rev = w.edits.revisions[0].revision_id;
  auto unknown = engine.score_one("enwiki", "goodfaith", rev);
  EXPECT_EQ(error_code(unknown), ErrorCode::kModelNotFound);
  EXPECT_EQ(to_json(unknown)["error"]["type"], "ModelNotFound");
  EXPECT_EQ(error_code(engine.score_one("enwiki", "damaging", 42)),
            ErrorCode::kRevisionNotFound);
  EXPECT_THROW(engine.score_one("dewiki", "damaging", rev), Error);
  try {
    engine.score_one("enwiki", "damaging", rev, {{"feature.nonexistent", "1"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownDependent);
  }
  try {
    engine.score_one("enwiki", "damaging", rev, {{"feature.revision.user.is_anon", "1"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTypeMismatch);
  }
}

TEST(ScoreOneTest, TimeoutBecomesDocument) {
  const auto& w = fixtures::world();
  auto slow = std::make_shared<FixtureClient>(w.edits.revisions,
                                              FixtureClient::Options{50ms});
  ScoringEngine engine(fixture_registry(), slow, ScoringOptions{5ms});
  WorkerPool io("io", 1), cpu("cpu", 1);
  engine.set_pools(&io, &cpu);
  auto result = engine.score_one("enwiki", "damaging", w.edits.revisions[0].revision_id);
  EXPECT_EQ(error_code(result), ErrorCode::kTimeoutError);
}

TEST(InjectionTest, AnonOverlayChangesOnlyDownstreamFeatures) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  std::size_t moved = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    auto rev = w.edits.revisions[i].revision_id;
    auto registered = engine.score_one("enwiki", "damaging_linear", rev,
                                       {{"feature.revision.user.is_anon", "false"}}, true);
    auto anon = engine.score_one("enwiki", "damaging_linear", rev,
                                 {{"revision.user.is_anon", "true"}}, true);
    const auto& a = std::get<ScoreDocument>(registered);
    const auto& b = std::get<ScoreDocument>(anon);
    ASSERT_EQ(a.features->size(), b.features->size());
    for (std::size_t f = 0; f < a.features->size(); ++f) {
      const auto& [name, value] = (*a.features)[f];
      if (name == "revision.user.is_anon") {
        EXPECT_EQ(value, Value(false));
        EXPECT_EQ((*b.features)[f].second, Value(true));
      } else {
        EXPECT_EQ(value, (*b.features)[f].second) << name;
      }
    }
    double pa = a.probability[0].second, pb = b.probability[0].second;
    if (pb > pa) ++moved;
  }
  // The linear model leans on is_anon, so claiming anonymity raises the
  // damaging probability on every edit.
  EXPECT_EQ(moved, 40u);
}

TEST(InjectionTest, NaturalValuesReproduceTheDocument) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  const auto& model = *w.damaging;
  for (std::size_t i = 0; i < 25; ++i) {
    auto rev = w.edits.revisions[i * 7].revision_id;
    auto natural = to_json(engine.score_one("enwiki", "damaging", rev, {}, true)).dump();
    // Solve every node naturally, then inject each one back.
    ExtractionContext ctx;
    ctx.context_id = "enwiki";
    ctx.revision_id = rev;
    ctx.datasource_client = w.client.get();
    for (const auto& name : model.graph->names()) {
      Value value = solve(*model.graph, ctx, name);
      InjectionOverlay overlay{{name, value}};
      auto injected = engine.score_model(model, rev, overlay, true);
      EXPECT_EQ(to_json(injected).dump(), natural) << name;
    }
  }
}

TEST(InjectionTest, NodesOutsideTheConeDoNotMatter) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  std::mt19937_64 rng(11);
  for (const auto& model : {w.damaging, w.damaging_linear, w.articlequality}) {
    auto cone = model->graph->dependency_cone(model->feature_names());
    std::vector<std::string> outside;
    for (const auto& name : model->graph->names()) {
      if (std::find(cone.begin(), cone.end(), name) == cone.end()) outside.push_back(name);
    }
    ASSERT_FALSE(outside.empty());
    for (std::size_t i = 0; i < 20; ++i) {
      auto rev = w.edits.revisions[i].revision_id;
      auto natural = to_json(engine.score_model(*model, rev, {}, true)).dump();
      for (const auto& name : outside) {
        Value value;
        switch (model->graph->at(name).value_type) {
          case ValueType::kBoolean: value = static_cast<bool>(rng() & 1); break;
          case ValueType::kInteger: value = static_cast<std::int64_t>(rng() % 100000); break;
          case ValueType::kReal: value = static_cast<double>(rng() % 1000) / 7.0; break;
          case ValueType::kText: value = std::string("injected ") + std::to_string(rng()); break;
        }
        auto injected = engine.score_model(*model, rev, {{name, value}}, true);
        EXPECT_EQ(to_json(injected).dump(), natural) << name;
      }
    }
  }
}

TEST(ScoreBatchTest, MatchesSequentialScoring) {
  const auto& w = fixtures::world();
  ScoringEngine sequential(fixture_registry(), w.client);
  ScoringEngine batched(fixture_registry(), w.client);
  WorkerPool io("io", 2), cpu("cpu", 3);
  batched.set_pools(&io, &cpu);

  ScoreRequest request;
  request.context_id = "enwiki";
  request.model_names = {"damaging", "articlequality", "goodfaith"};
  request.revision_ids = sample_ids(w.edits, 50, 3);
  request.revision_ids.push_back(99);  // missing
  request.include_features = true;
  auto result = batched.score_batch(request);
  ASSERT_EQ(result.size(), 51u);
  for (auto rev : request.revision_ids) {
    for (const auto& name : request.model_names) {
      auto expected = sequential.score_one("enwiki", name, rev, {}, true);
      EXPECT_EQ(to_json(result.at(rev).at(name)).dump(), to_json(expected).dump());
    }
  }
  EXPECT_EQ(error_code(result.at(99).at("damaging")), ErrorCode::kRevisionNotFound);
  EXPECT_EQ(error_code(result.at(request.revision_ids[0]).at("goodfaith")),
            ErrorCode::kModelNotFound);
}

TEST(ScoreBatchTest, ValidAndMissing) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  auto good = w.edits.revisions[3].revision_id;
  auto result = engine.score_batch({"enwiki", {"damaging"}, {good, 12345}, {}, false});
  ASSERT_EQ(result.size(), 2u);
  expect_valid(result.at(good).at("damaging"), {"true", "false"});
  EXPECT_EQ(error_code(result.at(12345).at("damaging")), ErrorCode::kRevisionNotFound);
}

TEST(ScoreBatchTest, RequestLevelErrors) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  auto rev = w.edits.revisions[0].revision_id;
  auto code = [&](const ScoreRequest& request) {
    try {
      engine.score_batch(request);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternalError;
  };
  EXPECT_EQ(code({"enwiki", {}, {rev}, {}, false}), ErrorCode::kMalformedRequest);
  EXPECT_EQ(code({"enwiki", {"damaging"}, {}, {}, false}), ErrorCode::kMalformedRequest);
  EXPECT_EQ(code({"enwiki", {"damaging"}, {rev}, {{"revision.user.is_anon", "true"}}, false}),
            ErrorCode::kMalformedRequest);
  EXPECT_EQ(code({"dewiki", {"damaging"}, {rev}, {}, false}), ErrorCode::kContextNotFound);
}

TEST(ScoreBatchTest, PoisonedRevisionIsIsolated) {
  const auto& w = fixtures::world();
  auto ids = sample_ids(w.edits, 30, 8);
  ScoringEngine clean(fixture_registry(), w.client);
  ScoringEngine poisoned(fixture_registry(), std::make_shared<PoisonClient>(w.client, ids[4]));
  WorkerPool cpu("cpu", 2);
  poisoned.set_pools(nullptr, &cpu);
  ScoreRequest request{"enwiki", {"damaging", "damaging_linear"}, ids, {}, false};
  auto expected = clean.score_batch(request);
  auto actual = poisoned.score_batch(request);
  for (auto rev : ids) {
    for (const auto& name : request.model_names) {
      if (rev == ids[4]) {
        EXPECT_EQ(error_code(actual.at(rev).at(name)), ErrorCode::kDatasourceError);
      } else {
        EXPECT_EQ(actual.at(rev).at(name), expected.at(rev).at(name));
      }
    }
  }
  EXPECT_EQ(error_code(poisoned.score_one("enwiki", "damaging", ids[4])),
            ErrorCode::kDatasourceError);
}

TEST(ScoreBatchTest, SplitsIoFromCpu) {
  const auto& w = fixtures::world();
  auto slow = std::make_shared<FixtureClient>(w.edits.revisions,
                                              FixtureClient::Options{20ms});
  ScoringEngine engine(fixture_registry(), slow);
  WorkerPool io("io", 2), cpu("cpu", 2);
  engine.set_pools(&io, &cpu);
  auto ids = sample_ids(w.edits, 20, 5);

  auto start = std::chrono::steady_clock::now();
  for (auto rev : ids) engine.score_one("enwiki", "damaging", rev);
  auto sequential = std::chrono::steady_clock::now() - start;
  auto fetches = slow->fetch_count();

  start = std::chrono::steady_clock::now();
  engine.score_batch({"enwiki", {"damaging"}, ids, {}, false});
  auto batch = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(slow->fetch_count() - fetches, 1u);
  EXPECT_GE(sequential / batch, 3);
}

TEST(AuditTest, HistogramAndSummary) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  auto ids = sample_ids(w.edits, 200, 1);
  ids.push_back(7);  // missing
  auto natural = audit_inject(engine, *w.damaging, ids, {});
  EXPECT_EQ(natural.target_label, "true");
  EXPECT_EQ(natural.scored, 200u);
  EXPECT_EQ(natural.errors.at("RevisionNotFound"), 1u);
  EXPECT_EQ(std::accumulate(natural.histogram.begin(), natural.histogram.end(), std::size_t{0}),
            natural.scored);
  double mean = std::accumulate(natural.probabilities.begin(), natural.probabilities.end(), 0.0) /
                200.0;
  EXPECT_NEAR(natural.mean, mean, 1e-12);
  auto sorted = natural.probabilities;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_DOUBLE_EQ(natural.median, 0.5 * (sorted[99] + sorted[100]));
  for (std::size_t i = 0; i < natural.probabilities.size(); ++i) {
    auto bin = std::min<std::size_t>(kAuditBins - 1, natural.probabilities[i] * kAuditBins);
    EXPECT_GT(natural.histogram[bin], 0u);
  }
  auto doc = natural.to_json();
  EXPECT_EQ(doc["histogram"].size(), kAuditBins);
  EXPECT_DOUBLE_EQ(doc["histogram"][49]["upper"].get<double>(), 1.0);

  // Bimodal: most mass sits in the outer fifths.
  std::size_t outer = 0;
  for (std::size_t b = 0; b < 10; ++b) outer += natural.histogram[b] + natural.histogram[49 - b];
  EXPECT_GT(outer, natural.scored * 7 / 10);

  auto timestamp = audit_inject(engine, *w.damaging, ids, {{"datasource.revision.timestamp", "1"}});
  EXPECT_EQ(timestamp.histogram, natural.histogram);
  EXPECT_EQ(timestamp.probabilities, natural.probabilities);
}

TEST(AuditTest, LinearModelShiftsUnderAnonInjection) {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  WorkerPool cpu("cpu", 2);
  engine.set_pools(nullptr, &cpu);
  auto ids = sample_ids(w.edits, 300, 2);
  RawOverlay anon{{"feature.revision.user.is_anon", "true"}};
  auto natural = audit_inject(engine, *w.damaging_linear, ids, {});
  auto everyone_anon = audit_inject(engine, *w.damaging_linear, ids, anon);
  EXPECT_GT(everyone_anon.median, natural.median);
  EXPECT_GT(everyone_anon.mean, natural.mean);
  EXPECT_THROW(audit_inject(engine, *w.damaging, ids, {}, "maybe"), Error);
}
