#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "scorehub/feature_graph.hpp"
#include "scorehub/feature_set.hpp"
#include "scorehub/text.hpp"

using namespace scorehub;

namespace {

DependentRef feature(std::string name, std::vector<std::string> deps) {
  DependentRef ref;
  ref.name = std::move(name);
  ref.value_type = ValueType::kInteger;
  ref.dependencies = std::move(deps);
  ref.compute = [](std::span<const Value> in) -> Value {
    std::int64_t sum = 1;
    for (const auto& v : in) sum += std::get<std::int64_t>(v);
    return sum;
  };
  return ref;
}

std::shared_ptr<const DependencyGraph> reference_graph() {
  return build_graph(reference_feature_set(
      "enwiki", {"lol", "hahaha+", "dude"}, {"stupid", "idiot"}));
}

RevisionRecord sample_record(std::int64_t id, bool anon) {
  RevisionRecord r;
  r.revision_id = id;
  r.context_id = "enwiki";
  r.parent_text = "== History ==\nThe town was founded in 1820.";
  r.text = r.parent_text +
           " It grew quickly.<ref>Smith 2001</ref> lol hahahaaa\n"
           "[[File:Town.jpg]] [[Category:Towns]]";
  r.user_is_anon = anon;
  r.user_account_age_seconds = anon ? 0 : 86400 * 30;
  r.timestamp = 1500000000 + id;
  return r;
}

}  // namespace

TEST(DependencyGraphTest, RegistersChain) {
  DependencyGraph graph;
  graph.add(feature("A", {}));
  graph.add(feature("B", {"A"}));
  EXPECT_EQ(graph.size(), 2u);
  EXPECT_NO_THROW(graph.validate());
}

TEST(DependencyGraphTest, RejectsTwoCycleAndNamesIt) {
  DependencyGraph graph;
  graph.add(feature("A", {"B"}));
  try {
    graph.add(feature("B", {"A"}));
    FAIL() << "expected CycleDetected";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCycleDetected);
    EXPECT_NE(std::string(e.what()).find("A->B->A"), std::string::npos)
        << e.what();
  }
  // The rejected node is not left behind.
  EXPECT_FALSE(graph.contains("B"));
}

TEST(DependencyGraphTest, RejectsSelfLoopAndDuplicates) {
  DependencyGraph graph;
  EXPECT_THROW(
      {
        try {
          graph.add(feature("A", {"A"}));
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::kCycleDetected);
          throw;
        }
      },
      Error);
  graph.add(feature("X", {}));
  try {
    graph.add(feature("X", {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateName);
  }
}

TEST(DependencyGraphTest, ValidateReportsDanglingDependency) {
  DependencyGraph graph;
  graph.add(feature("A", {"missing"}));
  try {
    graph.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownDependent);
  }
}

// Random DAGs (edges from higher to lower index, with a chain so every node
// reaches n0). Making n{target} depend on a late "closer" node that depends
// on the top node closes a cycle, which registration must reject.
TEST(DependencyGraphProperty, RandomDagPlusBackEdgeIsRejected) {
  std::mt19937_64 rng(7);
  auto name = [](int i) { return "n" + std::to_string(i); };
  for (int trial = 0; trial < 100; ++trial) {
    int n = 3 + static_cast<int>(rng() % 12);
    std::vector<std::vector<std::string>> deps(n);
    for (int i = 1; i < n; ++i) {
      deps[i].push_back(name(i - 1));
      for (int j = 0; j < i - 1; ++j) {
        if (rng() % 4 == 0) deps[i].push_back(name(j));
      }
    }
    DependencyGraph dag;
    for (int i = 0; i < n; ++i) dag.add(feature(name(i), deps[i]));
    EXPECT_NO_THROW(dag.validate());
    EXPECT_NO_THROW(dag.add(feature("closer", {name(n - 1)})));

    int target = static_cast<int>(rng() % n);
    DependencyGraph cyclic;
    for (int i = 0; i < n; ++i) {
      auto d = deps[i];
      if (i == target) d.push_back("closer");
      cyclic.add(feature(name(i), d));
    }
    try {
      cyclic.add(feature("closer", {name(n - 1)}));
      ADD_FAILURE() << "trial " << trial << " accepted a cycle";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kCycleDetected);
    }
  }
}

TEST(SolveTest, InjectedTextDrivesWordCount) {
  auto graph = reference_graph();
  ExtractionContext ctx;
  ctx.overlay = graph->make_overlay(RawOverlay{{"revision.text", "hello world"}});
  EXPECT_EQ(std::get<std::int64_t>(solve(*graph, ctx, "words_count")), 2);
}

TEST(SolveTest, PrefixedInjectionReturnsVerbatim) {
  auto graph = reference_graph();
  ExtractionContext ctx;
  ctx.overlay = graph->make_overlay(
      nlohmann::json{{"feature.revision.user.is_anon", true}});
  EXPECT_EQ(std::get<bool>(solve(*graph, ctx, "feature.revision.user.is_anon")),
            true);
  EXPECT_EQ(ctx.record_fetches, 0u);
}

TEST(SolveTest, PrefixMustAgreeWithKind) {
  auto graph = reference_graph();
  EXPECT_EQ(graph->canonical_name("datasource.revision.text"), "revision.text");
  EXPECT_THROW(graph->canonical_name("feature.revision.text"), Error);
  EXPECT_THROW(graph->canonical_name("datasource.words_count"), Error);
}

TEST(SolveTest, StrictCoercion) {
  auto graph = reference_graph();
  auto code_of = [&](RawOverlay raw) {
    try {
      graph->make_overlay(raw);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInternalError;
  };
  EXPECT_EQ(code_of({{"revision.user.is_anon", "1"}}), ErrorCode::kTypeMismatch);
  EXPECT_EQ(code_of({{"revision.user.account_age_seconds", "2.5"}}),
            ErrorCode::kTypeMismatch);
  EXPECT_EQ(code_of({{"revision.user.account_age_seconds", "12x"}}),
            ErrorCode::kTypeMismatch);
  EXPECT_EQ(code_of({{"nonexistent", "1"}}), ErrorCode::kUnknownDependent);
  EXPECT_EQ(std::get<std::int64_t>(graph->make_overlay(
                RawOverlay{{"revision.user.account_age_seconds", "-5"}})
                .at("revision.user.account_age_seconds")),
            -5);
}

TEST(ExtractManyTest, SharedMemoAndOrder) {
  auto graph = reference_graph();
  ExtractionContext ctx;
  ctx.overlay = graph->make_overlay(RawOverlay{{"revision.text", "ab cd"}});
  auto values = extract_many(*graph, ctx, {"words_count", "chars_count"});
  ASSERT_EQ(values.size(), 2u);
  EXPECT_EQ(std::get<std::int64_t>(values[0]), 2);
  EXPECT_EQ(std::get<std::int64_t>(values[1]), 5);
  EXPECT_TRUE(extract_many(*graph, ctx, {}).empty());
  try {
    extract_many(*graph, ctx, {"words_count", "zeal"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownDependent);
  }
}

TEST(SolveTest, EachRootFetchedOncePerRequest) {
  auto graph = reference_graph();
  FixtureClient client({sample_record(1, false)});
  ExtractionContext ctx;
  ctx.context_id = "enwiki";
  ctx.revision_id = 1;
  ctx.datasource_client = &client;
  auto names = reference_feature_set("enwiki", {}, {}).feature_names();
  extract_many(*graph, ctx, names);
  extract_many(*graph, ctx, names);
  EXPECT_EQ(client.fetch_count(), 1u);
  EXPECT_EQ(ctx.record_fetches, 1u);
}

TEST(SolveTest, MissingRevisionPropagatesAsNotFound) {
  auto graph = reference_graph();
  FixtureClient client({sample_record(1, false)});
  ExtractionContext ctx{"enwiki", 99, &client, {}, {}, {}, {}, 0};
  try {
    solve(*graph, ctx, "words_count");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRevisionNotFound);
  }
}

TEST(SolveTest, ClientFailureBecomesDatasourceError) {
  struct Broken : DatasourceClient {
    RevisionRecord get_revision(const std::string&, std::int64_t) const override {
      throw Error(ErrorCode::kUpstreamError, "socket closed");
    }
    std::vector<RevisionResult> get_revisions_batch(
        const std::string&, const std::vector<std::int64_t>&) const override {
      throw Error(ErrorCode::kUpstreamError, "socket closed");
    }
    bool has_context(const std::string&) const override { return true; }
  } broken;
  auto graph = reference_graph();
  ExtractionContext ctx{"enwiki", 1, &broken, {}, {}, {}, {}, 0};
  try {
    solve(*graph, ctx, "words_count");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDatasourceError);
    EXPECT_NE(std::string(e.what()).find("revision.text"), std::string::npos);
  }
}

TEST(SolveTest, ExpiredDeadlineTimesOut) {
  auto graph = reference_graph();
  FixtureClient client({sample_record(1, false)});
  ExtractionContext ctx{"enwiki", 1, &client, {}, {}, {}, {}, 0};
  ctx.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  try {
    solve(*graph, ctx, "words_count");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeoutError);
  }
}

class InjectionProperty : public ::testing::TestWithParam<int> {};

TEST_P(InjectionProperty, IdentityAndLocality) {
  auto graph = reference_graph();
  auto names = reference_feature_set("enwiki", {}, {}).feature_names();
  std::mt19937_64 rng(GetParam());
  auto record = sample_record(GetParam(), rng() % 2 == 0);
  record.text += std::string(rng() % 50, 'x');
  FixtureClient client({record});

  auto run = [&](InjectionOverlay overlay) {
    ExtractionContext ctx{"enwiki", record.revision_id, &client, {}, {}, {}, {}, 0};
    ctx.overlay = graph->check_overlay(overlay);
    return extract_many(*graph, ctx, names);
  };
  auto natural = run({});
  EXPECT_EQ(natural, run({}));  // deterministic

  InjectionOverlay identity;
  for (std::size_t i = 0; i < names.size(); ++i) identity[names[i]] = natural[i];
  EXPECT_EQ(run(identity), natural);

  // Flipping is_anon only changes is_anon.
  bool anon = std::get<bool>(natural[3]);
  auto flipped = run({{"revision.user.is_anon", !anon}});
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == "revision.user.is_anon") {
      EXPECT_NE(flipped[i], natural[i]);
    } else {
      EXPECT_EQ(flipped[i], natural[i]) << names[i];
    }
  }
  // Injecting the parent text touches only bytes_changed.
  auto parent = run({{"revision.parent.text", std::string("")}});
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != "bytes_changed") EXPECT_EQ(parent[i], natural[i]) << names[i];
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, InjectionProperty, ::testing::Range(1, 21));

TEST(ReferenceFeatures, CountsOnKnownText) {
  auto graph = reference_graph();
  FixtureClient client({sample_record(5, true)});
  ExtractionContext ctx{"enwiki", 5, &client, {}, {}, {}, {}, 0};
  auto get = [&](const char* n) { return solve(*graph, ctx, n); };
  EXPECT_EQ(std::get<std::int64_t>(get("refs_count")), 1);
  EXPECT_EQ(std::get<std::int64_t>(get("headers_count")), 1);
  EXPECT_EQ(std::get<std::int64_t>(get("images_count")), 1);
  EXPECT_EQ(std::get<std::int64_t>(get("categories_count")), 1);
  EXPECT_EQ(std::get<std::int64_t>(get("informal_word_count")), 2);
  EXPECT_EQ(std::get<std::int64_t>(get("badwords_count")), 0);
  EXPECT_EQ(std::get<bool>(get("revision.user.is_anon")), true);
  EXPECT_GT(std::get<std::int64_t>(get("bytes_changed")), 0);
}

TEST(TextTest, TokenizerSplitsOnPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Hello, World!  foo_bar"),
            (std::vector<std::string>{"hello", "world", "foo_bar"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(char_count("h\xC3\xA9llo"), 5u);
}

TEST(TextTest, InformalWordsItalianHaScenario) {
  EXPECT_EQ(informal_word_count("ha ha article", Lexicon({"ha", "hahaha"})), 2u);
  EXPECT_EQ(informal_word_count("ha ha article", Lexicon({"hahaha"})), 0u);
  EXPECT_EQ(informal_word_count("ha ha article", Lexicon()), 0u);
  EXPECT_EQ(informal_word_count("", Lexicon({"ha"})), 0u);
  EXPECT_EQ(informal_word_count("HAHAHAAA lol", Lexicon({"hahaha+"})), 1u);
  EXPECT_EQ(informal_word_count("HAHAHAAA lol", Lexicon({"hahaha"})), 0u);
}

TEST(FeatureSetFile, LoadsWithLexiconReferences) {
  auto dir = std::filesystem::temp_directory_path() / "scorehub_fs_test";
  std::filesystem::create_directories(dir / "lexicons");
  std::ofstream(dir / "lexicons" / "it.informal.txt") << "# comment\nhahaha+\nlol\n";
  std::ofstream(dir / "fs.json") << R"({
    "format_version": 1, "name": "damaging", "context": "itwiki",
    "lexicons": {"informal": "lexicons/it.informal.txt"},
    "features": [
      {"name": "words_count", "type": "integer", "op": "token_count",
       "depends_on": ["revision.text"]},
      {"name": "informal_word_count", "type": "integer", "op": "lexicon_count",
       "depends_on": ["revision.text"], "args": {"lexicon": "informal"}}
    ]})";
  auto set = load_feature_set(dir / "fs.json");
  EXPECT_EQ(set.lexicons.at("informal").lexicon.entries().size(), 2u);
  auto graph = build_graph(set);
  ExtractionContext ctx;
  ctx.overlay = graph->make_overlay(RawOverlay{{"revision.text", "ha ha hahaha"}});
  EXPECT_EQ(std::get<std::int64_t>(solve(*graph, ctx, "informal_word_count")), 1);

  // Inlined form reloads to the same graph behaviour without the lexicon file.
  auto reloaded = feature_set_from_json(to_json(set, true));
  EXPECT_EQ(reloaded.lexicons.at("informal").path, "lexicons/it.informal.txt");
  EXPECT_EQ(reloaded.lexicons.at("informal").lexicon.entries(),
            set.lexicons.at("informal").lexicon.entries());
  std::filesystem::remove_all(dir);
}

TEST(FeatureSetFile, RejectsUnknownOpAndBadVersion) {
  nlohmann::json doc = {{"format_version", 1}, {"name", "x"}, {"context", "c"},
                        {"features", {{{"name", "f"}, {"type", "integer"},
                                       {"op", "telepathy"},
                                       {"depends_on", {"revision.text"}}}}}};
  EXPECT_THROW(build_graph(feature_set_from_json(doc)), Error);
  doc["format_version"] = 9;
  try {
    feature_set_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIncompatibleFormatVersion);
  }
}
