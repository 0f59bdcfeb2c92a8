// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "auc_oracle.hpp"
#include "cli.hpp"
#include "scorehub/pipeline.hpp"
#include "scorehub/precache.hpp"
#include "scorehub/runtime.hpp"
#include "scorehub/scoring.hpp"
#include "scorehub/service_api.hpp"
#include "test_fixtures.hpp"
#include "threshold_oracle.hpp"

namespace fs = std::filesystem;
using namespace scorehub;
using nlohmann::json;
using nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(precision);
  s << v;
  return s.str();
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs fn on its own thread; a hang past the limit ends the process.
template <typename F>
auto with_watchdog(std::chrono::seconds limit, const char* what, F fn) {
  using R = decltype(fn());
  auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
  auto result = task->get_future();
  std::thread([task] { (*task)(); }).detach();
  if (result.wait_for(limit) != std::future_status::ready) {
    std::cout << what << " FAIL watchdog expired after " << limit.count() << "s" << std::endl;
    std::_Exit(1);
  }
  return result.get();
}

ordered_json shape(const ordered_json& doc) {
  if (doc.is_object()) {
    ordered_json out = ordered_json::object();
    for (const auto& [k, v] : doc.items()) out[k] = shape(v);
    return out;
  }
  if (doc.is_array()) {
    ordered_json out = ordered_json::array();
    if (!doc.empty()) out.push_back(shape(doc.front()));
    return out;
  }
  if (doc.is_boolean()) return "boolean";
  if (doc.is_number()) return "number";
  if (doc.is_string()) return "string";
  return "null";
}

ordered_json golden(const std::string& name) {
  std::ifstream in(fs::path(GOLDEN_DIR) / name);
  return ordered_json::parse(in);
}

std::shared_ptr<ModelRegistry> fixture_registry() {
  const auto& w = fixtures::world();
  auto registry = std::make_shared<ModelRegistry>();
  registry->put(w.damaging);
  registry->put(w.damaging_linear);
  registry->put(w.articlequality);
  return registry;
}

std::shared_ptr<FixtureClient> client_with_latency(std::chrono::milliseconds latency) {
  const auto& w = fixtures::world();
  auto records = w.edits.revisions;
  records.insert(records.end(), w.articles.revisions.begin(), w.articles.revisions.end());
  return std::make_shared<FixtureClient>(records, FixtureClient::Options{latency});
}

ServiceOptions options(std::size_t cache_capacity = 10000) {
  ServiceOptions o;
  o.cache_capacity = cache_capacity;
  o.io_workers = 4;
  o.cpu_workers = 2;
  return o;
}

std::int64_t edit_id(std::size_t i) { return fixtures::world().edits.revisions[i].revision_id; }

// -- criteria ---------------------------------------------------------------

Outcome wire_format() {
  ScoringService service(fixture_registry(), fixtures::world().client, options());
  ApiHandler api(service);
  auto rev = std::to_string(edit_id(0));
  auto get = [&](const std::string& path, QueryParams params) {
    auto r = api.handle(path, params);
    if (r.status != 200) throw std::runtime_error(path + " -> " + std::to_string(r.status));
    return ordered_json::parse(r.body);
  };
  std::vector<std::string> mismatches;
  auto damaging = get("/v3/scores/enwiki/" + rev + "/damaging", {});
  if (shape(damaging["enwiki"]["scores"][rev]).dump() != golden("damaging_score.json").dump()) {
    mismatches.push_back("damaging score");
  }
  auto quality = get("/v3/scores/enwiki/" + rev + "/articlequality", {});
  if (shape(quality["enwiki"]["scores"][rev]["articlequality"]).dump() !=
      golden("score_document.json").dump()) {
    mismatches.push_back("articlequality score");
  }
  auto info = get("/v3/scores/enwiki", {{"model_info", ""}, {"models", "damaging"}});
  if (shape(info["enwiki"]["models"]["damaging"]).dump() != golden("model_info.json").dump()) {
    mismatches.push_back("model_info");
  }
  auto row = get("/v3/scores/enwiki",
                 {{"models", "damaging"},
                  {"model_info", "statistics.thresholds.true.'maximum recall @ precision >= 0.9'"}});
  const auto& cell = row["enwiki"]["models"]["damaging"];
  if (shape(cell).dump() != golden("threshold_row.json").dump()) mismatches.push_back("threshold");
  for (const auto* key : {"threshold", "filter_rate", "fpr", "precision", "recall"}) {
    if (!cell.contains(key)) mismatches.push_back(std::string("threshold row lacks ") + key);
  }
  std::string detail = "4 documents compared";
  for (const auto& m : mismatches) detail += "; mismatch: " + m;
  return {mismatches.empty(), detail};
}

Outcome threshold_oracle() {
  auto start = Clock::now();
  std::mt19937_64 rng(424242);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto set = oracle::random_scored_set(rng);
    auto query = oracle::random_query(rng);
    auto table = build_threshold_table(set.scores, set.positive_span());
    auto fast = optimize(query, table);
    auto slow = oracle::brute_force_optimize(query, set);
    bool same = fast.has_value() == slow.has_value() &&
                (!fast || (fast->threshold == slow->threshold && fast->tp == slow->tp &&
                           fast->fp == slow->fp && fast->tn == slow->tn && fast->fn == slow->fn));
    mismatches += !same;
  }
  auto elapsed = seconds_since(start);
  return {mismatches == 0 && elapsed < 10.0,
          std::to_string(mismatches) + " mismatches in 200 trials, " + fmt(elapsed, 2) + "s"};
}

Outcome auc_oracles() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> size(1, 200), coarse(0, 20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_roc = 0.0, worst_pr = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = size(rng);
    bool quantized = u(rng) < 0.5;
    std::vector<double> scores;
    std::vector<char> positive;
    for (int i = 0; i < n; ++i) {
      double s = quantized ? coarse(rng) / 20.0 : u(rng);
      scores.push_back(s);
      positive.push_back(u(rng) < 0.1 + 0.8 * s);
    }
    std::unique_ptr<bool[]> flags(new bool[positive.size()]);
    for (std::size_t i = 0; i < positive.size(); ++i) flags[i] = positive[i] != 0;
    std::span<const bool> pos(flags.get(), positive.size());
    worst_roc = std::max(worst_roc, std::abs(roc_auc(scores, pos) -
                                             oracle::brute_roc(scores, positive)));
    worst_pr = std::max(worst_pr, std::abs(pr_auc(scores, pos) -
                                           oracle::brute_ap(scores, positive)));
  }
  std::ostringstream d;
  d << "max |roc - pairwise| = " << worst_roc << ", max |pr - step AP| = " << worst_pr;
  return {worst_roc <= 1e-9 && worst_pr <= 1e-9, d.str()};
}

Outcome recalibration() {
  // label order: true, false
  std::vector<double> raw{0.5, 0.5}, sample{0.5, 0.5}, population{0.1, 0.9};
  auto mapped = recalibrate(raw, sample, population);
  double err = std::abs(mapped[0] - 0.1);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  double identity_err = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t k = 2 + trial % 5;
    std::vector<double> p(k), rates(k);
    double ps = 0.0, rs = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = u(rng);
      rates[i] = u(rng);
      ps += p[i];
      rs += rates[i];
    }
    for (std::size_t i = 0; i < k; ++i) {
      p[i] /= ps;
      rates[i] /= rs;
    }
    auto same = recalibrate(p, rates, rates);
    for (std::size_t i = 0; i < k; ++i) identity_err = std::max(identity_err, std::abs(same[i] - p[i]));
  }
  std::ostringstream d;
  d << "p=0.5 -> " << mapped[0] << " (err " << err << "), identity max err " << identity_err;
  return {err <= 1e-12 && identity_err <= 1e-12, d.str()};
}

Outcome gradient_check() {
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> dim(1, 5), cls(2, 4), rows(3, 15);
  double worst = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    std::size_t d = dim(rng), k = cls(rng), n = rows(rng);
    Matrix x(n, d);
    for (auto& v : x.data) v = 2.0 * u(rng);
    std::vector<std::size_t> labels(n);
    std::vector<double> weights(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<std::size_t>(rng() % k);
      weights[i] = 1.5 + u(rng);
    }
    linear::Model m;
    m.classes = k;
    m.dims = d;
    m.weights.resize(k * d);
    m.bias.resize(k);
    for (auto& w : m.weights) w = u(rng);
    for (auto& b : m.bias) b = u(rng);
    double l2 = 0.05 * (u(rng) + 1.0);
    auto g = linear::gradient(m, x, labels, weights, l2);
    const double h = 1e-5;
    auto check = [&](std::vector<double>& params, const std::vector<double>& analytic) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        double saved = params[i];
        params[i] = saved + h;
        double up = linear::loss(m, x, labels, weights, l2);
        params[i] = saved - h;
        double down = linear::loss(m, x, labels, weights, l2);
        params[i] = saved;
        double numeric = (up - down) / (2.0 * h);
        double rel = std::abs(numeric - analytic[i]) /
                     std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8});
        worst = std::max(worst, rel);
      }
    };
    check(m.weights, g.weights);
    check(m.bias, g.bias);
  }
  std::ostringstream d;
  d << "max relative error " << worst << " over 50 instances";
  return {worst < 1e-5, d.str()};
}

Outcome cache_speedup() {
  auto client = client_with_latency(std::chrono::milliseconds(200));
  ScoringService service(fixture_registry(), client, options());
  std::vector<double> cold, warm;
  bool identical = true;
  for (std::size_t i = 0; i < 5; ++i) {
    auto rev = edit_id(10 + i);
    auto t0 = Clock::now();
    auto first = to_json(service.score("enwiki", "damaging", rev)).dump();
    cold.push_back(seconds_since(t0));
    auto t1 = Clock::now();
    auto second = to_json(service.score("enwiki", "damaging", rev)).dump();
    warm.push_back(seconds_since(t1));
    identical = identical && first == second;
  }
  double ratio = median(cold) / std::max(median(warm), 1e-9);
  return {ratio >= 10.0 && identical,
          "cold p50 " + fmt(median(cold) * 1e3, 1) + "ms, warm p50 " +
              fmt(median(warm) * 1e3, 3) + "ms, speedup " + fmt(ratio, 0) + "x, identical=" +
              (identical ? "yes" : "no")};
}

Outcome batch_speedup() {
  std::vector<std::int64_t> ids;
  for (std::size_t i = 0; i < 100; ++i) ids.push_back(edit_id(100 + i));

  ScoringService sequential(fixture_registry(), client_with_latency(std::chrono::milliseconds(200)),
                            options());
  std::map<std::int64_t, std::string> one_by_one;
  auto t0 = Clock::now();
  for (auto id : ids) one_by_one[id] = to_json(sequential.score("enwiki", "damaging", id)).dump();
  double seq = seconds_since(t0);

  ScoringService batched(fixture_registry(), client_with_latency(std::chrono::milliseconds(200)),
                         options());
  ScoreRequest request;
  request.context_id = "enwiki";
  request.model_names = {"damaging"};
  request.revision_ids = ids;
  auto t1 = Clock::now();
  auto response = batched.scores(request);
  double batch = seconds_since(t1);

  std::size_t differing = 0;
  for (auto id : ids) {
    differing += to_json(response.scores.at(id).at("damaging")).dump() != one_by_one[id];
  }
  double ratio = seq / batch;
  return {ratio >= 3.0 && differing == 0,
          "sequential " + fmt(seq, 2) + "s, batch " + fmt(batch, 3) + "s, speedup " +
              fmt(ratio, 1) + "x, differing cells " + std::to_string(differing)};
}

Outcome precache_hit_rate() {
  const auto& w = fixtures::world();
  ScoringService service(fixture_registry(), w.client, options());
  PrecacheConfig config;
  config.add("enwiki", "damaging", "revision-create");
  Precacher precacher(service, config, 4096);

  // The first 300 edits arrive on the change stream over 20 rounds; the
  // last 100 are never announced.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::int64_t> emitted;
  std::uint64_t hits = 0, requests = 0;
  for (std::size_t round = 0; round < 20; ++round) {
    for (std::size_t i = 0; i < 15; ++i) {
      auto id = edit_id(round * 15 + i);
      precacher.offer(PrecacheEvent{"enwiki", "revision-create", id});
      emitted.push_back(id);
    }
    precacher.drain();
    for (std::size_t r = 0; r < 60; ++r) {
      std::int64_t id = u(rng) < 0.9 ? emitted[rng() % emitted.size()]
                                     : edit_id(300 + static_cast<std::size_t>(rng() % 100));
      auto before = service.metrics().get(Counter::kCacheHits);
      service.score("enwiki", "damaging", id);
      hits += service.metrics().get(Counter::kCacheHits) - before;
      ++requests;
    }
  }
  precacher.stop();
  double rate = static_cast<double>(hits) / static_cast<double>(requests);
  return {rate >= 0.80 && requests >= 1000,
          "hit rate " + fmt(rate, 3) + " over " + std::to_string(requests) +
              " external requests (" + std::to_string(precacher.processed()) +
              " precache events)"};
}

// Sleeps, counts, then fails every fetch.
class FailingClient final : public DatasourceClient {
 public:
  RevisionRecord get_revision(const std::string&, std::int64_t) const override {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    throw Error(ErrorCode::kUpstreamError, "upstream unavailable");
  }
  std::vector<RevisionResult> get_revisions_batch(
      const std::string& context, const std::vector<std::int64_t>& ids) const override {
    get_revision(context, ids.front());
    return {};
  }
  bool has_context(const std::string&) const override { return true; }
  mutable std::atomic<int> calls{0};
};

Outcome deduplication() {
  constexpr int kClients = 50;
  auto run = [&](ScoringService& service, std::int64_t rev) {
    std::vector<std::string> docs(kClients);
    std::barrier start(kClients);
    std::vector<std::thread> threads;
    for (int i = 0; i < kClients; ++i) {
      threads.emplace_back([&, i] {
        start.arrive_and_wait();
        docs[i] = to_json(service.score("enwiki", "damaging", rev)).dump();
      });
    }
    for (auto& t : threads) t.join();
    return docs;
  };

  return with_watchdog(std::chrono::seconds(10), "AC9", [&]() -> Outcome {
    ScoringService service(fixture_registry(),
                           client_with_latency(std::chrono::milliseconds(300)), options());
    auto before = service.engine().extraction_count();
    auto docs = run(service, edit_id(42));
    auto extractions = service.engine().extraction_count() - before;
    bool same = std::all_of(docs.begin(), docs.end(), [&](auto& d) { return d == docs[0]; });

    auto failing = std::make_shared<FailingClient>();
    ScoringService broken(fixture_registry(), failing, options());
    auto errors = run(broken, edit_id(42));
    bool all_failed = std::all_of(errors.begin(), errors.end(), [&](auto& d) {
      return d == errors[0] && json::parse(d).contains("error");
    });
    auto error_type = json::parse(errors[0]).value("/error/type"_json_pointer, std::string("none"));
    bool drained = broken.in_flight() == 0 && service.in_flight() == 0;
    return {extractions == 1 && same && all_failed && failing->calls == 1 && drained,
            std::to_string(extractions) + " extraction for 50 requests, identical=" +
                (same ? "yes" : "no") + "; failure: " + std::to_string(failing->calls.load()) +
                " upstream call, all 50 waiters got " + error_type + "=" +
                (all_failed ? "yes" : "no") + ", in-flight registry empty=" +
                (drained ? "yes" : "no")};
  });
}

Outcome injection_identity_and_locality() {
  const auto& w = fixtures::world();
  ScoringEngine engine(fixture_registry(), w.client);
  std::mt19937_64 rng(12);
  std::size_t identity_checks = 0, identity_fail = 0, locality_checks = 0, locality_fail = 0;
  for (const auto& model : {w.damaging, w.damaging_linear, w.articlequality}) {
    auto cone = model->graph->dependency_cone(model->feature_names());
    for (std::size_t i = 0; i < 10; ++i) {
      auto rev = edit_id(i * 13);
      auto natural = to_json(engine.score_model(*model, rev, {}, true)).dump();
      ExtractionContext ctx;
      ctx.context_id = "enwiki";
      ctx.revision_id = rev;
      ctx.datasource_client = w.client.get();
      for (const auto& name : model->graph->names()) {
        Value value = solve(*model->graph, ctx, name);
        ++identity_checks;
        identity_fail += to_json(engine.score_model(*model, rev, {{name, value}}, true)).dump() !=
                         natural;
        if (std::find(cone.begin(), cone.end(), name) != cone.end()) continue;
        Value other;
        switch (model->graph->at(name).value_type) {
          case ValueType::kBoolean: other = static_cast<bool>(rng() & 1); break;
          case ValueType::kInteger: other = static_cast<std::int64_t>(rng() % 100000); break;
          case ValueType::kReal: other = static_cast<double>(rng() % 1000) / 7.0; break;
          case ValueType::kText: other = std::string("injected ") + std::to_string(rng()); break;
        }
        ++locality_checks;
        locality_fail += to_json(engine.score_model(*model, rev, {{name, other}}, true)).dump() !=
                         natural;
      }
    }
  }
  return {identity_fail == 0 && locality_fail == 0 && locality_checks > 0,
          std::to_string(identity_checks - identity_fail) + "/" +
              std::to_string(identity_checks) + " natural injections identical, " +
              std::to_string(locality_checks - locality_fail) + "/" +
              std::to_string(locality_checks) + " out-of-cone injections unchanged"};
}

json audit_cli(const fs::path& model, const std::vector<std::string>& extra) {
  std::vector<std::string> args = {"audit", model.string(), "--fixtures",
                                   (fs::path(DATA_DIR) / "fixtures").string(), "--revisions",
                                   (fs::path(DATA_DIR) / "labels" / "enwiki.damaging.jsonl").string(),
                                   "--json"};
  args.insert(args.end(), extra.begin(), extra.end());
  std::ostringstream out, err;
  if (cli::run(args, out, err) != 0) throw std::runtime_error("audit failed: " + err.str());
  return json::parse(out.str());
}

Outcome anon_audit() {
  auto start = Clock::now();
  auto models = fs::path(DATA_DIR) / "models";
  const std::vector<std::string> anon = {"--set", "feature.revision.user.is_anon=true"};
  auto linear_natural = audit_cli(models / "enwiki.damaging_linear.model", {});
  auto linear_anon = audit_cli(models / "enwiki.damaging_linear.model", anon);
  auto boosted_anon = audit_cli(models / "enwiki.damaging.model", anon);
  double shift = linear_anon["median"].get<double>() - linear_natural["median"].get<double>();

  // Non-damaging mode: where the truly non-damaging edits sit.
  auto labels = read_label_file(fs::path(DATA_DIR) / "labels" / "enwiki.damaging.jsonl");
  auto probabilities = boosted_anon["probabilities"].get<std::vector<double>>();
  std::vector<double> good;
  for (std::size_t i = 0; i < labels.records.size(); ++i) {
    if (labels.records[i].label == "false") good.push_back(probabilities.at(i));
  }
  double good_mode = median(good);
  std::size_t low = 0, high = 0;
  const auto& hist = boosted_anon["histogram"];
  for (std::size_t b = 0; b < 10; ++b) {
    low += hist[b]["count"].get<std::size_t>();
    high += hist[49 - b]["count"].get<std::size_t>();
  }
  auto scored = boosted_anon["scored"].get<std::size_t>();
  bool bimodal = low * 10 >= scored && high * 10 >= scored;
  double elapsed = seconds_since(start);
  return {shift >= 0.3 && good_mode < 0.5 && bimodal && elapsed < 60.0,
          "linear median " + fmt(linear_natural["median"].get<double>(), 3) + " -> " +
              fmt(linear_anon["median"].get<double>(), 3) + " (shift " + fmt(shift, 3) +
              "); boosted everyone-anon non-damaging median " + fmt(good_mode, 4) +
              ", outer-fifth mass " + std::to_string(low) + "/" + std::to_string(high) + " of " +
              std::to_string(scored) + ", " + fmt(elapsed, 1) + "s"};
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome pipeline_reproducibility() {
  auto root = fs::temp_directory_path() / ("scorehub-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  struct Cleanup {
    fs::path p;
    ~Cleanup() { fs::remove_all(p); }
  } cleanup{root};

  auto manifest = load_manifest(fs::path(DATA_DIR) / "build.json");
  auto build_into = [&](const BuildManifest& m, const fs::path& dir) {
    BuildOptions o;
    o.models_dir = dir / "models";
    o.datasets_dir = dir / "datasets";
    return build(m, o);
  };
  auto first = build_into(manifest, root / "run1");
  auto second = build_into(manifest, root / "run2");
  std::size_t stat_mismatch = 0, committed_mismatch = 0;
  for (std::size_t i = 0; i < first.size(); ++i) {
    stat_mismatch += first[i].statistics.dump() != second[i].statistics.dump();
    auto committed = load_model(fs::path(DATA_DIR) / "models" / first[i].model.filename());
    committed_mismatch += to_json(committed.statistics).dump() != first[i].statistics.dump();
  }

  // Incremental: edit one label file in a private copy, rebuild, and compare
  // against a clean build of the same inputs.
  auto work = root / "work";
  fs::create_directories(work);
  for (const auto* sub : {"fixtures", "labels", "features"}) {
    fs::copy(fs::path(DATA_DIR) / sub, work / sub, fs::copy_options::recursive);
  }
  fs::copy_file(fs::path(DATA_DIR) / "build.json", work / "build.json");
  auto local = load_manifest(work / "build.json");
  build(local);
  auto labels_path = work / "labels" / "enwiki.articlequality.jsonl";
  auto labels = read_label_file(labels_path);
  labels.records.resize(labels.records.size() - 20);
  write_label_file(labels_path, labels);
  auto incremental = build(local);
  auto clean = build_into(local, root / "clean");
  std::size_t rebuilt = 0, file_mismatch = 0;
  for (std::size_t i = 0; i < incremental.size(); ++i) {
    rebuilt += incremental[i].rebuilt;
    file_mismatch += slurp(incremental[i].model) != slurp(clean[i].model);
  }
  return {stat_mismatch == 0 && committed_mismatch == 0 && file_mismatch == 0 && rebuilt == 1,
          std::to_string(first.size()) + " targets; run-to-run statistic mismatches " +
              std::to_string(stat_mismatch) + ", vs committed " +
              std::to_string(committed_mismatch) + "; incremental rebuilt " +
              std::to_string(rebuilt) + " target, incremental vs clean file mismatches " +
              std::to_string(file_mismatch)};
}

Outcome latency_sanity() {
  ScoringService service(fixture_registry(), fixtures::world().client, options());
  ApiHandler api(service);
  for (std::size_t i = 0; i < 200; ++i) {
    auto rev = std::to_string(edit_id(i));
    api.handle("/v3/scores/enwiki/" + rev + "/damaging", {});
  }
  auto metrics = api.handle("/metrics", {});
  std::istringstream lines(metrics.body);
  std::string line;
  double p50 = -1.0;
  std::uint64_t count = 0;
  const std::string key = "score_duration_seconds{quantile=\"0.5\"} ";
  while (std::getline(lines, line)) {
    if (line.rfind(key, 0) == 0) p50 = std::stod(line.substr(key.size()));
    if (line.rfind("score_duration_seconds_count ", 0) == 0) count = std::stoull(line.substr(29));
  }
  return {p50 >= 0.0 && p50 < 1.0 && count == 200,
          "cold single-score p50 " + fmt(p50 * 1e3, 3) + "ms over " + std::to_string(count) +
              " requests (from /metrics)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"AC1 wire-format conformance", wire_format},
      {"AC2 threshold optimizer oracle", threshold_oracle},
      {"AC3 AUC oracles", auc_oracles},
      {"AC4 recalibration", recalibration},
      {"AC5 gradient check", gradient_check},
      {"AC6 cache speedup", cache_speedup},
      {"AC7 batch speedup", batch_speedup},
      {"AC8 precache hit rate", precache_hit_rate},
      {"AC9 de-duplication", deduplication},
      {"AC10 injection identity and locality", injection_identity_and_locality},
      {"AC11 anon audit", anon_audit},
      {"AC12 pipeline reproducibility", pipeline_reproducibility},
      {"AC13 latency sanity", latency_sanity},
  };
  // Train the shared fixture models before any timing starts.
  fixtures::world();
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome outcome;
    try {
      outcome = check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS " : "FAIL ") << name << ": " << outcome.detail
              << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failures ? 1 : 0;
}
