#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "scorehub/pipeline.hpp"
#include "scorehub/precache.hpp"
#include "scorehub/runtime.hpp"
#include "scorehub/scoring.hpp"
#include "scorehub/service_api.hpp"
#include "scorehub/synthetic.hpp"
#include "scorehub/worker_pool.hpp"

namespace scorehub::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

std::vector<std::string> split_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

RawOverlay parse_overlay(const std::vector<std::string>& sets) {
  RawOverlay overlay;
  for (const auto& s : sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidFlag, "--set expects name=value, got '" + s + "'");
    }
    overlay[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return overlay;
}

// "revscoring.scoring.models.GradientBoosting" style names keep only the
// last segment.
EstimatorKind estimator_from_arg(const std::string& arg) {
  auto dot = arg.rfind('.');
  auto name = dot == std::string::npos ? arg : arg.substr(dot + 1);
  try {
    return parse_estimator_kind(name);
  } catch (const Error&) {
    throw Error(ErrorCode::kInvalidFlag, "unknown estimator '" + arg + "'");
  }
}

std::size_t worker_count(std::size_t requested) {
  if (requested) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Revision ids from either a label file or an extracted dataset.
std::vector<std::int64_t> revision_ids_from(const fs::path& file) {
  std::ifstream in(file);
  std::string header;
  if (!in || !std::getline(in, header)) {
    throw Error(ErrorCode::kIoError, "cannot read " + file.string());
  }
  if (json::parse(header, nullptr, false).contains("features")) {
    return read_dataset_file(file).rev_ids;
  }
  std::vector<std::int64_t> ids;
  for (const auto& r : read_label_file(file).records) ids.push_back(r.rev_id);
  return ids;
}

void print_model_summary(std::ostream& out, const Model& model) {
  const auto& s = model.statistics;
  out << model.context << "." << model.name << " " << model.version << " ("
      << type_name(model.estimator.kind()) << ")\n"
      << "  n=" << s.n << " accuracy=" << std::fixed << std::setprecision(3) << s.accuracy()
      << " roc_auc.micro=" << s.roc_auc.micro << " pr_auc.micro=" << s.pr_auc.micro << "\n"
      << "  params " << model.params_json().dump() << "\n";
  out.unsetf(std::ios::floatfield);
}

void print_audit_table(std::ostream& out, const AuditSummary& s) {
  out << "# target=" << s.target_label << " scored=" << s.scored << " mean=" << std::fixed
      << std::setprecision(4) << s.mean << " median=" << s.median;
  for (const auto& [type, n] : s.errors) out << " " << type << "=" << n;
  out << "\nlower\tupper\tcount\n";
  for (std::size_t i = 0; i < kAuditBins; ++i) {
    out << std::setprecision(2) << static_cast<double>(i) / kAuditBins << '\t'
        << static_cast<double>(i + 1) / kAuditBins << '\t' << s.histogram[i] << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

struct Opened {
  std::unique_ptr<std::ifstream> file;
  std::istream* stream = nullptr;
};

Opened open_input(const std::string& source) {
  Opened o;
  auto path = resolve_source(source);
  if (path == "-") {
    o.stream = &std::cin;
    return o;
  }
  o.file = std::make_unique<std::ifstream>(path);
  if (!*o.file) throw Error(ErrorCode::kIoError, "cannot read " + path.string());
  o.stream = o.file.get();
  return o;
}

// Stdin-backed dataset files are spooled to a temp file first.
DatasetFile load_dataset_arg(const std::string& arg) {
  if (arg != "-") return read_dataset_file(arg);
  auto tmp = fs::temp_directory_path() /
             ("scorehub-dataset-" + std::to_string(::getpid()) + ".jsonl");
  {
    std::ofstream out(tmp);
    out << std::cin.rdbuf();
  }
  auto ds = read_dataset_file(tmp);
  fs::remove(tmp);
  return ds;
}

void generate_fixtures(const fs::path& dir, std::size_t edits, std::size_t articles,
                       std::uint64_t seed) {
  synthetic::DamagingOptions d;
  d.count = edits;
  d.seed = seed;
  auto damaging = synthetic::damaging(d);
  synthetic::ArticleQualityOptions a;
  a.count = articles;
  a.seed = seed + 1;
  auto quality = synthetic::article_quality(a);

  fs::create_directories(dir / "fixtures");
  write_revision_fixtures(dir / "fixtures" / "enwiki.edits.ndjson", damaging.revisions);
  write_revision_fixtures(dir / "fixtures" / "enwiki.articles.ndjson", quality.revisions);

  LabelFile campaign;
  campaign.campaign_id = "enwiki-damaging-synthetic";
  campaign.label_set = {"true", "false"};
  campaign.source = LabelSource::kManualCampaign;
  for (const auto& r : damaging.revisions) {
    campaign.records.push_back({r.revision_id, damaging.labels.at(r.revision_id), r.context_id});
  }
  write_label_file(dir / "labels" / "enwiki.damaging.jsonl", campaign);

  // Assessment history: some revisions were assessed twice, and some carry
  // assessments outside the label set.
  std::mt19937_64 rng(seed);
  std::ostringstream events;
  std::int64_t ts = 1'400'000'000;
  std::vector<std::string> classes(synthetic::kQualityClasses.begin(),
                                   synthetic::kQualityClasses.end());
  for (const auto& r : quality.revisions) {
    auto roll = rng() % 10;
    if (roll == 0) {
      json early = {{"rev_id", r.revision_id}, {"context", r.context_id},
                    {"assessment", classes[rng() % classes.size()]}, {"timestamp", ts++}};
      events << early.dump() << '\n';
    } else if (roll == 1) {
      json other = {{"rev_id", r.revision_id}, {"context", r.context_id},
                    {"assessment", "A"}, {"timestamp", ts++}};
      events << other.dump() << '\n';
    }
    json ev = {{"rev_id", r.revision_id}, {"context", r.context_id},
               {"assessment", quality.labels.at(r.revision_id)}, {"timestamp", ts++}};
    events << ev.dump() << '\n';
  }
  write_file_atomic(dir / "traces" / "enwiki.assessments.ndjson", events.str());
  std::istringstream replay(events.str());
  auto converted = labels_from_trace(replay, "enwiki-articlequality-trace", classes);
  write_label_file(dir / "labels" / "enwiki.articlequality.jsonl", converted.labels);

  auto features = reference_feature_set("enwiki", synthetic::informal_words(),
                                        synthetic::bad_words());
  auto feature_dir = dir / "features";
  write_file_atomic(feature_dir / "enwiki.reference.json",
                    to_json(features, false).dump(2) + "\n");
  for (const auto& [key, ref] : features.lexicons) {
    std::string text;
    for (const auto& e : ref.lexicon.entries()) text += e + "\n";
    write_file_atomic(feature_dir / ref.path, text);
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Train, audit and serve edit-scoring models.", "scorehub"};
  app.require_subcommand(1);

  // fetch_labels
  auto* fetch = app.add_subcommand("fetch_labels", "Validate a label export (or convert assessment traces)");
  std::string fetch_source, fetch_out, trace_campaign, trace_labels;
  bool trace = false;
  fetch->add_option("source", fetch_source, "path, file:// URL or - for stdin")->required();
  fetch->add_option("-o,--output", fetch_out, "write here instead of stdout");
  fetch->add_flag("--trace", trace, "source is an assessment event log");
  fetch->add_option("--campaign", trace_campaign, "campaign id for trace conversion");
  fetch->add_option("--label-set", trace_labels, "comma-separated labels for trace conversion");

  // extract
  auto* extract_cmd = app.add_subcommand("extract", "Extract feature rows for a label file");
  std::string ex_labels, ex_features, ex_fixtures, ex_out;
  double ex_tolerance = 0.10;
  std::size_t ex_workers = 0;
  extract_cmd->add_option("labels", ex_labels)->required();
  extract_cmd->add_option("feature_set", ex_features)->required();
  extract_cmd->add_option("--fixtures", ex_fixtures)->required();
  extract_cmd->add_option("-o,--output", ex_out)->required();
  extract_cmd->add_option("--tolerance", ex_tolerance, "allowed failed-row fraction")
      ->check(CLI::Range(0.0, 1.0));
  extract_cmd->add_option("--workers", ex_workers, "0 = hardware threads");

  // cv_train
  auto* train_cmd = app.add_subcommand("cv_train", "Cross-validate, then train on all rows");
  std::string tr_estimator, tr_features, tr_name, tr_dataset = "-", tr_out;
  CvTrainFlags flags;
  train_cmd->add_option("estimator", tr_estimator, "gradient_boosting | linear_logistic")
      ->required();
  train_cmd->add_option("feature_set", tr_features)->required();
  train_cmd->add_option("model_name", tr_name)->required();
  train_cmd->add_option("--dataset", tr_dataset, "extracted rows (- for stdin)");
  train_cmd->add_option("-o,--output", tr_out, "model file (stdout when omitted)");
  train_cmd->add_option("--version", flags.version);
  train_cmd->add_option("-p,--param", flags.params, "estimator hyperparameter key=value");
  train_cmd->add_option("--label-weight", flags.label_weights, "label=weight");
  train_cmd->add_option("--pop-rate", flags.pop_rates, "label=rate");
  train_cmd->add_flag("--center", flags.center);
  train_cmd->add_flag("--scale", flags.scale);
  train_cmd->add_option("--folds", flags.folds)->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", flags.seed);

  // test_model
  auto* test_cmd = app.add_subcommand("test_model", "Fitness statistics on held-out rows");
  std::string te_model, te_dataset;
  test_cmd->add_option("model", te_model)->required();
  test_cmd->add_option("dataset", te_dataset)->required();

  // model_info
  auto* info_cmd = app.add_subcommand("model_info", "Print a model's info document");
  std::string mi_model, mi_path;
  info_cmd->add_option("model", mi_model)->required();
  info_cmd->add_option("field_path", mi_path, "e.g. statistics.thresholds.true.'maximum recall @ precision >= 0.9'");

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "Probability histogram under injected features");
  std::string au_model, au_fixtures, au_revisions, au_target;
  std::vector<std::string> au_sets;
  bool au_json = false;
  audit_cmd->add_option("model", au_model)->required();
  audit_cmd->add_option("--fixtures", au_fixtures)->required();
  audit_cmd->add_option("--revisions", au_revisions, "label file or dataset")->required();
  audit_cmd->add_option("--set", au_sets, "feature.<name>=value or datasource.<name>=value");
  audit_cmd->add_option("--target", au_target, "class whose probability is histogrammed");
  audit_cmd->add_flag("--json", au_json, "JSON summary with per-revision probabilities");

  // build
  auto* build_cmd = app.add_subcommand("build", "Rebuild stale models from a manifest");
  std::string bu_manifest, bu_models, bu_datasets;
  bool bu_force = false;
  std::size_t bu_workers = 0;
  build_cmd->add_option("manifest", bu_manifest)->required();
  build_cmd->add_flag("--force", bu_force, "ignore up-to-date stamps");
  build_cmd->add_option("--models-dir", bu_models);
  build_cmd->add_option("--datasets-dir", bu_datasets);
  build_cmd->add_option("--workers", bu_workers, "extraction threads, 0 = hardware");

  // score
  auto* score_cmd = app.add_subcommand("score", "Score revisions without a server");
  std::string sc_context, sc_models_dir, sc_fixtures, sc_models;
  std::vector<std::int64_t> sc_revids;
  std::vector<std::string> sc_sets;
  bool sc_features = false, sc_metrics = false;
  score_cmd->add_option("context", sc_context)->required();
  score_cmd->add_option("revids", sc_revids)->required();
  score_cmd->add_option("--models", sc_models, "comma-separated; default all");
  score_cmd->add_option("--models-dir", sc_models_dir)->required();
  score_cmd->add_option("--fixtures", sc_fixtures)->required();
  score_cmd->add_option("--set", sc_sets);
  score_cmd->add_flag("--features", sc_features);
  score_cmd->add_flag("--metrics", sc_metrics, "print the metrics snapshot afterwards");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP scoring service");
  std::string sv_models_dir, sv_fixtures, sv_host = "127.0.0.1", sv_precache_source,
                                            sv_precache_config;
  int sv_port = 8080;
  std::int64_t sv_latency = 0;
  ServiceOptions sv_options;
  std::size_t sv_http_threads = 8;
  serve_cmd->add_option("--models-dir", sv_models_dir)->required();
  serve_cmd->add_option("--fixtures", sv_fixtures)->required();
  serve_cmd->add_option("--host", sv_host);
  serve_cmd->add_option("--port", sv_port)->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--cache-capacity", sv_options.cache_capacity);
  serve_cmd->add_option("--io-workers", sv_options.io_workers)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--cpu-workers", sv_options.cpu_workers, "0 = hardware threads");
  serve_cmd->add_option("--http-threads", sv_http_threads)->check(CLI::PositiveNumber);
  serve_cmd->add_option("--latency-ms", sv_latency, "simulated datasource latency");
  serve_cmd->add_option("--precache-source", sv_precache_source,
                        "change stream: file, - or tcp://host:port");
  serve_cmd->add_option("--precache-config", sv_precache_config,
                        "JSON {context: {model: [events]}}; default all models on revision-create");

  // generate_fixtures
  auto* gen_cmd = app.add_subcommand("generate_fixtures", "Write the synthetic corpus and labels");
  std::string gen_dir;
  std::size_t gen_edits = 1200, gen_articles = 400;
  std::uint64_t gen_seed = 1;
  gen_cmd->add_option("directory", gen_dir)->required();
  gen_cmd->add_option("--edits", gen_edits);
  gen_cmd->add_option("--articles", gen_articles);
  gen_cmd->add_option("--seed", gen_seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << sub->help();
    } else {
      err << app.help();
    }
    return kExitUsage;
  }

  try {
    if (fetch->parsed()) {
      LabelFile labels;
      auto input = open_input(fetch_source);
      if (trace) {
        if (trace_campaign.empty() || trace_labels.empty()) {
          throw Error(ErrorCode::kInvalidFlag, "--trace needs --campaign and --label-set");
        }
        auto converted = labels_from_trace(*input.stream, trace_campaign,
                                           split_list(trace_labels));
        labels = std::move(converted.labels);
        err << converted.events << " events, " << converted.skipped
            << " outside the label set\n";
      } else {
        labels = read_label_file(*input.stream);
      }
      labels.validate();
      if (fetch_out.empty()) {
        write_label_file(out, labels);
      } else {
        write_label_file(fs::path(fetch_out), labels);
      }
      err << labels.records.size() << " labels validated (" << to_string(labels.source)
          << ", campaign " << labels.campaign_id << ")\n";
      return kExitOk;
    }

    if (extract_cmd->parsed()) {
      auto labels = read_label_file(fs::path(ex_labels));
      auto features = load_feature_set(ex_features);
      auto client = FixtureClient::from_directory(ex_fixtures);
      WorkerPool pool("extract", worker_count(ex_workers));
      ExtractOptions options;
      options.failure_tolerance = ex_tolerance;
      options.pool = &pool;
      auto result = extract(labels, features, *client, ex_out, options);
      err << result.dataset.rev_ids.size() << " rows (" << result.reused << " cached, "
          << result.extracted << " extracted, " << result.failures.size() << " failed)\n";
      for (const auto& f : result.failures) err << "  " << f << "\n";
      if (result.failed) {
        err << "error: ExtractionFailed: failure rate above " << ex_tolerance << "\n";
        return kExitDomainError;
      }
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      auto kind = estimator_from_arg(tr_estimator);
      auto features = load_feature_set(tr_features);
      auto dataset = load_dataset_arg(tr_dataset);
      auto model = cv_train(dataset, features, kind, tr_name, flags);
      if (tr_out.empty()) {
        out << serialize_model(model);
        print_model_summary(err, model);
      } else {
        save_model(model, tr_out);
        print_model_summary(out, model);
      }
      return kExitOk;
    }

    if (test_cmd->parsed()) {
      auto model = load_model(te_model);
      auto stats = test_model(model, read_dataset_file(te_dataset));
      out << to_json(stats).dump(2) << "\n";
      return kExitOk;
    }

    if (info_cmd->parsed()) {
      auto model = load_model(mi_model);
      out << model_info(model, mi_path).dump(2) << "\n";
      return kExitOk;
    }

    if (audit_cmd->parsed()) {
      auto model = std::make_shared<const Model>(load_model(au_model));
      auto registry = std::make_shared<ModelRegistry>();
      registry->put(model);
      auto client = FixtureClient::from_directory(au_fixtures);
      ScoringEngine engine(registry, client);
      WorkerPool cpu("audit", worker_count(0));
      engine.set_pools(nullptr, &cpu);
      auto summary = audit_inject(engine, *model, revision_ids_from(au_revisions),
                                  parse_overlay(au_sets), au_target);
      if (au_json) {
        auto doc = summary.to_json();
        doc["probabilities"] = summary.probabilities;
        out << doc.dump() << "\n";
      } else {
        print_audit_table(out, summary);
      }
      return kExitOk;
    }

    if (build_cmd->parsed()) {
      auto manifest = load_manifest(bu_manifest);
      WorkerPool pool("extract", worker_count(bu_workers));
      BuildOptions options;
      options.force = bu_force;
      if (!bu_models.empty()) options.models_dir = bu_models;
      if (!bu_datasets.empty()) options.datasets_dir = bu_datasets;
      options.pool = &pool;
      options.log = &err;
      auto steps = build(manifest, options);
      out << build_summary(steps);
      return kExitOk;
    }

    if (score_cmd->parsed()) {
      auto registry = std::make_shared<ModelRegistry>();
      registry->load_directory(sc_models_dir);
      ScoringService service(registry, FixtureClient::from_directory(sc_fixtures));
      ScoreRequest request;
      request.context_id = sc_context;
      request.model_names =
          sc_models.empty() ? registry->model_names(sc_context) : split_list(sc_models);
      request.revision_ids = sc_revids;
      request.overlay = parse_overlay(sc_sets);
      request.include_features = sc_features;
      out << service.scores(request).to_json().dump(2) << "\n";
      if (sc_metrics) out << service.metrics().snapshot();
      return kExitOk;
    }

    if (serve_cmd->parsed()) {
      auto registry = std::make_shared<ModelRegistry>();
      auto loaded = registry->load_directory(sv_models_dir);
      FixtureClient::Options client_options;
      client_options.simulated_latency = std::chrono::milliseconds(sv_latency);
      auto client = FixtureClient::from_directory(sv_fixtures, client_options);
      ScoringService service(registry, client, sv_options);
      HttpServer server(service, {sv_host, sv_port, sv_http_threads});
      auto port = server.start();
      err << "serving " << loaded << " models on http://" << sv_host << ":" << port << "\n";

      std::unique_ptr<Precacher> precacher;
      std::thread feeder;
      std::atomic<bool> feeder_done{false};
      if (!sv_precache_source.empty()) {
        auto config = sv_precache_config.empty()
                          ? PrecacheConfig::for_all_models(*registry, {"revision-create"})
                          : PrecacheConfig::load(sv_precache_config);
        config.validate(*registry);
        precacher = std::make_unique<Precacher>(service, std::move(config));
        feeder = std::thread([&] {
          try {
            precacher->consume_source(sv_precache_source);
          } catch (const std::exception& e) {
            err << "precache source ended: " << e.what() << "\n";
          }
          feeder_done = true;
        });
      }

      g_stop = false;
      auto old_int = std::signal(SIGINT, on_signal);
      auto old_term = std::signal(SIGTERM, on_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      std::signal(SIGINT, old_int);
      std::signal(SIGTERM, old_term);
      server.stop();
      if (precacher) precacher->stop();
      if (feeder.joinable()) {
        // A reader blocked on stdin or a socket cannot be interrupted.
        if (!feeder_done) {
          out.flush();
          err.flush();
          std::_Exit(kExitOk);
        }
        feeder.join();
      }
      return kExitOk;
    }

    if (gen_cmd->parsed()) {
      generate_fixtures(gen_dir, gen_edits, gen_articles, gen_seed);
      err << "wrote " << gen_edits << " edits and " << gen_articles << " articles under "
          << gen_dir << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.type() << ": " << e.what() << "\n";
    return e.code() == ErrorCode::kInvalidFlag ? kExitUsage : kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomainError;
  }
  return kExitUsage;
}

}  // namespace scorehub::cli
