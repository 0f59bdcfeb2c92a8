// Small trained models over a synthetic corpus, built once per test binary.
#pragma once

#include <memory>

#include "scorehub/synthetic.hpp"
#include "scorehub/training.hpp"

namespace fixtures {

struct World {
  scorehub::synthetic::Corpus edits;
  scorehub::synthetic::Corpus articles;
  std::shared_ptr<scorehub::FixtureClient> client;
  scorehub::FeatureSet features;
  std::shared_ptr<const scorehub::Model> damaging;        // gradient boosting
  std::shared_ptr<const scorehub::Model> damaging_linear;
  std::shared_ptr<const scorehub::Model> articlequality;  // six classes
};

inline std::vector<std::pair<std::int64_t, std::string>> labelled(
    const scorehub::synthetic::Corpus& corpus) {
  return {corpus.labels.begin(), corpus.labels.end()};
}

inline const World& world() {
  static const World w = [] {
    using namespace scorehub;
    World w;
    synthetic::DamagingOptions edit_options;
    edit_options.count = 400;
    w.edits = synthetic::damaging(edit_options);
    synthetic::ArticleQualityOptions article_options;
    article_options.count = 240;
    w.articles = synthetic::article_quality(article_options);
    auto records = w.edits.revisions;
    records.insert(records.end(), w.articles.revisions.begin(), w.articles.revisions.end());
    w.client = std::make_shared<FixtureClient>(records);
    w.features = reference_feature_set("enwiki", synthetic::informal_words(),
                                       synthetic::bad_words());

    auto edits = extract_dataset(w.features, *w.client, "enwiki", labelled(w.edits),
                                 {"true", "false"});
    TrainingOptions boosted;
    boosted.name = "damaging";
    boosted.context = "enwiki";
    boosted.version = "0.4.0";
    boosted.params.hyperparameters = {{"n_estimators", 30}, {"max_depth", 3}};
    boosted.folds = 5;
    w.damaging = std::make_shared<const Model>(train_model(edits, w.features, boosted));

    TrainingOptions linear = boosted;
    linear.name = "damaging_linear";
    linear.params = {};
    linear.params.kind = EstimatorKind::kLinearLogistic;
    linear.params.center = linear.params.scale = true;
    w.damaging_linear = std::make_shared<const Model>(train_model(edits, w.features, linear));

    std::vector<std::string> classes(synthetic::kQualityClasses.begin(),
                                     synthetic::kQualityClasses.end());
    auto articles = extract_dataset(w.features, *w.client, "enwiki",
                                    labelled(w.articles), classes);
    TrainingOptions quality;
    quality.name = "articlequality";
    quality.context = "enwiki";
    quality.params.hyperparameters = {{"n_estimators", 15}, {"max_depth", 3}};
    quality.folds = 4;
    w.articlequality =
        std::make_shared<const Model>(train_model(articles, w.features, quality));
    return w;
  }();
  return w;
}

}  // namespace fixtures
