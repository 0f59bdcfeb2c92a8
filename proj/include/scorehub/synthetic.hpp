#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scorehub/datasources.hpp"

namespace scorehub::synthetic {

struct Corpus {
  std::vector<RevisionRecord> revisions;
  std::map<std::int64_t, std::string> labels;
};

// Edit-quality revisions labelled "true" (damaging) or "false". Damage is
// either page blanking or a large spam insertion, so the text signal is
// two-sided in bytes_changed; anonymous editors make most damaging edits.
struct DamagingOptions {
  std::string context = "enwiki";
  std::size_t count = 1000;
  double damaging_rate = 0.3;
  double anon_given_damaging = 0.85;
  double anon_given_good = 0.15;
  // Fraction of labels flipped after generation.
  double label_noise = 0.03;
  std::int64_t first_id = 1000000;
  std::uint64_t seed = 1;
};
Corpus damaging(const DamagingOptions& options);

// Article revisions labelled with one of the six assessment classes; length,
// references, headers and images grow with quality.
struct ArticleQualityOptions {
  std::string context = "enwiki";
  std::size_t count = 600;
  std::int64_t first_id = 5000000;
  std::uint64_t seed = 2;
};
inline const std::vector<std::string> kQualityClasses = {"FA", "GA",    "B",
                                                         "C",  "Start", "Stub"};
Corpus article_quality(const ArticleQualityOptions& options);

std::vector<std::string> informal_words();
std::vector<std::string> bad_words();

}  // namespace scorehub::synthetic
