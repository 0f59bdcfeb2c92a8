#include "scorehub/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace scorehub::synthetic {

namespace {

using Rng = std::mt19937_64;

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words{
      "the",      "river",     "valley",   "was",       "founded",  "in",
      "century",  "by",        "settlers", "who",       "built",    "a",
      "church",   "and",       "school",   "population", "grew",    "during",
      "railway",  "expansion", "town",     "council",   "elected",  "mayor",
      "economy",  "relies",    "on",       "farming",   "tourism",  "local",
      "museum",   "hosts",     "annual",   "festival",  "notable",  "residents",
      "include",  "several",   "authors",  "painters",  "bridge",   "crosses",
      "north",    "of",        "station",  "opened",    "closed",   "later",
      "history",  "region",    "known",    "for",       "its",      "climate",
      "winters",  "are",       "mild",     "summers",   "warm",     "with",
      "rainfall", "spread",    "evenly",   "across",    "year",     "district"};
  return words;
}

std::string pick(Rng& rng, const std::vector<std::string>& options) {
  std::uniform_int_distribution<std::size_t> i(0, options.size() - 1);
  return options[i(rng)];
}

int uniform(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

std::string sentence(Rng& rng) {
  int n = uniform(rng, 6, 14);
  std::string out;
  for (int i = 0; i < n; ++i) {
    std::string w = pick(rng, vocabulary());
    if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    if (i) out += ' ';
    out += w;
  }
  return out + ".";
}

std::string reference(Rng& rng) {
  return "<ref>Source " + std::to_string(uniform(rng, 1, 999)) + "</ref>";
}

std::string paragraph(Rng& rng, double ref_rate) {
  std::string out;
  int n = uniform(rng, 2, 5);
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += sentence(rng);
    if (chance(rng, ref_rate)) out += reference(rng);
  }
  return out + "\n";
}

struct ArticleShape {
  int paragraphs;
  int sections;
  double ref_rate;
  int images;
  int categories;
};

std::string article(Rng& rng, const ArticleShape& shape) {
  std::string out;
  int per_section = std::max(1, shape.paragraphs / std::max(1, shape.sections));
  for (int p = 0; p < shape.paragraphs; ++p) {
    if (shape.sections > 0 && p > 0 && p % per_section == 0) {
      out += "== " + pick(rng, vocabulary()) + " ==\n";
    }
    if (p < shape.images) out += "[[File:Photo" + std::to_string(p) + ".jpg|thumb]]\n";
    out += paragraph(rng, shape.ref_rate);
  }
  for (int c = 0; c < shape.categories; ++c) {
    out += "[[Category:" + pick(rng, vocabulary()) + "]]\n";
  }
  return out;
}

std::int64_t log_uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return static_cast<std::int64_t>(std::exp(u(rng)));
}

constexpr std::int64_t kDay = 86400;

}  // namespace

std::vector<std::string> informal_words() {
  return {"lol", "haha+", "omg", "yolo", "dude", "wtf", "gonna", "wanna", "kinda",
          "sucks", "awesome", "coolest"};
}

std::vector<std::string> bad_words() {
  return {"idiot", "stupid", "dumb", "loser", "moron", "crap", "jerk", "fool"};
}

Corpus damaging(const DamagingOptions& options) {
  Rng rng(options.seed);
  Corpus corpus;
  const auto informal = informal_words();
  const auto bad = bad_words();
  for (std::size_t i = 0; i < options.count; ++i) {
    RevisionRecord rec;
    rec.revision_id = options.first_id + static_cast<std::int64_t>(i);
    rec.context_id = options.context;
    rec.timestamp = 1500000000 + static_cast<std::int64_t>(i) * 60;
    ArticleShape shape{uniform(rng, 4, 30), uniform(rng, 0, 4), 0.2, uniform(rng, 0, 1),
                       uniform(rng, 0, 3)};
    rec.parent_text = article(rng, shape);
    bool damaging = chance(rng, options.damaging_rate);
    rec.user_is_anon =
        chance(rng, damaging ? options.anon_given_damaging : options.anon_given_good);
    if (rec.user_is_anon) {
      rec.user_account_age_seconds = 0;
    } else if (damaging) {
      rec.user_account_age_seconds = log_uniform(rng, 60, 60.0 * kDay);
    } else {
      rec.user_account_age_seconds = log_uniform(rng, 1.0 * kDay, 3650.0 * kDay);
    }

    if (!damaging) {
      int kind = uniform(rng, 0, 2);
      if (kind == 0) {  // addition
        rec.text = rec.parent_text + paragraph(rng, 0.4);
      } else if (kind == 1) {  // copyedit
        rec.text = rec.parent_text;
        auto pos = rec.text.find(' ', rec.text.size() / 2);
        if (pos != std::string::npos) rec.text.insert(pos, " " + pick(rng, vocabulary()));
      } else {  // trim the last paragraph
        auto cut = rec.parent_text.rfind('\n', rec.parent_text.size() - 2);
        rec.text = rec.parent_text.substr(0, cut == std::string::npos ? 0 : cut + 1);
        rec.text += sentence(rng) + "\n";
      }
      if (chance(rng, 0.03)) rec.text += pick(rng, informal) + "\n";
    } else if (chance(rng, 0.55)) {  // blanking
      rec.text = chance(rng, 0.5) ? std::string() : sentence(rng) + "\n";
      if (chance(rng, 0.3)) rec.text += pick(rng, chance(rng, 0.5) ? informal : bad) + "\n";
    } else {  // spam
      std::string junk;
      int repeats = uniform(rng, 25, 60);
      for (int r = 0; r < repeats; ++r) {
        junk += "Visit our shop for cheap " + pick(rng, vocabulary()) + " deals. ";
      }
      if (chance(rng, 0.3)) junk += pick(rng, chance(rng, 0.5) ? informal : bad) + " ";
      rec.text = rec.parent_text + junk + "\n";
    }
    bool label = chance(rng, options.label_noise) ? !damaging : damaging;
    corpus.labels[rec.revision_id] = label ? "true" : "false";
    corpus.revisions.push_back(std::move(rec));
  }
  return corpus;
}

Corpus article_quality(const ArticleQualityOptions& options) {
  Rng rng(options.seed);
  Corpus corpus;
  for (std::size_t i = 0; i < options.count; ++i) {
    // 0 = Stub ... 5 = FA
    int q = static_cast<int>(i % kQualityClasses.size());
    const std::string& label = kQualityClasses[kQualityClasses.size() - 1 - q];
    ArticleShape shape{std::max(1, uniform(rng, 1, 3) + q * q * 2 + uniform(rng, -q, q)),
                       std::max(0, q * 2 + uniform(rng, -1, 1)), 0.1 + 0.15 * q,
                       std::max(0, q - 1 + uniform(rng, -1, 1)), 1 + q / 2};
    RevisionRecord rec;
    rec.revision_id = options.first_id + static_cast<std::int64_t>(i);
    rec.context_id = options.context;
    rec.timestamp = 1500000000 + static_cast<std::int64_t>(i) * 60;
    rec.text = article(rng, shape);
    auto cut = rec.text.rfind('\n', rec.text.size() > 1 ? rec.text.size() - 2 : 0);
    rec.parent_text = rec.text.substr(0, cut == std::string::npos ? 0 : cut + 1);
    rec.user_is_anon = chance(rng, 0.2);
    rec.user_account_age_seconds =
        rec.user_is_anon ? 0 : log_uniform(rng, 1.0 * kDay, 3650.0 * kDay);
    corpus.labels[rec.revision_id] = label;
    corpus.revisions.push_back(std::move(rec));
  }
  return corpus;
}

}  // namespace scorehub::synthetic
