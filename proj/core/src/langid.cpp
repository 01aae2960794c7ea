#include "replykit/langid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include "replykit/error.hpp"
#include "replykit/serialize.hpp"
#include "replykit/text.hpp"

namespace replykit::langid {

namespace {

std::vector<std::string> char_ngrams(std::string_view input, std::size_t order) {
  std::vector<char32_t> cps;
  text::utf8_decode(input, cps);
  for (char32_t& cp : cps) cp = text::to_lower(cp);
  std::vector<std::string> grams;
  if (cps.size() < order) return grams;
  grams.reserve(cps.size() - order + 1);
  for (std::size_t i = 0; i + order <= cps.size(); ++i) {
    std::string g;
    for (std::size_t k = 0; k < order; ++k) text::utf8_append(g, cps[i + k]);
    grams.push_back(std::move(g));
  }
  return grams;
}

std::string hex_encode(std::string_view s) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(s.size() * 2);
  for (char c : s) {
    const unsigned char u = static_cast<unsigned char>(c);
    out.push_back(digits[u >> 4]);
    out.push_back(digits[u & 0xF]);
  }
  return out;
}

std::string hex_decode(std::string_view s) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  if (s.size() % 2 != 0) throw DataError("langid table: odd hex length");
  std::string out;
  out.reserve(s.size() / 2);
  for (std::size_t i = 0; i < s.size(); i += 2) {
    const int hi = nibble(s[i]);
    const int lo = nibble(s[i + 1]);
    if (hi < 0 || lo < 0) throw DataError("langid table: bad hex digit");
    out.push_back(static_cast<char>((hi << 4) | lo));
  }
  return out;
}

}  // namespace

LangIdModel train_langid(const std::vector<std::pair<std::string, std::string>>& labeled_texts,
                         TrainOptions options) {
  if (options.ngram_order == 0) throw ConfigError("ngram order must be >= 1");
  if (options.smoothing <= 0.0) throw ConfigError("smoothing must be > 0");
  if (labeled_texts.empty()) throw ConfigError("langid training set is empty");

  std::map<std::string, std::unordered_map<std::string, std::size_t>> counts;
  std::map<std::string, std::size_t> totals;
  std::map<std::string, std::size_t> text_counts;
  std::set<std::string> vocab;
  for (const auto& [text_body, lang] : labeled_texts) {
    if (lang.empty()) throw ConfigError("empty language label");
    ++text_counts[lang];
    for (std::string& g : char_ngrams(text_body, options.ngram_order)) {
      vocab.insert(g);
      ++counts[lang][g];
      ++totals[lang];
    }
  }
  if (text_counts.size() < 2) {
    throw ConfigError("langid needs at least two languages");
  }

  LangIdModel model;
  model.ngram_order = options.ngram_order;
  model.smoothing = options.smoothing;
  model.vocab_size = vocab.size();
  for (const auto& [lang, n] : text_counts) model.languages.push_back(lang);

  const double n_texts = static_cast<double>(labeled_texts.size());
  const double k = options.smoothing;
  // One extra smoothing slot keeps unseen grams inside the distribution mass.
  const double slots = static_cast<double>(model.vocab_size) + 1.0;
  for (const std::string& lang : model.languages) {
    model.log_priors[lang] =
        std::log(static_cast<double>(text_counts[lang]) / n_texts);
    const double total = static_cast<double>(totals[lang]);
    model.log_floors[lang] = std::log(k / (total + k * slots));
    for (const auto& [gram, c] : counts[lang]) {
      model.log_likelihoods[{lang, gram}] =
          std::log((static_cast<double>(c) + k) / (total + k * slots));
    }
  }
  return model;
}

std::map<std::string, double> predict(const LangIdModel& model, std::string_view text_body) {
  if (model.languages.size() < 2) throw ConfigError("langid model has no label set");
  std::map<std::string, double> scores;
  const std::vector<std::string> grams = char_ngrams(text_body, model.ngram_order);

  std::vector<char32_t> cps;
  text::utf8_decode(text_body, cps);
  if (cps.empty()) {
    const double u = 1.0 / static_cast<double>(model.languages.size());
    for (const std::string& lang : model.languages) scores[lang] = u;
    return scores;
  }

  std::vector<double> logp(model.languages.size());
  for (std::size_t i = 0; i < model.languages.size(); ++i) {
    const std::string& lang = model.languages[i];
    double lp = model.log_priors.at(lang);
    const double floor = model.log_floors.at(lang);
    for (const std::string& g : grams) {
      auto it = model.log_likelihoods.find({lang, g});
      lp += it != model.log_likelihoods.end() ? it->second : floor;
    }
    logp[i] = lp;
  }
  const double mx = *std::max_element(logp.begin(), logp.end());
  double z = 0.0;
  for (double& v : logp) {
    v = std::exp(v - mx);
    z += v;
  }
  for (std::size_t i = 0; i < model.languages.size(); ++i) {
    scores[model.languages[i]] = logp[i] / z;
  }
  return scores;
}

std::string serialize(const LangIdModel& model) {
  std::string out = "replykit-langid 1\n";
  char line[512];
  std::snprintf(line, sizeof line, "order %zu\nsmoothing %.17g\nvocab %zu\nlanguages %zu\n",
                model.ngram_order, model.smoothing, model.vocab_size, model.languages.size());
  out += line;
  for (const std::string& lang : model.languages) {
    std::snprintf(line, sizeof line, "lang %s %.17g %.17g\n", lang.c_str(),
                  model.log_priors.at(lang), model.log_floors.at(lang));
    out += line;
  }
  std::snprintf(line, sizeof line, "ngrams %zu\n", model.log_likelihoods.size());
  out += line;
  for (const auto& [key, logp] : model.log_likelihoods) {
    std::snprintf(line, sizeof line, "g %s %s %.17g\n", key.first.c_str(),
                  hex_encode(key.second).c_str(), logp);
    out += line;
  }
  return out;
}

LangIdModel deserialize(const std::string& table) {
  std::istringstream in(table);
  std::string word;
  int version = 0;
  in >> word >> version;
  if (word != "replykit-langid" || version != 1) {
    throw DataError("not a langid model table");
  }
  LangIdModel model;
  std::size_t n_langs = 0;
  in >> word >> model.ngram_order;
  in >> word >> model.smoothing;
  in >> word >> model.vocab_size;
  in >> word >> n_langs;
  for (std::size_t i = 0; i < n_langs; ++i) {
    std::string lang;
    double prior = 0.0, floor = 0.0;
    in >> word >> lang >> prior >> floor;
    if (word != "lang" || !in) throw DataError("langid table: bad language row");
    model.languages.push_back(lang);
    model.log_priors[lang] = prior;
    model.log_floors[lang] = floor;
  }
  std::size_t n_grams = 0;
  in >> word >> n_grams;
  if (word != "ngrams" || !in) throw DataError("langid table: bad ngram header");
  for (std::size_t i = 0; i < n_grams; ++i) {
    std::string lang, hex;
    double logp = 0.0;
    in >> word >> lang >> hex >> logp;
    if (word != "g" || !in) throw DataError("langid table: bad ngram row");
    model.log_likelihoods[{lang, hex_decode(hex)}] = logp;
  }
  return model;
}

void save(const LangIdModel& model, const std::string& path) {
  write_file_atomic(path, serialize(model));
}

LangIdModel load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace replykit::langid
