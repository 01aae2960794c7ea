#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace replykit::langid {

// Multinomial Naive Bayes over character n-grams. Texts are lowercased before
// counting; the model is immutable once trained and safe to share across
// threads.
struct LangIdModel {
  std::size_t ngram_order = 3;
  double smoothing = 1.0;
  std::size_t vocab_size = 0;  // distinct n-grams across all languages
  std::vector<std::string> languages;  // sorted
  std::map<std::string, double> log_priors;
  // log P(gram | language) for observed grams; unseen grams take log_floors.
  std::map<std::pair<std::string, std::string>, double> log_likelihoods;
  std::map<std::string, double> log_floors;
};

struct TrainOptions {
  std::size_t ngram_order = 3;
  double smoothing = 1.0;
};

// Requires at least two languages with one text each.
LangIdModel train_langid(const std::vector<std::pair<std::string, std::string>>& labeled_texts,
                         TrainOptions options = {});

// Posterior P(language | text), normalized to sum to 1. A text yielding no
// n-grams (empty after normalization) gets exact uniform scores, which is
// below any useful confidence threshold.
std::map<std::string, double> predict(const LangIdModel& model, std::string_view text);

// Text table format, documented in docs/formats.md.
std::string serialize(const LangIdModel& model);
LangIdModel deserialize(const std::string& table);
void save(const LangIdModel& model, const std::string& path);
LangIdModel load(const std::string& path);

}  // namespace replykit::langid
