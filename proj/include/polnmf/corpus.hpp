#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/SparseCore>

namespace polnmf {

using UserId = std::string;

struct Tweet {
  std::string id;  // optional in input; empty means "no id"
  UserId author;
  std::vector<std::string> tokens;
  std::vector<std::string> hashtags;
  std::vector<std::string> url_domains;
  std::vector<UserId> mentions;
  std::optional<UserId> retweet_of;
  bool retweet_edited = false;
  std::int64_t timestamp = 0;

  // True when the tweet carries any words, hashtags, domains or interactions.
  bool has_content() const;

  bool operator==(const Tweet&) const = default;
};

struct Corpus {
  std::vector<UserId> users;  // first-appearance order
  std::vector<Tweet> tweets;
  std::vector<std::string> word_vocab;
  std::vector<std::string> hashtag_vocab;
  std::vector<std::string> domain_vocab;

  std::unordered_map<UserId, std::size_t> user_index() const;

  bool operator==(const Corpus&) const = default;
};

enum class CorpusFormat { jsonl, csv };

CorpusFormat parse_corpus_format(const std::string& name);

struct PreprocessConfig {
  std::size_t min_word_freq = 20;
  std::size_t min_hashtag_freq = 2;
  std::size_t min_domain_freq = 2;
  std::size_t max_tweets_per_user = 200;
  std::optional<std::filesystem::path> stopword_file;
  std::unordered_set<std::string> stopwords;  // merged with stopword_file
  std::optional<std::int64_t> min_timestamp;

  // Throws std::invalid_argument when a count is zero.
  void validate() const;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format);
Corpus parse_corpus(std::istream& in, CorpusFormat format);

// One JSON object per line, same schema parse_corpus reads.
void write_jsonl(const Corpus& corpus, std::ostream& out);

std::unordered_set<std::string> read_stopwords(const std::filesystem::path& path);

// Steps, in order: timestamp cut, per-user cap on most recent tweets, word
// threshold and stop words, hashtag/domain thresholds, drop empty tweets,
// drop users left without tweets. Each step runs once.
Corpus preprocess(const Corpus& corpus, const PreprocessConfig& cfg);

// Users x features, integer counts stored as double.
using FeatureMatrix = Eigen::SparseMatrix<double>;

struct FeatureOptions {
  bool include_retweet_text = true;
};

struct FeatureMatrices {
  FeatureMatrix words;     // X_uw
  FeatureMatrix hashtags;  // X_uh
  FeatureMatrix domains;   // X_ud
};

FeatureMatrices build_feature_matrices(const Corpus& corpus, const FeatureOptions& opts = {});

}  // namespace polnmf
