#include "polnmf/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace polnmf {

namespace {

using nlohmann::json;

// Appends every string of `items` not yet seen to `vocab`.
void extend_vocab(std::vector<std::string>& vocab, std::unordered_set<std::string>& seen,
                  const std::vector<std::string>& items) {
  for (const auto& s : items)
    if (seen.insert(s).second) vocab.push_back(s);
}

void register_user(Corpus& c, std::unordered_set<UserId>& seen, const UserId& u) {
  if (seen.insert(u).second) c.users.push_back(u);
}

void check_tweet(const Tweet& t, std::size_t line) {
  if (t.author.empty()) throw ParseError(line, "empty author");
  if (t.retweet_edited && !t.retweet_of) throw ParseError(line, "retweet_edited set without retweet_of");
  if (t.retweet_of && t.retweet_of->empty()) throw ParseError(line, "empty retweet_of");
  auto no_empty = [&](const std::vector<std::string>& v, const char* field) {
    for (const auto& s : v)
      if (s.empty()) throw ParseError(line, std::string("empty string in ") + field);
  };
  no_empty(t.tokens, "tokens");
  no_empty(t.hashtags, "hashtags");
  no_empty(t.url_domains, "url_domains");
  no_empty(t.mentions, "mentions");
}

std::vector<std::string> json_strings(const json& obj, const char* key, std::size_t line) {
  if (!obj.contains(key) || obj[key].is_null()) return {};
  const auto& arr = obj[key];
  if (!arr.is_array()) throw ParseError(line, std::string(key) + " must be an array");
  std::vector<std::string> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_string()) throw ParseError(line, std::string(key) + " entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

Tweet tweet_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw ParseError(line, "record is not a JSON object");
  Tweet t;
  if (!obj.contains("author") || !obj["author"].is_string()) throw ParseError(line, "missing string field 'author'");
  t.author = obj["author"].get<std::string>();
  if (obj.contains("id") && !obj["id"].is_null()) {
    const auto& id = obj["id"];
    if (id.is_string())
      t.id = id.get<std::string>();
    else if (id.is_number_integer())
      t.id = std::to_string(id.get<std::int64_t>());
    else
      throw ParseError(line, "'id' must be a string or integer");
  }
  t.tokens = json_strings(obj, "tokens", line);
  t.hashtags = json_strings(obj, "hashtags", line);
  t.url_domains = json_strings(obj, "url_domains", line);
  t.mentions = json_strings(obj, "mentions", line);
  if (obj.contains("retweet_of") && !obj["retweet_of"].is_null()) {
    if (!obj["retweet_of"].is_string()) throw ParseError(line, "'retweet_of' must be a string or null");
    t.retweet_of = obj["retweet_of"].get<std::string>();
  }
  if (obj.contains("retweet_edited") && !obj["retweet_edited"].is_null()) {
    if (!obj["retweet_edited"].is_boolean()) throw ParseError(line, "'retweet_edited' must be a boolean");
    t.retweet_edited = obj["retweet_edited"].get<bool>();
  }
  if (obj.contains("timestamp") && !obj["timestamp"].is_null()) {
    if (!obj["timestamp"].is_number_integer()) throw ParseError(line, "'timestamp' must be an integer");
    t.timestamp = obj["timestamp"].get<std::int64_t>();
  }
  return t;
}

// RFC 4180 style split of a single line; no embedded newlines.
std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ParseError(line_no, "unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

const std::vector<std::string> kCsvColumns = {"id",     "author",   "timestamp",   "retweet_of", "retweet_edited",
                                              "tokens", "hashtags", "url_domains", "mentions"};

Tweet tweet_from_csv(const std::vector<std::string>& f, const std::vector<int>& col, std::size_t line) {
  auto get = [&](std::size_t which) -> std::string {
    int c = col[which];
    return c < 0 ? std::string() : f[static_cast<std::size_t>(c)];
  };
  Tweet t;
  t.id = get(0);
  t.author = get(1);
  const std::string ts = get(2);
  if (!ts.empty()) {
    try {
      std::size_t pos = 0;
      t.timestamp = std::stoll(ts, &pos);
      if (pos != ts.size()) throw std::invalid_argument(ts);
    } catch (const std::exception&) {
      throw ParseError(line, "bad timestamp '" + ts + "'");
    }
  }
  const std::string rt = get(3);
  if (!rt.empty()) t.retweet_of = rt;
  const std::string edited = get(4);
  if (edited == "true" || edited == "1")
    t.retweet_edited = true;
  else if (!edited.empty() && edited != "false" && edited != "0")
    throw ParseError(line, "bad retweet_edited '" + edited + "'");
  t.tokens = split_ws(get(5));
  t.hashtags = split_ws(get(6));
  t.url_domains = split_ws(get(7));
  t.mentions = split_ws(get(8));
  return t;
}

void finalize_raw(Corpus& c) {
  std::unordered_set<UserId> users;
  std::unordered_set<std::string> words, tags, domains;
  for (const auto& t : c.tweets) {
    register_user(c, users, t.author);
    if (t.retweet_of) register_user(c, users, *t.retweet_of);
    for (const auto& m : t.mentions) register_user(c, users, m);
    extend_vocab(c.word_vocab, words, t.tokens);
    extend_vocab(c.hashtag_vocab, tags, t.hashtags);
    extend_vocab(c.domain_vocab, domains, t.url_domains);
  }
}

void add_tweet(Corpus& c, std::unordered_set<std::string>& ids, Tweet t, std::size_t line) {
  check_tweet(t, line);
  if (!t.id.empty() && !ids.insert(t.id).second) throw ParseError(line, "duplicate tweet id '" + t.id + "'");
  c.tweets.push_back(std::move(t));
}

std::unordered_map<std::string, std::size_t> count_items(const std::vector<Tweet>& tweets,
                                                          std::vector<std::string> Tweet::*field) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& t : tweets)
    for (const auto& s : t.*field) ++counts[s];
  return counts;
}

// Drops items below `min_freq` (or in `banned`) from every tweet and from `vocab`.
void threshold_field(std::vector<Tweet>& tweets, std::vector<std::string> Tweet::*field,
                     std::vector<std::string>& vocab, std::size_t min_freq,
                     const std::unordered_set<std::string>& banned) {
  const auto counts = count_items(tweets, field);
  auto keep = [&](const std::string& s) {
    if (banned.count(s)) return false;
    auto it = counts.find(s);
    return it != counts.end() && it->second >= min_freq;
  };
  for (auto& t : tweets) std::erase_if(t.*field, [&](const std::string& s) { return !keep(s); });
  std::erase_if(vocab, [&](const std::string& s) { return !keep(s); });
}

}  // namespace

bool Tweet::has_content() const {
  return !tokens.empty() || !hashtags.empty() || !url_domains.empty() || !mentions.empty() || retweet_of.has_value();
}

std::unordered_map<UserId, std::size_t> Corpus::user_index() const {
  std::unordered_map<UserId, std::size_t> idx;
  idx.reserve(users.size());
  for (std::size_t i = 0; i < users.size(); ++i) idx.emplace(users[i], i);
  return idx;
}

CorpusFormat parse_corpus_format(const std::string& name) {
  if (name == "jsonl") return CorpusFormat::jsonl;
  if (name == "csv") return CorpusFormat::csv;
  throw std::invalid_argument("unknown corpus format '" + name + "' (expected jsonl or csv)");
}

void PreprocessConfig::validate() const {
  if (min_word_freq < 1 || min_hashtag_freq < 1 || min_domain_freq < 1 || max_tweets_per_user < 1)
    throw std::invalid_argument("preprocess thresholds and caps must be >= 1");
}

ParseError::ParseError(std::size_t line, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

Corpus parse_corpus(const std::filesystem::path& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file " + path.string());
  return parse_corpus(in, format);
}

Corpus parse_corpus(std::istream& in, CorpusFormat format) {
  Corpus c;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;

  if (format == CorpusFormat::jsonl) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json obj;
      try {
        obj = json::parse(line);
      } catch (const json::parse_error& e) {
        throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
      }
      add_tweet(c, ids, tweet_from_json(obj, line_no), line_no);
    }
  } else {
    std::vector<int> col(kCsvColumns.size(), -1);
    bool have_header = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_csv_line(line, line_no);
      if (!have_header) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
          auto it = std::find(kCsvColumns.begin(), kCsvColumns.end(), fields[i]);
          if (it == kCsvColumns.end()) throw ParseError(line_no, "unknown CSV column '" + fields[i] + "'");
          col[static_cast<std::size_t>(it - kCsvColumns.begin())] = static_cast<int>(i);
        }
        if (col[1] < 0) throw ParseError(line_no, "CSV header lacks 'author'");
        have_header = true;
        continue;
      }
      std::size_t expected = 0;
      for (int ci : col) expected = std::max(expected, static_cast<std::size_t>(ci + 1));
      if (fields.size() != expected)
        throw ParseError(line_no, "expected " + std::to_string(expected) + " fields, got " + std::to_string(fields.size()));
      add_tweet(c, ids, tweet_from_csv(fields, col, line_no), line_no);
    }
  }
  finalize_raw(c);
  return c;
}

void write_jsonl(const Corpus& corpus, std::ostream& out) {
  for (const auto& t : corpus.tweets) {
    json obj;
    if (!t.id.empty()) obj["id"] = t.id;
    obj["author"] = t.author;
    obj["tokens"] = t.tokens;
    obj["hashtags"] = t.hashtags;
    obj["url_domains"] = t.url_domains;
    obj["mentions"] = t.mentions;
    obj["retweet_of"] = t.retweet_of ? json(*t.retweet_of) : json(nullptr);
    obj["retweet_edited"] = t.retweet_edited;
    obj["timestamp"] = t.timestamp;
    out << obj.dump() << '\n';
  }
}

std::unordered_set<std::string> read_stopwords(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stop-word file " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    words.insert(line.substr(b, e - b + 1));
  }
  return words;
}

Corpus preprocess(const Corpus& corpus, const PreprocessConfig& cfg) {
  cfg.validate();
  auto stop = cfg.stopwords;
  if (cfg.stopword_file) stop.merge(read_stopwords(*cfg.stopword_file));

  std::vector<Tweet> tweets;
  tweets.reserve(corpus.tweets.size());
  for (const auto& t : corpus.tweets)
    if (!cfg.min_timestamp || t.timestamp >= *cfg.min_timestamp) tweets.push_back(t);

  // Keep the most recent tweets of each user; ties favour later records.
  {
    std::unordered_map<UserId, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < tweets.size(); ++i) by_user[tweets[i].author].push_back(i);
    std::vector<char> keep(tweets.size(), 1);
    for (auto& [user, idx] : by_user) {
      if (idx.size() <= cfg.max_tweets_per_user) continue;
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (tweets[a].timestamp != tweets[b].timestamp) return tweets[a].timestamp > tweets[b].timestamp;
        return a > b;
      });
      for (std::size_t j = cfg.max_tweets_per_user; j < idx.size(); ++j) keep[idx[j]] = 0;
    }
    std::vector<Tweet> capped;
    capped.reserve(tweets.size());
    for (std::size_t i = 0; i < tweets.size(); ++i)
      if (keep[i]) capped.push_back(std::move(tweets[i]));
    tweets = std::move(capped);
  }

  Corpus out;
  out.word_vocab = corpus.word_vocab;
  out.hashtag_vocab = corpus.hashtag_vocab;
  out.domain_vocab = corpus.domain_vocab;
  threshold_field(tweets, &Tweet::tokens, out.word_vocab, cfg.min_word_freq, stop);
  threshold_field(tweets, &Tweet::hashtags, out.hashtag_vocab, cfg.min_hashtag_freq, {});
  threshold_field(tweets, &Tweet::url_domains, out.domain_vocab, cfg.min_domain_freq, {});

  std::erase_if(tweets, [](const Tweet& t) { return !t.has_content(); });

  std::unordered_set<UserId> authors;
  for (const auto& t : tweets) authors.insert(t.author);
  for (const auto& u : corpus.users)
    if (authors.count(u)) out.users.push_back(u);
  // Authors missing from the input user list (hand-built corpora) go last.
  if (out.users.size() != authors.size()) {
    std::unordered_set<UserId> listed(out.users.begin(), out.users.end());
    for (const auto& t : tweets)
      if (listed.insert(t.author).second) out.users.push_back(t.author);
  }
  out.tweets = std::move(tweets);
  return out;
}

namespace {

FeatureMatrix count_matrix(const Corpus& c, const std::unordered_map<UserId, std::size_t>& users,
                           const std::vector<std::string>& vocab, std::vector<std::string> Tweet::*field,
                           bool include_retweets) {
  std::unordered_map<std::string, std::size_t> col;
  col.reserve(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) col.emplace(vocab[j], j);
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& t : c.tweets) {
    if (!include_retweets && t.retweet_of) continue;
    auto u = users.find(t.author);
    if (u == users.end()) continue;
    for (const auto& s : t.*field) {
      auto it = col.find(s);
      if (it != col.end())
        trips.emplace_back(static_cast<int>(u->second), static_cast<int>(it->second), 1.0);
    }
  }
  FeatureMatrix m(static_cast<Eigen::Index>(c.users.size()), static_cast<Eigen::Index>(vocab.size()));
  m.setFromTriplets(trips.begin(), trips.end());  // duplicates are summed
  return m;
}

}  // namespace

FeatureMatrices build_feature_matrices(const Corpus& corpus, const FeatureOptions& opts) {
  const auto users = corpus.user_index();
  return {count_matrix(corpus, users, corpus.word_vocab, &Tweet::tokens, opts.include_retweet_text),
          count_matrix(corpus, users, corpus.hashtag_vocab, &Tweet::hashtags, opts.include_retweet_text),
          count_matrix(corpus, users, corpus.domain_vocab, &Tweet::url_domains, opts.include_retweet_text)};
}

}  // namespace polnmf
