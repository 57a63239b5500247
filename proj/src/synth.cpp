#include "polnmf/synth.hpp"

#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace polnmf {

namespace {

class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : rng_(seed) {}

  double unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }
  std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(unit() * static_cast<double>(n))); }

 private:
  std::mt19937_64 rng_;
};

// Per-camp item pools plus an optional shared pool, drawn with noise.
struct Pools {
  std::vector<std::vector<std::string>> own;
  std::vector<std::string> shared;

  const std::string& draw(Sampler& s, int camp, double noise) const {
    const auto& mine = own[static_cast<std::size_t>(camp)];
    if (own.size() == 1 && shared.empty()) return mine[s.index(mine.size())];
    if (!s.chance(noise)) return mine[s.index(mine.size())];
    // Uniform over everything outside the author's own pool.
    std::size_t foreign = shared.size();
    for (std::size_t c = 0; c < own.size(); ++c)
      if (static_cast<int>(c) != camp) foreign += own[c].size();
    if (foreign == 0) return mine[s.index(mine.size())];
    std::size_t pick = s.index(foreign);
    if (pick < shared.size()) return shared[pick];
    pick -= shared.size();
    for (std::size_t c = 0; c < own.size(); ++c) {
      if (static_cast<int>(c) == camp) continue;
      if (pick < own[c].size()) return own[c][pick];
      pick -= own[c].size();
    }
    return mine.front();
  }
};

Pools make_pools(int camps, int per_camp, int shared, const char* tag, const char* suffix) {
  Pools p;
  char buf[64];
  p.own.resize(static_cast<std::size_t>(camps));
  for (int c = 0; c < camps; ++c)
    for (int j = 0; j < per_camp; ++j) {
      std::snprintf(buf, sizeof buf, "c%d%s%d%s", c, tag, j, suffix);
      p.own[static_cast<std::size_t>(c)].emplace_back(buf);
    }
  for (int j = 0; j < shared; ++j) {
    std::snprintf(buf, sizeof buf, "s%s%d%s", tag, j, suffix);
    p.shared.emplace_back(buf);
  }
  return p;
}

void register_vocab(std::vector<std::string>& vocab, std::unordered_set<std::string>& seen,
                    const std::vector<std::string>& items) {
  for (const auto& s : items)
    if (seen.insert(s).second) vocab.push_back(s);
}

}  // namespace

void SynthConfig::validate() const {
  auto rate = [](double r) { return r >= 0 && r <= 1; };
  if (k_true < 1 || users_per_community < 1 || vocab_per_community < 1 || tweets_per_user < 1 || tokens_per_tweet < 1 ||
      shared_vocab < 0 || hashtags_per_community < 1 || domains_per_community < 1)
    throw std::invalid_argument("synth: sizes must be positive");
  if (!rate(inner_retweet_rate) || !rate(cross_retweet_rate) || !rate(inner_mention_rate) ||
      !rate(cross_mention_rate) || !rate(word_noise) || !rate(edited_retweet_share) || !rate(hashtag_rate) ||
      !rate(domain_rate))
    throw std::invalid_argument("synth: rates must lie in [0, 1]");
  if (!(cross_retweet_rate < inner_retweet_rate))
    throw std::invalid_argument("synth: cross_retweet_rate must be below inner_retweet_rate");
}

SynthCorpus generate(const SynthConfig& cfg) {
  cfg.validate();
  Sampler s(cfg.seed);
  const int n = cfg.users();
  const auto words = make_pools(cfg.k_true, cfg.vocab_per_community, cfg.shared_vocab, "w", "");
  const auto tags = make_pools(cfg.k_true, cfg.hashtags_per_community, 0, "h", "");
  const auto domains = make_pools(cfg.k_true, cfg.domains_per_community, 0, "d", ".example");

  SynthCorpus out;
  std::vector<UserId> ids;
  char buf[32];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof buf, "u%04d", i);
    ids.emplace_back(buf);
    out.labels.push_back(i / cfg.users_per_community);
  }
  auto camp = [&](int user) { return out.labels[static_cast<std::size_t>(user)]; };

  std::int64_t clock = 1'500'000'000;
  std::size_t next_id = 0;
  auto new_tweet = [&](int author, int content_camp) {
    Tweet t;
    t.id = "t" + std::to_string(next_id++);
    t.author = ids[static_cast<std::size_t>(author)];
    t.timestamp = clock;
    clock += 60;
    for (int w = 0; w < cfg.tokens_per_tweet; ++w) t.tokens.push_back(words.draw(s, content_camp, cfg.word_noise));
    if (s.chance(cfg.hashtag_rate)) t.hashtags.push_back(tags.draw(s, content_camp, cfg.word_noise));
    if (s.chance(cfg.domain_rate)) t.url_domains.push_back(domains.draw(s, content_camp, cfg.word_noise));
    return t;
  };

  std::vector<Tweet> tweets;
  std::vector<std::vector<std::size_t>> own_tweets(static_cast<std::size_t>(n));
  for (int u = 0; u < n; ++u)
    for (int t = 0; t < cfg.tweets_per_user; ++t) {
      own_tweets[static_cast<std::size_t>(u)].push_back(tweets.size());
      tweets.push_back(new_tweet(u, camp(u)));
    }

  std::vector<char> linked(static_cast<std::size_t>(n), 0);
  // Unedited retweets carry the retweeted user's content.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool inner = camp(i) == camp(j);
      if (!s.chance(inner ? cfg.inner_retweet_rate : cfg.cross_retweet_rate)) continue;
      const bool forward = s.chance(0.5);
      const int author = forward ? i : j, target = forward ? j : i;
      Tweet t = new_tweet(author, camp(target));
      t.retweet_of = ids[static_cast<std::size_t>(target)];
      tweets.push_back(std::move(t));
      linked[static_cast<std::size_t>(i)] = linked[static_cast<std::size_t>(j)] = 1;
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool inner = camp(i) == camp(j);
      if (!s.chance(inner ? cfg.inner_mention_rate : cfg.cross_mention_rate)) continue;
      const bool forward = s.chance(0.5);
      const int author = forward ? i : j, target = forward ? j : i;
      if (s.chance(cfg.edited_retweet_share)) {
        Tweet t = new_tweet(author, camp(author));
        t.retweet_of = ids[static_cast<std::size_t>(target)];
        t.retweet_edited = true;
        tweets.push_back(std::move(t));
      } else {
        const auto& mine = own_tweets[static_cast<std::size_t>(author)];
        tweets[mine[s.index(mine.size())]].mentions.push_back(ids[static_cast<std::size_t>(target)]);
      }
      linked[static_cast<std::size_t>(i)] = linked[static_cast<std::size_t>(j)] = 1;
    }

  Corpus& c = out.corpus;
  c.users = ids;
  std::unordered_set<std::string> seen_w, seen_h, seen_d;
  for (const auto& t : tweets) {
    register_vocab(c.word_vocab, seen_w, t.tokens);
    register_vocab(c.hashtag_vocab, seen_h, t.hashtags);
    register_vocab(c.domain_vocab, seen_d, t.url_domains);
  }
  c.tweets = std::move(tweets);
  for (int i = 0; i < n; ++i)
    if (!linked[static_cast<std::size_t>(i)]) out.isolated.push_back(ids[static_cast<std::size_t>(i)]);
  return out;
}

double expected_inner_mention_fraction(const SynthConfig& cfg) {
  const double per = cfg.users_per_community, n = cfg.users();
  const double inner_pairs = cfg.k_true * per * (per - 1) / 2;
  const double cross_pairs = n * (n - 1) / 2 - inner_pairs;
  const double inner = inner_pairs * cfg.inner_mention_rate, cross = cross_pairs * cfg.cross_mention_rate;
  return inner + cross > 0 ? inner / (inner + cross) : 0.0;
}

void write_labels_csv(std::ostream& out, const std::vector<UserId>& users, const std::vector<int>& labels) {
  out << "user,label\n";
  for (std::size_t i = 0; i < users.size(); ++i) out << users[i] << ',' << labels.at(i) << '\n';
}

}  // namespace polnmf
