#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "polnmf/corpus.hpp"

namespace polnmf {

// Planted-partition corpus generator. Interaction rates are per unordered
// user pair: each pair independently gets an unedited retweet with the
// inner/cross retweet rate and a mention-type edge with the inner/cross
// mention rate.
struct SynthConfig {
  int k_true = 4;
  int users_per_community = 50;
  int vocab_per_community = 100;
  int shared_vocab = 100;
  int tweets_per_user = 20;
  int tokens_per_tweet = 8;
  double inner_retweet_rate = 0.05;
  double cross_retweet_rate = 0.002;
  double inner_mention_rate = 0.06;
  double cross_mention_rate = 0.02;
  // Share of mention-type edges realised as edited retweets.
  double edited_retweet_share = 0.3;
  // Probability that a token (hashtag, domain) comes from outside the author's
  // own pool: shared words or another camp's vocabulary.
  double word_noise = 0.2;
  int hashtags_per_community = 20;
  int domains_per_community = 10;
  double hashtag_rate = 0.5;  // chance a tweet carries a hashtag
  double domain_rate = 0.3;   // chance a tweet carries a URL domain
  std::uint64_t seed = 1;

  void validate() const;
  int users() const { return k_true * users_per_community; }
};

struct SynthCorpus {
  Corpus corpus;
  std::vector<int> labels;          // planted community per corpus.users entry
  std::vector<UserId> isolated;     // users without any retweet or mention edge
};

SynthCorpus generate(const SynthConfig& cfg);

// Fraction of mention-type edges expected to fall inside camps.
double expected_inner_mention_fraction(const SynthConfig& cfg);

// "user,label" with a header line.
void write_labels_csv(std::ostream& out, const std::vector<UserId>& users, const std::vector<int>& labels);

}  // namespace polnmf
