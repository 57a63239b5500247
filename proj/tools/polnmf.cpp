// polnmf: endorsement-filtered graphs and regularized NMF community detection.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "polnmf/corpus.hpp"
#include "polnmf/eval.hpp"
#include "polnmf/experiment.hpp"
#include "polnmf/factorize.hpp"
#include "polnmf/graph.hpp"
#include "polnmf/synth.hpp"

namespace fs = std::filesystem;
using namespace polnmf;

namespace {

// Flag values shared by the verbs; folded into an ExperimentSpec.
struct Options {
  std::string corpus;
  std::string format = "jsonl";
  std::string labels;
  std::string method = "dual";
  std::string graph = "RdMw";
  std::vector<double> alpha, beta, gamma, theta;
  int restarts = 20;
  std::string pick = "max";
  int k = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  int max_iters = 500;
  double rel_tol = 1e-6;
  double epsilon_guard = 1e-12;
  std::size_t min_word_freq = 20, min_hashtag_freq = 2, min_domain_freq = 2, max_tweets_per_user = 200;
  std::string stopwords;
  std::int64_t min_timestamp = 0;
  bool exclude_retweet_text = false;
  bool binarize_cooccurrence = false;
  std::string config;
  std::string out = ".";
};

void add_corpus_flags(CLI::App* app, Options& o) {
  app->add_option("--corpus", o.corpus, "Corpus file")->required();
  app->add_option("--format", o.format, "jsonl or csv")->capture_default_str();
  app->add_option("--min-word-freq", o.min_word_freq)->capture_default_str();
  app->add_option("--min-hashtag-freq", o.min_hashtag_freq)->capture_default_str();
  app->add_option("--min-domain-freq", o.min_domain_freq)->capture_default_str();
  app->add_option("--max-tweets-per-user", o.max_tweets_per_user)->capture_default_str();
  app->add_option("--stopwords", o.stopwords, "Stop-word file, one token per line");
  app->add_option("--min-timestamp", o.min_timestamp, "Drop tweets older than this (UTC seconds)");
  app->add_flag("--exclude-retweet-text", o.exclude_retweet_text, "Retweet content does not count for the retweeter");
  app->add_option("--config", o.config, "JSON config; its keys override flags");
  app->add_option("--out", o.out, "Output directory")->capture_default_str();
}

void add_solver_flags(CLI::App* app, Options& o, bool grid) {
  app->add_option("--method", o.method, "dual, tri_hashtag, tri_domain or multi")->capture_default_str();
  app->add_option("--graph", o.graph, "RM, RdM or RdMw")->capture_default_str();
  app->add_option("--labels", o.labels, "Ground truth, user,label CSV");
  app->add_option("--k", o.k, "Community count (default: number of label classes)");
  app->add_option("--seed", o.seed)->capture_default_str();
  app->add_option("--max-iters", o.max_iters)->capture_default_str();
  app->add_option("--rel-tol", o.rel_tol)->capture_default_str();
  app->add_option("--epsilon-guard", o.epsilon_guard)->capture_default_str();
  app->add_flag("--binarize-cooccurrence", o.binarize_cooccurrence);
  const char* what = grid ? "Grid values" : "Weight";
  app->add_option("--alpha", o.alpha, what)->expected(grid ? -1 : 1);
  app->add_option("--beta", o.beta, what)->expected(grid ? -1 : 1);
  app->add_option("--gamma", o.gamma, what)->expected(grid ? -1 : 1);
  app->add_option("--theta", o.theta, what)->expected(grid ? -1 : 1);
}

ExperimentSpec make_spec(const Options& o) {
  ExperimentSpec s;
  s.corpus_path = o.corpus;
  s.format = parse_corpus_format(o.format);
  if (!o.labels.empty()) s.labels_path = o.labels;
  s.method = parse_method(o.method);
  s.graph_variant = parse_graph_variant(o.graph);
  if (!o.alpha.empty()) s.grid.alpha = o.alpha;
  if (!o.beta.empty()) s.grid.beta = o.beta;
  if (!o.gamma.empty()) s.grid.gamma = o.gamma;
  if (!o.theta.empty()) s.grid.theta = o.theta;
  s.restarts = o.restarts;
  s.pick = parse_pick(o.pick);
  s.k = o.k;
  s.seed = o.seed;
  s.threads = o.threads;
  s.solver.max_iters = o.max_iters;
  s.solver.rel_tol = o.rel_tol;
  s.solver.epsilon_guard = o.epsilon_guard;
  s.preprocess.min_word_freq = o.min_word_freq;
  s.preprocess.min_hashtag_freq = o.min_hashtag_freq;
  s.preprocess.min_domain_freq = o.min_domain_freq;
  s.preprocess.max_tweets_per_user = o.max_tweets_per_user;
  if (!o.stopwords.empty()) s.preprocess.stopword_file = o.stopwords;
  if (o.min_timestamp != 0) s.preprocess.min_timestamp = o.min_timestamp;
  s.features.include_retweet_text = !o.exclude_retweet_text;
  s.binarize_cooccurrence = o.binarize_cooccurrence;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw std::runtime_error("cannot open config " + o.config);
    apply_config(s, nlohmann::json::parse(in));
  }
  return s;
}

Corpus load_clean(const ExperimentSpec& s) { return preprocess(parse_corpus(s.corpus_path, s.format), s.preprocess); }

std::vector<int> load_truth(const ExperimentSpec& s, const Corpus& c) {
  if (!s.labels_path) return {};
  return align_labels(c.users, read_labels(*s.labels_path));
}

int cmd_ingest(const Options& o) {
  const auto spec = make_spec(o);
  const Corpus raw = parse_corpus(spec.corpus_path, spec.format);
  const Corpus clean = preprocess(raw, spec.preprocess);
  fs::create_directories(o.out);
  std::ofstream out(fs::path(o.out) / "corpus.jsonl");
  write_jsonl(clean, out);
  nlohmann::json stats{{"raw", {{"users", raw.users.size()}, {"tweets", raw.tweets.size()}, {"words", raw.word_vocab.size()},
                                {"hashtags", raw.hashtag_vocab.size()}, {"domains", raw.domain_vocab.size()}}},
                       {"clean", {{"users", clean.users.size()}, {"tweets", clean.tweets.size()},
                                  {"words", clean.word_vocab.size()}, {"hashtags", clean.hashtag_vocab.size()},
                                  {"domains", clean.domain_vocab.size()}}}};
  std::ofstream(fs::path(o.out) / "stats.json") << stats.dump(2) << '\n';
  std::cout << stats.dump(2) << '\n';
  return 0;
}

int cmd_graphs(const Options& o) {
  const auto spec = make_spec(o);
  const Corpus c = load_clean(spec);
  const UserGraph R = build_retweet_graph(c), M = build_mention_graph(c);
  fs::create_directories(o.out);
  auto emit = [&](const UserGraph& g, const char* file) {
    std::ofstream out(fs::path(o.out) / file);
    write_edge_list(out, g.weights, graph_header(g, c.users));
  };
  emit(R, "R.edges");
  emit(M, "M.edges");
  emit(tsb_filter(R, M), "dM.edges");
  emit(tsb_filter_weighted(R, M), "dMw.edges");
  emit(connectivity(R, M, spec.graph_variant), "C.edges");
  std::cout << "users=" << c.users.size() << " R_edges=" << R.weights.nonZeros() / 2
            << " M_edges=" << M.weights.nonZeros() / 2 << '\n';
  return 0;
}

int cmd_solve(const Options& o) {
  const auto spec = make_spec(o);
  Corpus c = load_clean(spec);
  auto truth = load_truth(spec, c);
  const auto users = c.users;
  const PipelineData data = prepare_pipeline(std::move(c), truth, spec.method, spec.graph_variant, spec.features,
                                             spec.binarize_cooccurrence);
  SolverConfig cfg = spec.solver;
  cfg.k = spec.k ? spec.k : (truth.empty() ? 0 : communities_found(truth));
  if (cfg.k == 0) throw std::invalid_argument("--k is required without --labels");
  cfg.alpha = spec.grid.alpha.front();
  cfg.beta = spec.grid.beta.front();
  cfg.gamma = spec.method == Method::tri_hashtag || spec.method == Method::multi ? spec.grid.gamma.front() : 0.0;
  cfg.theta = spec.method == Method::tri_domain || spec.method == Method::multi ? spec.grid.theta.front() : 0.0;
  cfg.seed = spec.seed;
  const FactorSet f = solve(make_problem(data, spec.method), cfg);
  const Partition p = assign(f.U);

  const fs::path dir = o.out;
  write_factor_set(dir, f,
                   {{"method", to_string(spec.method)}, {"graph", to_string(spec.graph_variant)}, {"k", cfg.k},
                    {"alpha", cfg.alpha}, {"beta", cfg.beta}, {"gamma", cfg.gamma}, {"theta", cfg.theta},
                    {"seed", cfg.seed}, {"max_iters", cfg.max_iters}, {"rel_tol", cfg.rel_tol},
                    {"epsilon_guard", cfg.epsilon_guard}, {"zero_rows", p.zero_rows}});
  {
    std::ofstream out(dir / "partition.csv");
    out << "user,community\n";
    for (std::size_t i = 0; i < users.size(); ++i) out << users[i] << ',' << p.assignment[i] << '\n';
  }
  if (p.zero_rows) std::cerr << "warning: " << p.zero_rows << " user(s) had an all-zero row in U\n";
  std::cout << "iterations=" << f.iterations << " converged=" << (f.converged ? "true" : "false")
            << " objective=" << f.objective_trace.back() << '\n';
  if (!truth.empty()) {
    const EvalReport r = evaluate(LabeledPartition(p, truth), &data.connectivity);
    std::ofstream(dir / "eval.json") << to_json(r).dump(2) << '\n';
    std::cout << eval_csv_header() << '\n'
              << eval_csv_row(r, algorithm_name(spec.method), graph_name(spec.graph_variant), content_name(spec.method))
              << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& partition_file, const std::string& labels_file, const std::string& graph_file,
             const std::string& out_dir) {
  std::ifstream in(partition_file);
  if (!in) throw std::runtime_error("cannot open " + partition_file);
  std::vector<UserId> users;
  std::vector<int> predicted;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    users.push_back(line.substr(0, comma));
    predicted.push_back(std::stoi(line.substr(comma + 1)));
  }
  const auto truth = align_labels(users, read_labels(labels_file));
  std::optional<UserGraph> graph;
  if (!graph_file.empty()) {
    std::ifstream g(graph_file);
    if (!g) throw std::runtime_error("cannot open " + graph_file);
    auto el = read_edge_list(g);
    graph = UserGraph{std::move(el.matrix), GraphRole::Combined};
  }
  const EvalReport r = evaluate(LabeledPartition(predicted, truth), graph ? &*graph : nullptr);
  std::cout << to_json(r).dump(2) << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "eval.json") << to_json(r).dump(2) << '\n';
  }
  return 0;
}

int cmd_experiment(const Options& o) {
  const auto spec = make_spec(o);
  const ExperimentResult r = run_pipeline(spec);
  write_experiment(o.out, r);
  std::size_t failed = 0;
  for (const auto& run : r.runs) failed += run.report ? 0 : 1;
  std::cout << "cells=" << r.maxima.size() << " runs=" << r.runs.size() << " failed=" << failed << '\n'
            << results_csv(r);
  return 0;
}

int cmd_table4(const Options& o, bool count_edges) {
  const auto spec = make_spec(o);
  if (!spec.labels_path) throw std::invalid_argument("table4 needs --labels");
  Corpus c = load_clean(spec);
  auto truth = load_truth(spec, c);
  const PipelineData data = prepare_pipeline(std::move(c), std::move(truth), Method::dual, spec.graph_variant);
  const std::string csv = table4_csv(run_table4(data, count_edges ? EdgeMeasure::count : EdgeMeasure::weight));
  fs::create_directories(o.out);
  std::ofstream(fs::path(o.out) / "table4.csv") << csv;
  std::cout << csv;
  return 0;
}

int cmd_synth(SynthConfig cfg, const std::string& out_dir) {
  const SynthCorpus s = generate(cfg);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "corpus.jsonl");
    write_jsonl(s.corpus, out);
  }
  {
    std::ofstream out(fs::path(out_dir) / "labels.csv");
    write_labels_csv(out, s.corpus.users, s.labels);
  }
  if (!s.isolated.empty())
    std::cerr << "warning: " << s.isolated.size() << " user(s) have no retweet or mention edge\n";
  std::cout << "users=" << s.corpus.users.size() << " tweets=" << s.corpus.tweets.size()
            << " words=" << s.corpus.word_vocab.size() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Community detection with endorsement-filtered graphs and regularized NMF"};
  app.require_subcommand(1);

  Options ingest_o, graphs_o, solve_o, exp_o, table4_o;

  auto* ingest = app.add_subcommand("ingest", "Parse and preprocess a corpus");
  add_corpus_flags(ingest, ingest_o);

  auto* graphs = app.add_subcommand("graphs", "Write R, M, dM, dMw and the combined graph as edge lists");
  add_corpus_flags(graphs, graphs_o);
  graphs->add_option("--graph", graphs_o.graph, "Variant written to C.edges")->capture_default_str();

  auto* solve_cmd = app.add_subcommand("solve", "Run one solver and write factors and the partition");
  add_corpus_flags(solve_cmd, solve_o);
  add_solver_flags(solve_cmd, solve_o, false);

  std::string partition_file, labels_file, graph_file, eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Score a partition against labels");
  eval_cmd->add_option("--partition", partition_file, "user,community CSV")->required();
  eval_cmd->add_option("--labels", labels_file, "user,label CSV")->required();
  eval_cmd->add_option("--graph-file", graph_file, "Edge list for modularity");
  eval_cmd->add_option("--out", eval_out, "Output directory");

  auto* exp = app.add_subcommand("experiment", "Grid x restarts protocol with result tables");
  add_corpus_flags(exp, exp_o);
  add_solver_flags(exp, exp_o, true);
  exp->add_option("--restarts", exp_o.restarts)->capture_default_str();
  exp->add_option("--pick", exp_o.pick, "max, median or all")->capture_default_str();
  exp->add_option("--threads", exp_o.threads)->capture_default_str();

  bool count_edges = false;
  auto* table4 = app.add_subcommand("table4", "Inner/inter link statistics for R, R+M, R+dM");
  add_corpus_flags(table4, table4_o);
  table4->add_option("--labels", table4_o.labels, "user,label CSV")->required();
  table4->add_flag("--count-edges", count_edges, "Count edges instead of summing weights");

  SynthConfig sc;
  std::string synth_out = ".";
  auto* synth = app.add_subcommand("synth", "Generate a planted-partition corpus and labels");
  synth->add_option("--k", sc.k_true)->capture_default_str();
  synth->add_option("--users-per-community", sc.users_per_community)->capture_default_str();
  synth->add_option("--vocab-per-community", sc.vocab_per_community)->capture_default_str();
  synth->add_option("--shared-vocab", sc.shared_vocab)->capture_default_str();
  synth->add_option("--tweets-per-user", sc.tweets_per_user)->capture_default_str();
  synth->add_option("--tokens-per-tweet", sc.tokens_per_tweet)->capture_default_str();
  synth->add_option("--inner-retweet-rate", sc.inner_retweet_rate)->capture_default_str();
  synth->add_option("--cross-retweet-rate", sc.cross_retweet_rate)->capture_default_str();
  synth->add_option("--inner-mention-rate", sc.inner_mention_rate)->capture_default_str();
  synth->add_option("--cross-mention-rate", sc.cross_mention_rate)->capture_default_str();
  synth->add_option("--edited-retweet-share", sc.edited_retweet_share)->capture_default_str();
  synth->add_option("--word-noise", sc.word_noise)->capture_default_str();
  synth->add_option("--seed", sc.seed)->capture_default_str();
  synth->add_option("--out", synth_out)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest_o);
    if (*graphs) return cmd_graphs(graphs_o);
    if (*solve_cmd) return cmd_solve(solve_o);
    if (*eval_cmd) return cmd_eval(partition_file, labels_file, graph_file, eval_out);
    if (*exp) return cmd_experiment(exp_o);
    if (*table4) return cmd_table4(table4_o, count_edges);
    if (*synth) return cmd_synth(sc, synth_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
