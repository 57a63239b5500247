#include "polnmf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace polnmf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool uses_gamma(Method m) { return m == Method::tri_hashtag || m == Method::multi; }
bool uses_theta(Method m) { return m == Method::tri_domain || m == Method::multi; }

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

RunRecord execute_run(const NmfProblem& problem, const PipelineData& data, SolverConfig cfg, std::size_t cell,
                      int restart, std::uint64_t base_seed) {
  RunRecord r;
  r.cell = cell;
  r.restart = restart;
  r.seed = derive_seed(base_seed, cell, restart);
  r.alpha = cfg.alpha;
  r.beta = cfg.beta;
  r.gamma = cfg.gamma;
  r.theta = cfg.theta;
  cfg.seed = r.seed;
  try {
    const FactorSet f = solve(problem, cfg);
    r.iterations = f.iterations;
    r.converged = f.converged;
    const Partition p = assign(f.U);
    if (!data.truth.empty()) {
      r.report = evaluate(LabeledPartition(p, data.truth), &data.connectivity);
    } else {
      EvalReport e;
      e.k_found = communities_found(p.assignment);
      if (data.connectivity.weights.sum() > 0) e.modularity = modularity(data.connectivity, p);
      r.report = e;
    }
  } catch (const std::exception& e) {
    r.report.reset();
    r.status = std::string("failed: ") + e.what();
  }
  return r;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + '"';
}

std::vector<double> json_grid(const nlohmann::json& v) {
  if (v.is_array()) return v.get<std::vector<double>>();
  return {v.get<double>()};
}

}  // namespace

std::string to_string(Pick p) {
  switch (p) {
    case Pick::max: return "max";
    case Pick::median: return "median";
    case Pick::all: return "all";
  }
  return "?";
}

Pick parse_pick(const std::string& name) {
  for (auto p : {Pick::max, Pick::median, Pick::all})
    if (to_string(p) == name) return p;
  throw std::invalid_argument("unknown pick policy '" + name + "' (expected max, median or all)");
}

void ExperimentSpec::validate() const {
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (k != 0 && k < 2) throw std::invalid_argument("k must be >= 2");
  auto check = [](const std::vector<double>& g, const char* name) {
    if (g.empty()) throw std::invalid_argument(std::string("grid for ") + name + " is empty");
    for (double v : g)
      if (!(v > 0)) throw std::invalid_argument(std::string("grid values for ") + name + " must be > 0");
  };
  check(grid.alpha, "alpha");
  check(grid.beta, "beta");
  if (uses_gamma(method)) check(grid.gamma, "gamma");
  if (uses_theta(method)) check(grid.theta, "theta");
  preprocess.validate();
}

void apply_config(ExperimentSpec& spec, const nlohmann::json& c) {
  if (!c.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, v] : c.items()) {
    if (key == "corpus") spec.corpus_path = v.get<std::string>();
    else if (key == "format") spec.format = parse_corpus_format(v.get<std::string>());
    else if (key == "labels") spec.labels_path = v.get<std::string>();
    else if (key == "method") spec.method = parse_method(v.get<std::string>());
    else if (key == "graph") spec.graph_variant = parse_graph_variant(v.get<std::string>());
    else if (key == "alpha") spec.grid.alpha = json_grid(v);
    else if (key == "beta") spec.grid.beta = json_grid(v);
    else if (key == "gamma") spec.grid.gamma = json_grid(v);
    else if (key == "theta") spec.grid.theta = json_grid(v);
    else if (key == "restarts") spec.restarts = v.get<int>();
    else if (key == "pick") spec.pick = parse_pick(v.get<std::string>());
    else if (key == "k") spec.k = v.get<int>();
    else if (key == "seed") spec.seed = v.get<std::uint64_t>();
    else if (key == "threads") spec.threads = v.get<int>();
    else if (key == "max_iters") spec.solver.max_iters = v.get<int>();
    else if (key == "rel_tol") spec.solver.rel_tol = v.get<double>();
    else if (key == "epsilon_guard") spec.solver.epsilon_guard = v.get<double>();
    else if (key == "min_word_freq") spec.preprocess.min_word_freq = v.get<std::size_t>();
    else if (key == "min_hashtag_freq") spec.preprocess.min_hashtag_freq = v.get<std::size_t>();
    else if (key == "min_domain_freq") spec.preprocess.min_domain_freq = v.get<std::size_t>();
    else if (key == "max_tweets_per_user") spec.preprocess.max_tweets_per_user = v.get<std::size_t>();
    else if (key == "stopwords") spec.preprocess.stopword_file = v.get<std::string>();
    else if (key == "min_timestamp") spec.preprocess.min_timestamp = v.get<std::int64_t>();
    else if (key == "exclude_retweet_text") spec.features.include_retweet_text = !v.get<bool>();
    else if (key == "binarize_cooccurrence") spec.binarize_cooccurrence = v.get<bool>();
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

std::vector<std::pair<UserId, std::string>> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open labels file " + path.string());
  return read_labels(in);
}

std::vector<std::pair<UserId, std::string>> read_labels(std::istream& in) {
  std::vector<std::pair<UserId, std::string>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(line_no, "labels line needs 'user,label'");
    std::string user = trim(line.substr(0, comma)), label = trim(line.substr(comma + 1));
    if (line_no == 1 && user == "user" && label == "label") continue;
    if (user.empty() || label.empty()) throw ParseError(line_no, "empty user or label");
    out.emplace_back(std::move(user), std::move(label));
  }
  return out;
}

std::vector<int> align_labels(const std::vector<UserId>& users,
                              const std::vector<std::pair<UserId, std::string>>& labels) {
  std::unordered_map<UserId, std::string> by_user;
  for (const auto& [u, l] : labels) by_user[u] = l;
  std::unordered_map<std::string, int> class_id;
  std::vector<int> truth;
  std::vector<UserId> missing;
  for (const auto& u : users) {
    auto it = by_user.find(u);
    if (it == by_user.end()) {
      missing.push_back(u);
      continue;
    }
    truth.push_back(class_id.try_emplace(it->second, static_cast<int>(class_id.size())).first->second);
  }
  if (!missing.empty()) {
    std::string msg = "no label for " + std::to_string(missing.size()) + " user(s):";
    for (const auto& u : missing) msg += " " + u;
    throw std::invalid_argument(msg);
  }
  return truth;
}

PipelineData prepare_pipeline(Corpus corpus, std::vector<int> truth, Method method, GraphVariant variant,
                              const FeatureOptions& features, bool binarize_cooccurrence) {
  if (!truth.empty() && truth.size() != corpus.users.size())
    throw std::invalid_argument("label count does not match user count");
  PipelineData d;
  d.features = build_feature_matrices(corpus, features);
  d.retweets = build_retweet_graph(corpus);
  d.mentions = build_mention_graph(corpus);
  d.connectivity = connectivity(d.retweets, d.mentions, variant);
  d.word_sim = cosine_similarity(d.features.words);
  if (uses_gamma(method))
    d.hashtag_sim = hashtag_cooccurrence(corpus, binarize_cooccurrence);
  else
    d.hashtag_sim = {SparseMatrix(0, 0), SimilarityKind::cooccurrence};
  if (uses_theta(method))
    d.domain_sim = cosine_similarity(d.features.domains);
  else
    d.domain_sim = {SparseMatrix(0, 0), SimilarityKind::cosine};
  d.corpus = std::move(corpus);
  d.truth = std::move(truth);
  return d;
}

NmfProblem make_problem(const PipelineData& d, Method method) {
  switch (method) {
    case Method::dual: return NmfProblem::dual(d.features.words, d.connectivity, d.word_sim);
    case Method::tri_hashtag:
      return NmfProblem::tri(d.features.words, d.features.hashtags, method, d.connectivity, d.hashtag_sim, d.word_sim);
    case Method::tri_domain:
      return NmfProblem::tri(d.features.words, d.features.domains, method, d.connectivity, d.domain_sim, d.word_sim);
    case Method::multi:
      return NmfProblem::multi(d.features.words, d.features.hashtags, d.features.domains, d.connectivity,
                               d.hashtag_sim, d.domain_sim, d.word_sim);
  }
  throw std::invalid_argument("bad method");
}

std::string algorithm_name(Method m) {
  switch (m) {
    case Method::dual: return "DualNMF";
    case Method::tri_hashtag:
    case Method::tri_domain: return "TriNMF";
    case Method::multi: return "MultiNMF";
  }
  return "?";
}

std::string content_name(Method m) {
  switch (m) {
    case Method::dual: return "words";
    case Method::tri_hashtag: return "words+hashtags";
    case Method::tri_domain: return "words+domains";
    case Method::multi: return "words+hashtags+domains";
  }
  return "?";
}

std::string graph_name(GraphVariant v) {
  switch (v) {
    case GraphVariant::RM: return "R+M";
    case GraphVariant::RdM: return "R+dM";
    case GraphVariant::RdMw: return "R+dMw";
  }
  return "?";
}

std::uint64_t derive_seed(std::uint64_t base, std::size_t cell, int restart) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ static_cast<std::uint64_t>(cell));
  return splitmix64(h ^ static_cast<std::uint64_t>(restart));
}

std::vector<SolverConfig> grid_cells(const ExperimentSpec& spec, int k) {
  const std::vector<double> zero{0.0};
  const auto& gammas = uses_gamma(spec.method) ? spec.grid.gamma : zero;
  const auto& thetas = uses_theta(spec.method) ? spec.grid.theta : zero;
  std::vector<SolverConfig> cells;
  for (double a : spec.grid.alpha)
    for (double b : spec.grid.beta)
      for (double g : gammas)
        for (double t : thetas) {
          SolverConfig c = spec.solver;
          c.k = k;
          c.alpha = a;
          c.beta = b;
          c.gamma = g;
          c.theta = t;
          cells.push_back(c);
        }
  return cells;
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const PipelineData& data) {
  spec.validate();
  int k = spec.k;
  if (k == 0) {
    if (data.truth.empty()) throw std::invalid_argument("k is required when no labels are given");
    k = communities_found(data.truth);
  }
  const auto cells = grid_cells(spec, k);
  const NmfProblem problem = make_problem(data, spec.method);

  ExperimentResult res;
  res.method = spec.method;
  res.graph_variant = spec.graph_variant;
  const std::size_t total = cells.size() * static_cast<std::size_t>(spec.restarts);
  res.runs.resize(total);
  auto work = [&](std::size_t i) {
    const std::size_t cell = i / static_cast<std::size_t>(spec.restarts);
    const int restart = static_cast<int>(i % static_cast<std::size_t>(spec.restarts));
    res.runs[i] = execute_run(problem, data, cells[cell], cell, restart, spec.seed);
  };
  if (spec.threads <= 1 || total <= 1) {
    for (std::size_t i = 0; i < total; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(spec.threads), total);
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) work(i);
      });
    for (auto& t : pool) t.join();
  }

  // Per cell: policy rows and independent maxima. runs are already in (cell, restart) order.
  for (std::size_t cell = 0; cell < cells.size(); ++cell) {
    const auto first = res.runs.begin() + static_cast<std::ptrdiff_t>(cell * static_cast<std::size_t>(spec.restarts));
    const std::vector<RunRecord> group(first, first + spec.restarts);
    std::vector<const RunRecord*> ok;
    for (const auto& r : group)
      if (r.report) ok.push_back(&r);

    CellMaxima m;
    m.cell = cell;
    m.alpha = cells[cell].alpha;
    m.beta = cells[cell].beta;
    m.gamma = cells[cell].gamma;
    m.theta = cells[cell].theta;
    if (!data.truth.empty())
      for (const auto* r : ok) {
        m.purity = std::max(m.purity.value_or(r->report->purity), r->report->purity);
        m.ari = std::max(m.ari.value_or(r->report->ari), r->report->ari);
        m.nmi = std::max(m.nmi.value_or(r->report->nmi), r->report->nmi);
      }
    res.maxima.push_back(m);

    if (spec.pick == Pick::all) {
      res.rows.insert(res.rows.end(), group.begin(), group.end());
      continue;
    }
    if (ok.empty()) {
      res.rows.push_back(group.front());
      continue;
    }
    // Rank by ARI when labels exist, else by modularity; ties keep the earlier restart.
    auto score = [&](const RunRecord* r) {
      if (!data.truth.empty()) return r->report->ari;
      return r->report->modularity.value_or(0.0);
    };
    std::stable_sort(ok.begin(), ok.end(), [&](const RunRecord* a, const RunRecord* b) { return score(a) > score(b); });
    const std::size_t pick = spec.pick == Pick::max ? 0 : (ok.size() - 1) / 2;
    res.rows.push_back(*ok[pick]);
  }

  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : res.runs)
    runs.push_back({{"cell", r.cell},
                    {"restart", r.restart},
                    {"seed", r.seed},
                    {"alpha", r.alpha},
                    {"beta", r.beta},
                    {"gamma", r.gamma},
                    {"theta", r.theta},
                    {"iterations", r.iterations},
                    {"converged", r.converged},
                    {"status", r.status}});
  res.manifest = {{"results_schema", kResultsSchemaVersion},
                  {"method", to_string(spec.method)},
                  {"graph", to_string(spec.graph_variant)},
                  {"k", k},
                  {"restarts", spec.restarts},
                  {"pick", to_string(spec.pick)},
                  {"base_seed", spec.seed},
                  {"max_iters", spec.solver.max_iters},
                  {"rel_tol", spec.solver.rel_tol},
                  {"epsilon_guard", spec.solver.epsilon_guard},
                  {"users", data.corpus.users.size()},
                  {"cells", cells.size()},
                  {"solver_runs", res.runs.size()},
                  {"runs", runs}};
  return res;
}

ExperimentResult run_pipeline(const ExperimentSpec& spec) {
  spec.validate();
  Corpus corpus = preprocess(parse_corpus(spec.corpus_path, spec.format), spec.preprocess);
  std::vector<int> truth;
  if (spec.labels_path) truth = align_labels(corpus.users, read_labels(*spec.labels_path));
  const PipelineData data = prepare_pipeline(std::move(corpus), std::move(truth), spec.method, spec.graph_variant,
                                             spec.features, spec.binarize_cooccurrence);
  return run_experiment(spec, data);
}

std::string results_csv_header() {
  return "algorithm,graph,content,alpha,beta,gamma,theta,restart,seed,purity,ari,nmi,modularity,k,iterations,"
         "converged,status";
}

std::string results_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << results_csv_header() << '\n';
  for (const auto& row : r.rows) {
    out << algorithm_name(r.method) << ',' << graph_name(r.graph_variant) << ',' << content_name(r.method) << ','
        << format_real(row.alpha) << ',' << format_real(row.beta) << ',' << format_real(row.gamma) << ','
        << format_real(row.theta) << ',' << row.restart << ',' << row.seed << ',';
    if (row.report) {
      out << format_real(row.report->purity) << ',' << format_real(row.report->ari) << ','
          << format_real(row.report->nmi) << ',' << opt_real(row.report->modularity) << ',' << row.report->k_found;
    } else {
      out << ",,,,";
    }
    out << ',' << row.iterations << ',' << (row.converged ? "true" : "false") << ',' << csv_escape(row.status)
        << '\n';
  }
  return out.str();
}

std::string maxima_csv(const ExperimentResult& r) {
  std::ostringstream out;
  out << "algorithm,graph,content,alpha,beta,gamma,theta,max_purity,max_ari,max_nmi\n";
  for (const auto& m : r.maxima)
    out << algorithm_name(r.method) << ',' << graph_name(r.graph_variant) << ',' << content_name(r.method) << ','
        << format_real(m.alpha) << ',' << format_real(m.beta) << ',' << format_real(m.gamma) << ','
        << format_real(m.theta) << ',' << opt_real(m.purity) << ',' << opt_real(m.ari) << ',' << opt_real(m.nmi)
        << '\n';
  return out.str();
}

void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "results.csv") << results_csv(r);
  std::ofstream(dir / "per_metric_max.csv") << maxima_csv(r);
  std::ofstream(dir / "manifest.json") << r.manifest.dump(2) << '\n';
}

std::vector<Table4Row> run_table4(const PipelineData& data, EdgeMeasure measure) {
  if (data.truth.empty()) throw std::invalid_argument("table4 needs ground-truth labels");
  const UserGraph none{SparseMatrix(data.retweets.size(), data.retweets.size()), GraphRole::M};
  const UserGraph delta = tsb_filter(data.retweets, data.mentions);
  std::vector<Table4Row> rows;
  auto add = [&](const std::string& name, const UserGraph& m) {
    const EndorsementStats s = endorsement_stats(data.retweets, m, data.truth, measure);
    const double total = s.inner + s.inter;
    rows.push_back({name, "inner", s.inner, total > 0 ? 100 * s.inner / total : 0.0});
    rows.push_back({name, "inter", s.inter, total > 0 ? 100 * s.inter / total : 0.0});
  };
  add("R", none);
  add("R+M", data.mentions);
  add("R+dM", delta);
  return rows;
}

std::string table4_csv(const std::vector<Table4Row>& rows) {
  std::ostringstream out;
  out << "graph,links,value,percent\n";
  for (const auto& r : rows) out << r.graph << ',' << r.links << ',' << format_real(r.value) << ',' << format_real(r.percent) << '\n';
  return out.str();
}

}  // namespace polnmf
