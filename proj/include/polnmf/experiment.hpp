#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "polnmf/corpus.hpp"
#include "polnmf/eval.hpp"
#include "polnmf/factorize.hpp"
#include "polnmf/graph.hpp"
#include "polnmf/similarity.hpp"

namespace polnmf {

inline constexpr int kResultsSchemaVersion = 1;

struct ParameterGrid {
  std::vector<double> alpha{1, 10, 100, 1000};
  std::vector<double> beta{1, 10, 100, 1000};
  std::vector<double> gamma{1, 10, 100, 1000};
  std::vector<double> theta{1, 10, 100, 1000};
};

enum class Pick { max, median, all };

std::string to_string(Pick p);
Pick parse_pick(const std::string& name);

struct ExperimentSpec {
  std::filesystem::path corpus_path;
  CorpusFormat format = CorpusFormat::jsonl;
  std::optional<std::filesystem::path> labels_path;
  Method method = Method::dual;
  GraphVariant graph_variant = GraphVariant::RdMw;
  ParameterGrid grid;
  int restarts = 20;
  Pick pick = Pick::max;
  int k = 0;  // 0: number of label classes
  std::uint64_t seed = 0;
  int threads = 1;
  PreprocessConfig preprocess;
  FeatureOptions features;
  bool binarize_cooccurrence = false;
  // k, weights and seed are overwritten per run; the rest is used as given.
  SolverConfig solver;

  void validate() const;
};

// Keys mirror the CLI flags; present keys override the spec.
void apply_config(ExperimentSpec& spec, const nlohmann::json& config);

// user -> class label, "user,label" CSV with a header line.
std::vector<std::pair<UserId, std::string>> read_labels(const std::filesystem::path& path);
std::vector<std::pair<UserId, std::string>> read_labels(std::istream& in);

// Class index per user (in order of first appearance of the label). Throws
// listing every user without a label.
std::vector<int> align_labels(const std::vector<UserId>& users,
                              const std::vector<std::pair<UserId, std::string>>& labels);

// Everything the solvers need, built once per corpus.
struct PipelineData {
  Corpus corpus;
  std::vector<int> truth;  // empty when unlabeled
  FeatureMatrices features;
  UserGraph retweets;
  UserGraph mentions;
  UserGraph connectivity;
  SimilarityMatrix word_sim;
  SimilarityMatrix hashtag_sim;
  SimilarityMatrix domain_sim;
};

// `corpus` must already be preprocessed. Similarities that `method` does not
// use are left empty.
PipelineData prepare_pipeline(Corpus corpus, std::vector<int> truth, Method method, GraphVariant variant,
                              const FeatureOptions& features = {}, bool binarize_cooccurrence = false);

NmfProblem make_problem(const PipelineData& data, Method method);

std::string algorithm_name(Method m);
std::string content_name(Method m);
std::string graph_name(GraphVariant v);

struct RunRecord {
  std::size_t cell = 0;
  int restart = 0;
  std::uint64_t seed = 0;
  double alpha = 0, beta = 0, gamma = 0, theta = 0;
  std::optional<EvalReport> report;
  int iterations = 0;
  bool converged = false;
  std::string status = "ok";
};

struct CellMaxima {
  std::size_t cell = 0;
  double alpha = 0, beta = 0, gamma = 0, theta = 0;
  std::optional<double> purity, ari, nmi;
};

struct ExperimentResult {
  Method method = Method::dual;
  GraphVariant graph_variant = GraphVariant::RdMw;
  std::vector<RunRecord> runs;     // every solver run, sorted by (cell, restart)
  std::vector<RunRecord> rows;     // what the pick policy keeps
  std::vector<CellMaxima> maxima;  // independent per-metric maxima per cell
  nlohmann::json manifest;
};

// Seed of one run, independent of scheduling.
std::uint64_t derive_seed(std::uint64_t base, std::size_t cell, int restart);

// Grid cells for the parameters `method` uses; unused weights are 0.
std::vector<SolverConfig> grid_cells(const ExperimentSpec& spec, int k);

ExperimentResult run_experiment(const ExperimentSpec& spec, const PipelineData& data);

// Loads, preprocesses and labels the corpus, then runs the experiment.
ExperimentResult run_pipeline(const ExperimentSpec& spec);

std::string results_csv_header();
std::string results_csv(const ExperimentResult& r);
std::string maxima_csv(const ExperimentResult& r);

// results.csv, per_metric_max.csv and manifest.json under `dir`.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& r);

struct Table4Row {
  std::string graph;  // R, R+M, R+dM
  std::string links;  // inner, inter
  double value = 0;
  double percent = 0;
};

// Inner/inter link totals for R, R+M and R+dM.
std::vector<Table4Row> run_table4(const PipelineData& data, EdgeMeasure measure = EdgeMeasure::weight);
std::string table4_csv(const std::vector<Table4Row>& rows);

}  // namespace polnmf
