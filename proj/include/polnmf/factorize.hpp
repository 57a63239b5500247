#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "polnmf/corpus.hpp"
#include "polnmf/graph.hpp"
#include "polnmf/partition.hpp"
#include "polnmf/similarity.hpp"

namespace polnmf {

struct SolverConfig {
  int k = 2;
  double alpha = 0;  // user connectivity
  double beta = 0;   // word similarity
  double gamma = 0;  // hashtag similarity
  double theta = 0;  // domain similarity
  int max_iters = 500;
  double rel_tol = 1e-6;
  double epsilon_guard = 1e-12;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Method { dual, tri_hashtag, tri_domain, multi };

std::string to_string(Method m);
Method parse_method(const std::string& name);

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A graph or similarity matrix together with its Laplacian split.
struct Regularizer {
  SparseMatrix adjacency;
  LaplacianSplit split;

  explicit Regularizer(SparseMatrix adjacency);
};

// One reconstruction term ||X - U F^T||^2 plus the trace penalty on F.
struct ContentBlock {
  FeatureMatrix X;
  Eigen::SparseMatrix<double, Eigen::RowMajor> X_rows;
  Regularizer similarity;

  ContentBlock(FeatureMatrix X, SparseMatrix similarity);
  Eigen::Index features() const { return X.cols(); }
};

// The MultiNMF objective with every block present. TriNMF and DualNMF are
// the same problem with the missing blocks given zero width.
class NmfProblem {
 public:
  NmfProblem(FeatureMatrix words, FeatureMatrix hashtags, FeatureMatrix domains, SparseMatrix user_graph,
             SparseMatrix word_sim, SparseMatrix hashtag_sim, SparseMatrix domain_sim);

  static NmfProblem multi(const FeatureMatrix& X_uw, const FeatureMatrix& X_uh, const FeatureMatrix& X_ud,
                          const UserGraph& C, const SimilarityMatrix& H_sim, const SimilarityMatrix& D_sim,
                          const SimilarityMatrix& W_sim);
  // `feature` picks which slot X_uf occupies; the other slot is empty.
  static NmfProblem tri(const FeatureMatrix& X_uw, const FeatureMatrix& X_uf, Method feature, const UserGraph& C,
                        const SimilarityMatrix& F_sim, const SimilarityMatrix& W_sim);
  static NmfProblem dual(const FeatureMatrix& X_uw, const UserGraph& C, const SimilarityMatrix& W_sim);

  Eigen::Index users() const { return users_.adjacency.rows(); }
  const Regularizer& user_graph() const { return users_; }
  const ContentBlock& words() const { return words_; }
  const ContentBlock& hashtags() const { return hashtags_; }
  const ContentBlock& domains() const { return domains_; }

 private:
  Regularizer users_;
  ContentBlock words_;
  ContentBlock hashtags_;
  ContentBlock domains_;
};

struct FactorSet {
  Eigen::MatrixXd U;  // users x k
  Eigen::MatrixXd H;  // hashtags x k
  Eigen::MatrixXd D;  // domains x k
  Eigen::MatrixXd W;  // words x k
  std::vector<double> objective_trace;  // [0] is the initial objective, then one per sweep
  int iterations = 0;
  bool converged = false;
};

// Entries uniform on (0, 1], drawn for U, W, H, D in that order, row-major.
FactorSet initial_factors(const NmfProblem& problem, const SolverConfig& cfg);

// One sweep of the multiplicative updates: U, then H, D, W. Throws
// SolverError naming the factor when a non-finite value appears.
void update_sweep(const NmfProblem& problem, const SolverConfig& cfg, FactorSet& f, int iteration = 0);

FactorSet solve(const NmfProblem& problem, const SolverConfig& cfg);
FactorSet solve(const NmfProblem& problem, const SolverConfig& cfg, FactorSet start);

FactorSet multi_nmf(const FeatureMatrix& X_uw, const FeatureMatrix& X_uh, const FeatureMatrix& X_ud,
                    const UserGraph& C, const SimilarityMatrix& H_sim, const SimilarityMatrix& D_sim,
                    const SimilarityMatrix& W_sim, const SolverConfig& cfg);
FactorSet tri_nmf(const FeatureMatrix& X_uw, const FeatureMatrix& X_uf, Method feature, const UserGraph& C,
                  const SimilarityMatrix& F_sim, const SimilarityMatrix& W_sim, const SolverConfig& cfg);
FactorSet dual_nmf(const FeatureMatrix& X_uw, const UserGraph& C, const SimilarityMatrix& W_sim,
                   const SolverConfig& cfg);

struct ObjectiveTerms {
  double words = 0;     // ||X_uw - U W^T||^2
  double hashtags = 0;  // ||X_uh - U H^T||^2
  double domains = 0;   // ||X_ud - U D^T||^2
  double users = 0;     // alpha Tr(U^T L_C U)
  double hashtag_sim = 0;
  double domain_sim = 0;
  double word_sim = 0;

  double total() const { return words + hashtags + domains + users + hashtag_sim + domain_sim + word_sim; }
};

ObjectiveTerms objective_terms(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg);
double objective(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg);

struct Gradients {
  Eigen::MatrixXd U, H, D, W;
};

// Partial derivatives of the objective with respect to each factor.
Gradients gradients(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg);

// max |F .* dJ/dF| over every factor entry: the complementarity products left
// once the stationarity equations eliminate the nonnegativity multipliers.
double kkt_residual(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg);

// max F .* (|positive gradient part| + |negative gradient part|), the natural
// size of the products kkt_residual inspects.
double kkt_scale(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg);

// Row-wise argmax, ties to the lowest column. All-zero rows go to column 0
// and are counted in Partition::zero_rows.
Partition assign(const Eigen::MatrixXd& U);

// Factor directory: U.txt/H.txt/D.txt/W.txt, objective_trace.csv, manifest.json.
void write_factor_set(const std::filesystem::path& dir, const FactorSet& f, const nlohmann::json& manifest);
Eigen::MatrixXd read_dense_matrix(const std::filesystem::path& file);

}  // namespace polnmf
