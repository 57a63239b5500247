#include "polnmf/factorize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace polnmf {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

void check_nonnegative(const SparseMatrix& m, const char* what) {
  for (Index j = 0; j < m.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(m, j); it; ++it)
      if (!(it.value() >= 0)) throw std::invalid_argument(std::string(what) + " has a negative or NaN entry");
}

void check_symmetric(const SparseMatrix& m, const char* what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(std::string(what) + " is not square");
  SparseMatrix t = m.transpose();
  if ((m - t).norm() != 0) throw std::invalid_argument(std::string(what) + " is not symmetric");
}

// Uniform on (0, 1] from the top 53 bits.
double unit_open_closed(std::mt19937_64& rng) {
  return 1.0 - static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

MatrixXd random_factor(std::mt19937_64& rng, Index rows, Index k) {
  MatrixXd m(rows, k);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < k; ++j) m(i, j) = unit_open_closed(rng);
  return m;
}

// ||X - U F^T||_F^2 accumulated one user row at a time.
double residual_squared(const ContentBlock& b, const MatrixXd& U, const MatrixXd& F) {
  if (b.features() == 0) return 0.0;
  Eigen::VectorXd row(b.features());
  double s = 0;
  for (Index i = 0; i < U.rows(); ++i) {
    row.noalias() = F * U.row(i).transpose();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(b.X_rows, i); it; ++it)
      row(it.col()) -= it.value();
    s += row.squaredNorm();
  }
  return s;
}

// Tr(F^T (D - S) F) = 1/2 sum_ij S_ij ||f_i - f_j||^2, which stays nonnegative
// under rounding.
double laplacian_trace(const Regularizer& r, const MatrixXd& F) {
  double s = 0;
  for (Index j = 0; j < r.adjacency.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(r.adjacency, j); it; ++it)
      s += it.value() * (F.row(it.row()) - F.row(j)).squaredNorm();
  return 0.5 * s;
}

void require_finite(const MatrixXd& m, const char* factor, int iteration) {
  if (!m.allFinite())
    throw SolverError("non-finite value in factor " + std::string(factor) + " at iteration " +
                      std::to_string(iteration));
}

void multiplicative_step(MatrixXd& F, const MatrixXd& num, const MatrixXd& den, double eps) {
  F.array() *= (num.array() / (den.array() + eps)).sqrt();
}

// Numerator and denominator of a feature factor update:
// F <- F .* sqrt((X^T U + w L^- F) / (F U^T U + w L^+ F)).
struct Parts {
  MatrixXd num, den;
};

Parts feature_parts(const ContentBlock& b, const MatrixXd& U, const MatrixXd& UtU, const MatrixXd& F, double weight) {
  Parts p;
  p.num.noalias() = b.X_rows.transpose() * U;
  p.den.noalias() = F * UtU;
  if (weight != 0) {
    p.num.noalias() += weight * (b.similarity.split.minus * F);
    p.den.noalias() += weight * (b.similarity.split.plus * F);
  }
  return p;
}

Parts user_parts(const NmfProblem& pr, const FactorSet& f, double alpha) {
  Parts p;
  p.num.noalias() = pr.words().X * f.W;
  p.den.noalias() = f.U * (f.W.transpose() * f.W);
  if (pr.hashtags().features() > 0) {
    p.num.noalias() += pr.hashtags().X * f.H;
    p.den.noalias() += f.U * (f.H.transpose() * f.H);
  }
  if (pr.domains().features() > 0) {
    p.num.noalias() += pr.domains().X * f.D;
    p.den.noalias() += f.U * (f.D.transpose() * f.D);
  }
  if (alpha != 0) {
    p.num.noalias() += alpha * (pr.user_graph().split.minus * f.U);
    p.den.noalias() += alpha * (pr.user_graph().split.plus * f.U);
  }
  return p;
}

// Parts of every factor evaluated at the same point (no sweep ordering).
struct AllParts {
  Parts U, H, D, W;
};

AllParts all_parts(const NmfProblem& pr, const FactorSet& f, const SolverConfig& cfg) {
  const MatrixXd UtU = f.U.transpose() * f.U;
  return {user_parts(pr, f, cfg.alpha), feature_parts(pr.hashtags(), f.U, UtU, f.H, cfg.gamma),
          feature_parts(pr.domains(), f.U, UtU, f.D, cfg.theta), feature_parts(pr.words(), f.U, UtU, f.W, cfg.beta)};
}

void check_shapes(const NmfProblem& pr, const FactorSet& f) {
  auto bad = [&](const MatrixXd& m, Index rows, const char* name) {
    if (m.rows() != rows || m.cols() != f.U.cols())
      throw std::invalid_argument(std::string("factor ") + name + " has the wrong shape");
  };
  bad(f.U, pr.users(), "U");
  bad(f.H, pr.hashtags().features(), "H");
  bad(f.D, pr.domains().features(), "D");
  bad(f.W, pr.words().features(), "W");
}

FeatureMatrix empty_features(Index users) { return FeatureMatrix(users, 0); }

void write_matrix(const std::filesystem::path& file, const MatrixXd& m) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
    out << '\n';
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (!(alpha >= 0 && beta >= 0 && gamma >= 0 && theta >= 0))
    throw std::invalid_argument("regularizer weights must be >= 0");
  if (!(rel_tol > 0)) throw std::invalid_argument("rel_tol must be > 0");
  if (!(epsilon_guard >= 0)) throw std::invalid_argument("epsilon_guard must be >= 0");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::dual: return "dual";
    case Method::tri_hashtag: return "tri_hashtag";
    case Method::tri_domain: return "tri_domain";
    case Method::multi: return "multi";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (auto m : {Method::dual, Method::tri_hashtag, Method::tri_domain, Method::multi})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name + "' (expected dual, tri_hashtag, tri_domain or multi)");
}

Regularizer::Regularizer(SparseMatrix a) : adjacency(std::move(a)) {
  check_symmetric(adjacency, "regularizer matrix");
  check_nonnegative(adjacency, "regularizer matrix");
  adjacency.makeCompressed();
  split = laplacian_split(adjacency);
}

ContentBlock::ContentBlock(FeatureMatrix x, SparseMatrix sim) : X(std::move(x)), X_rows(X), similarity(std::move(sim)) {
  check_nonnegative(X, "feature matrix");
  if (similarity.adjacency.rows() != X.cols())
    throw std::invalid_argument("similarity matrix size " + std::to_string(similarity.adjacency.rows()) +
                                " does not match feature count " + std::to_string(X.cols()));
}

NmfProblem::NmfProblem(FeatureMatrix words, FeatureMatrix hashtags, FeatureMatrix domains, SparseMatrix user_graph,
                       SparseMatrix word_sim, SparseMatrix hashtag_sim, SparseMatrix domain_sim)
    : users_(std::move(user_graph)),
      words_(std::move(words), std::move(word_sim)),
      hashtags_(std::move(hashtags), std::move(hashtag_sim)),
      domains_(std::move(domains), std::move(domain_sim)) {
  const Index u = users_.adjacency.rows();
  for (const ContentBlock* b : {&words_, &hashtags_, &domains_})
    if (b->X.rows() != u)
      throw std::invalid_argument("feature matrix has " + std::to_string(b->X.rows()) + " rows but the user graph has " +
                                  std::to_string(u) + " users");
}

NmfProblem NmfProblem::multi(const FeatureMatrix& X_uw, const FeatureMatrix& X_uh, const FeatureMatrix& X_ud,
                             const UserGraph& C, const SimilarityMatrix& H_sim, const SimilarityMatrix& D_sim,
                             const SimilarityMatrix& W_sim) {
  return NmfProblem(X_uw, X_uh, X_ud, C.weights, W_sim.values, H_sim.values, D_sim.values);
}

NmfProblem NmfProblem::tri(const FeatureMatrix& X_uw, const FeatureMatrix& X_uf, Method feature, const UserGraph& C,
                           const SimilarityMatrix& F_sim, const SimilarityMatrix& W_sim) {
  const Index u = X_uw.rows();
  if (feature == Method::tri_hashtag)
    return NmfProblem(X_uw, X_uf, empty_features(u), C.weights, W_sim.values, F_sim.values, SparseMatrix(0, 0));
  if (feature == Method::tri_domain)
    return NmfProblem(X_uw, empty_features(u), X_uf, C.weights, W_sim.values, SparseMatrix(0, 0), F_sim.values);
  throw std::invalid_argument("tri problem needs tri_hashtag or tri_domain");
}

NmfProblem NmfProblem::dual(const FeatureMatrix& X_uw, const UserGraph& C, const SimilarityMatrix& W_sim) {
  const Index u = X_uw.rows();
  return NmfProblem(X_uw, empty_features(u), empty_features(u), C.weights, W_sim.values, SparseMatrix(0, 0),
                    SparseMatrix(0, 0));
}

FactorSet initial_factors(const NmfProblem& problem, const SolverConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  FactorSet f;
  f.U = random_factor(rng, problem.users(), cfg.k);
  f.W = random_factor(rng, problem.words().features(), cfg.k);
  f.H = random_factor(rng, problem.hashtags().features(), cfg.k);
  f.D = random_factor(rng, problem.domains().features(), cfg.k);
  return f;
}

void update_sweep(const NmfProblem& pr, const SolverConfig& cfg, FactorSet& f, int iteration) {
  {
    Parts p = user_parts(pr, f, cfg.alpha);
    multiplicative_step(f.U, p.num, p.den, cfg.epsilon_guard);
    require_finite(f.U, "U", iteration);
  }
  const MatrixXd UtU = f.U.transpose() * f.U;
  if (pr.hashtags().features() > 0) {
    Parts p = feature_parts(pr.hashtags(), f.U, UtU, f.H, cfg.gamma);
    multiplicative_step(f.H, p.num, p.den, cfg.epsilon_guard);
    require_finite(f.H, "H", iteration);
  }
  if (pr.domains().features() > 0) {
    Parts p = feature_parts(pr.domains(), f.U, UtU, f.D, cfg.theta);
    multiplicative_step(f.D, p.num, p.den, cfg.epsilon_guard);
    require_finite(f.D, "D", iteration);
  }
  if (pr.words().features() > 0) {
    Parts p = feature_parts(pr.words(), f.U, UtU, f.W, cfg.beta);
    multiplicative_step(f.W, p.num, p.den, cfg.epsilon_guard);
    require_finite(f.W, "W", iteration);
  }
}

FactorSet solve(const NmfProblem& problem, const SolverConfig& cfg) {
  cfg.validate();
  return solve(problem, cfg, initial_factors(problem, cfg));
}

FactorSet solve(const NmfProblem& problem, const SolverConfig& cfg, FactorSet f) {
  cfg.validate();
  check_shapes(problem, f);
  f.objective_trace.clear();
  f.iterations = 0;
  f.converged = false;
  double prev = objective(problem, f, cfg);
  f.objective_trace.push_back(prev);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    update_sweep(problem, cfg, f, it);
    const double cur = objective(problem, f, cfg);
    if (!std::isfinite(cur)) throw SolverError("non-finite objective at iteration " + std::to_string(it));
    f.objective_trace.push_back(cur);
    f.iterations = it;
    const double denom = std::max(prev, std::numeric_limits<double>::min());
    if (std::abs(prev - cur) / denom < cfg.rel_tol) {
      f.converged = true;
      break;
    }
    prev = cur;
  }
  return f;
}

FactorSet multi_nmf(const FeatureMatrix& X_uw, const FeatureMatrix& X_uh, const FeatureMatrix& X_ud,
                    const UserGraph& C, const SimilarityMatrix& H_sim, const SimilarityMatrix& D_sim,
                    const SimilarityMatrix& W_sim, const SolverConfig& cfg) {
  return solve(NmfProblem::multi(X_uw, X_uh, X_ud, C, H_sim, D_sim, W_sim), cfg);
}

FactorSet tri_nmf(const FeatureMatrix& X_uw, const FeatureMatrix& X_uf, Method feature, const UserGraph& C,
                  const SimilarityMatrix& F_sim, const SimilarityMatrix& W_sim, const SolverConfig& cfg) {
  return solve(NmfProblem::tri(X_uw, X_uf, feature, C, F_sim, W_sim), cfg);
}

FactorSet dual_nmf(const FeatureMatrix& X_uw, const UserGraph& C, const SimilarityMatrix& W_sim,
                   const SolverConfig& cfg) {
  return solve(NmfProblem::dual(X_uw, C, W_sim), cfg);
}

ObjectiveTerms objective_terms(const NmfProblem& pr, const FactorSet& f, const SolverConfig& cfg) {
  check_shapes(pr, f);
  ObjectiveTerms t;
  t.words = residual_squared(pr.words(), f.U, f.W);
  t.hashtags = residual_squared(pr.hashtags(), f.U, f.H);
  t.domains = residual_squared(pr.domains(), f.U, f.D);
  t.users = cfg.alpha * laplacian_trace(pr.user_graph(), f.U);
  t.hashtag_sim = cfg.gamma * laplacian_trace(pr.hashtags().similarity, f.H);
  t.domain_sim = cfg.theta * laplacian_trace(pr.domains().similarity, f.D);
  t.word_sim = cfg.beta * laplacian_trace(pr.words().similarity, f.W);
  return t;
}

double objective(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg) {
  return objective_terms(problem, f, cfg).total();
}

Gradients gradients(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg) {
  check_shapes(problem, f);
  const AllParts p = all_parts(problem, f, cfg);
  return {2 * (p.U.den - p.U.num), 2 * (p.H.den - p.H.num), 2 * (p.D.den - p.D.num), 2 * (p.W.den - p.W.num)};
}

double kkt_residual(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg) {
  const Gradients g = gradients(problem, f, cfg);
  double r = 0;
  auto take = [&r](const MatrixXd& F, const MatrixXd& G) {
    if (F.size()) r = std::max(r, (F.array() * G.array()).abs().maxCoeff());
  };
  take(f.U, g.U);
  take(f.H, g.H);
  take(f.D, g.D);
  take(f.W, g.W);
  return r;
}

double kkt_scale(const NmfProblem& problem, const FactorSet& f, const SolverConfig& cfg) {
  check_shapes(problem, f);
  const AllParts p = all_parts(problem, f, cfg);
  double s = 0;
  auto take = [&s](const MatrixXd& F, const Parts& q) {
    if (F.size()) s = std::max(s, (2 * F.array() * (q.num.array() + q.den.array())).maxCoeff());
  };
  take(f.U, p.U);
  take(f.H, p.H);
  take(f.D, p.D);
  take(f.W, p.W);
  return s;
}

Partition assign(const Eigen::MatrixXd& U) {
  Partition p;
  p.k = static_cast<int>(U.cols());
  p.assignment.resize(static_cast<std::size_t>(U.rows()), 0);
  for (Index i = 0; i < U.rows(); ++i) {
    Index best = 0;
    for (Index j = 1; j < U.cols(); ++j)
      if (U(i, j) > U(i, best)) best = j;
    if (U.cols() == 0 || U(i, best) <= 0) ++p.zero_rows;
    p.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return p;
}

void write_factor_set(const std::filesystem::path& dir, const FactorSet& f, const nlohmann::json& manifest) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "U.txt", f.U);
  if (f.H.rows()) write_matrix(dir / "H.txt", f.H);
  if (f.D.rows()) write_matrix(dir / "D.txt", f.D);
  write_matrix(dir / "W.txt", f.W);
  {
    std::ofstream out(dir / "objective_trace.csv");
    out.precision(17);
    out << "iteration,objective\n";
    for (std::size_t i = 0; i < f.objective_trace.size(); ++i) out << i << ',' << f.objective_trace[i] << '\n';
  }
  nlohmann::json m = manifest;
  m["iterations"] = f.iterations;
  m["converged"] = f.converged;
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

Eigen::MatrixXd read_dense_matrix(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  Index rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw std::runtime_error(file.string() + ": bad shape header");
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (!(in >> m(i, j))) throw std::runtime_error(file.string() + ": truncated matrix");
  return m;
}

}  // namespace polnmf
