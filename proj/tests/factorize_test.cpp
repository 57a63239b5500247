#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "generators.hpp"
#include "oracles.hpp"
#include "polnmf/eval.hpp"
#include "polnmf/factorize.hpp"

using namespace polnmf;
using oracle::Dense;

namespace {

Dense mat(Eigen::Index r, Eigen::Index c, std::initializer_list<double> v) {
  Dense m(r, c);
  auto it = v.begin();
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = *it++;
  return m;
}

SparseMatrix sp(const Dense& d) { return d.sparseView(); }
SparseMatrix none() { return SparseMatrix(0, 0); }
FeatureMatrix empty_cols(Eigen::Index rows) { return FeatureMatrix(rows, 0); }

FactorSet ones(const NmfProblem& p, int k) {
  FactorSet f;
  f.U = Dense::Ones(p.users(), k);
  f.W = Dense::Ones(p.words().features(), k);
  f.H = Dense::Ones(p.hashtags().features(), k);
  f.D = Dense::Ones(p.domains().features(), k);
  return f;
}

const Dense kPair = mat(2, 2, {0, 1, 1, 0});

// Two blocks of two users in every matrix.
struct Planted {
  Dense X = mat(4, 4, {3, 2, 0, 0, 2, 3, 0, 0, 0, 0, 3, 2, 0, 0, 2, 3});
  Dense C = mat(4, 4, {0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0});
  Dense S = mat(4, 4, {0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0});
  std::vector<int> truth{0, 0, 1, 1};

  NmfProblem multi() const { return NmfProblem(sp(X), sp(X), sp(X), sp(C), sp(S), sp(S), sp(S)); }
};

double rel_diff(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

TEST(SolverConfig, Validation) {
  SolverConfig ok;
  EXPECT_NO_THROW(ok.validate());
  for (auto mutate : std::vector<std::function<void(SolverConfig&)>>{
           [](SolverConfig& c) { c.k = 1; }, [](SolverConfig& c) { c.alpha = -1; },
           [](SolverConfig& c) { c.theta = -0.5; }, [](SolverConfig& c) { c.rel_tol = 0; },
           [](SolverConfig& c) { c.epsilon_guard = -1; }}) {
    SolverConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), std::invalid_argument);
  }
}

TEST(Problem, RejectsBadInputs) {
  const Dense X = mat(2, 2, {1, 2, 3, 4});
  EXPECT_THROW(NmfProblem(sp(X), empty_cols(3), empty_cols(2), sp(kPair), sp(kPair), none(), none()),
               std::invalid_argument);
  const Dense asym = mat(2, 2, {0, 1, 0, 0});
  EXPECT_THROW(NmfProblem(sp(X), empty_cols(2), empty_cols(2), sp(asym), sp(kPair), none(), none()),
               std::invalid_argument);
  EXPECT_THROW(NmfProblem(sp(X), empty_cols(2), empty_cols(2), sp(-kPair), sp(kPair), none(), none()),
               std::invalid_argument);
  EXPECT_THROW(NmfProblem(sp(X), empty_cols(2), empty_cols(2), sp(kPair), SparseMatrix(3, 3), none(), none()),
               std::invalid_argument);
}

TEST(DualUpdate, OneStepByHand) {
  // num = X W + C U = [[4,4],[8,8]], den = U W^T W + D_C U = [[5,5],[5,5]]
  const NmfProblem p(sp(mat(2, 2, {1, 2, 3, 4})), empty_cols(2), empty_cols(2), sp(kPair), SparseMatrix(2, 2),
                     none(), none());
  SolverConfig cfg;
  cfg.alpha = 1;
  FactorSet f = ones(p, 2);
  update_sweep(p, cfg, f);
  const double a = std::sqrt(0.8), b = std::sqrt(1.6);
  EXPECT_NEAR(f.U(0, 0), a, 1e-12);
  EXPECT_NEAR(f.U(0, 1), a, 1e-12);
  EXPECT_NEAR(f.U(1, 0), b, 1e-12);
  EXPECT_NEAR(f.U(1, 1), b, 1e-12);
  // W sees the new U: W <- W sqrt(X^T U / (W U^T U)).
  const Dense X = mat(2, 2, {1, 2, 3, 4});
  const Dense U = f.U;
  const Dense num = X.transpose() * U, den = Dense::Ones(2, 2) * (U.transpose() * U);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(f.W(i, j), std::sqrt(num(i, j) / den(i, j)), 1e-12);
}

TEST(MultiUpdate, OneStepByHand) {
  // num = XwW + XhH + XdD + C U = [[7,7],[10,10]]
  // den = U (W^T W + H^T H + D^T D) + D_C U = [[13,13],[13,13]]
  const NmfProblem p(sp(mat(2, 2, {1, 2, 3, 4})), sp(mat(2, 2, {1, 0, 0, 1})), sp(mat(2, 2, {0, 2, 1, 0})),
                     sp(kPair), SparseMatrix(2, 2), SparseMatrix(2, 2), SparseMatrix(2, 2));
  SolverConfig cfg;
  cfg.alpha = 1;
  FactorSet f = ones(p, 2);
  update_sweep(p, cfg, f);
  EXPECT_NEAR(f.U(0, 0), std::sqrt(7.0 / 13), 1e-12);
  EXPECT_NEAR(f.U(0, 1), std::sqrt(7.0 / 13), 1e-12);
  EXPECT_NEAR(f.U(1, 0), std::sqrt(10.0 / 13), 1e-12);
  EXPECT_NEAR(f.U(1, 1), std::sqrt(10.0 / 13), 1e-12);
}

TEST(TriUpdate, HashtagStepByHand) {
  // U first: num = XwW + XhH = [[4,4],[8,8]], den = 8 -> U = [[sqrt(.5)], [1]].
  // Then H: num = Xh^T U + H_sim H = [[1+sqrt(.5)], [2]], den = H U^T U + D H = 4.
  const NmfProblem p(sp(mat(2, 2, {1, 2, 3, 4})), sp(mat(2, 2, {1, 0, 0, 1})), empty_cols(2), SparseMatrix(2, 2),
                     SparseMatrix(2, 2), sp(kPair), none());
  SolverConfig cfg;
  cfg.gamma = 1;
  FactorSet f = ones(p, 2);
  update_sweep(p, cfg, f);
  EXPECT_NEAR(f.U(0, 0), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(f.U(1, 1), 1.0, 1e-12);
  const double h0 = std::sqrt((1 + std::sqrt(0.5)) / 4), h1 = std::sqrt(0.5);
  EXPECT_NEAR(f.H(0, 0), h0, 1e-12);
  EXPECT_NEAR(f.H(0, 1), h0, 1e-12);
  EXPECT_NEAR(f.H(1, 0), h1, 1e-12);
  EXPECT_NEAR(f.H(1, 1), h1, 1e-12);
}

TEST(MultiNmf, PlantedBlocksRecovered) {
  const Planted pl;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverConfig cfg;
    cfg.alpha = cfg.beta = cfg.gamma = cfg.theta = 1;
    cfg.seed = seed;
    const auto f = solve(pl.multi(), cfg);
    EXPECT_EQ(adjusted_rand_index(LabeledPartition(assign(f.U), pl.truth)), 1.0) << "seed " << seed;
  }
}

TEST(TriNmf, PlantedBlocksWithHashtags) {
  const Planted pl;
  const Dense tags = mat(4, 2, {2, 0, 1, 0, 0, 1, 0, 2});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SolverConfig cfg;
    cfg.alpha = cfg.gamma = 1;
    cfg.seed = seed;
    const auto f = tri_nmf(sp(pl.X), sp(tags), Method::tri_hashtag, UserGraph{sp(pl.C)},
                           SimilarityMatrix{SparseMatrix(2, 2), SimilarityKind::cooccurrence},
                           SimilarityMatrix{SparseMatrix(4, 4)}, cfg);
    EXPECT_EQ(adjusted_rand_index(LabeledPartition(assign(f.U), pl.truth)), 1.0) << "seed " << seed;
  }
}

TEST(DualNmf, WorkedExampleMajority) {
  const Dense X = mat(4, 4, {5, 5, 0, 0, 4, 6, 0, 0, 0, 0, 5, 5, 0, 0, 6, 4});
  const Planted pl;
  std::map<std::vector<int>, int> outcomes;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SolverConfig cfg;
    cfg.alpha = 10;
    cfg.seed = seed;
    auto a = assign(dual_nmf(sp(X), UserGraph{sp(pl.C)}, SimilarityMatrix{SparseMatrix(4, 4)}, cfg).U).assignment;
    // Canonical labels so {0,0,1,1} and {1,1,0,0} count as the same outcome.
    if (a[0] == 1)
      for (auto& v : a) v = 1 - v;
    ++outcomes[a];
  }
  auto best = std::max_element(outcomes.begin(), outcomes.end(),
                               [](const auto& x, const auto& y) { return x.second < y.second; });
  EXPECT_EQ(best->first, (std::vector<int>{0, 0, 1, 1}));
}

TEST(DualNmf, PlainNmfDecreases) {
  std::mt19937_64 rng(1);
  const Dense X = gen::counts(rng, 12, 9, 0.5);
  SolverConfig cfg;
  cfg.k = 3;
  const auto f = dual_nmf(sp(X), UserGraph{SparseMatrix(12, 12)}, SimilarityMatrix{SparseMatrix(9, 9)}, cfg);
  ASSERT_GE(f.objective_trace.size(), 2u);
  EXPECT_LT(f.objective_trace.back(), f.objective_trace.front());
  for (std::size_t t = 1; t < f.objective_trace.size(); ++t)
    EXPECT_GE(f.objective_trace[t - 1] - f.objective_trace[t], -1e-9 * f.objective_trace[t - 1]);
}

TEST(Objective, PerfectFactorizationIsZero) {
  const Dense U = mat(3, 2, {1, 0, 0, 2, 1, 1}), W = mat(4, 2, {1, 0, 2, 0, 0, 1, 0, 3});
  const Dense X = U * W.transpose();
  const NmfProblem p(sp(X), empty_cols(3), empty_cols(3), SparseMatrix(3, 3), SparseMatrix(4, 4), none(), none());
  FactorSet f{U, Dense(0, 2), Dense(0, 2), W, {}, 0, false};
  EXPECT_EQ(objective(p, f, SolverConfig{}), 0.0);
}

TEST(Objective, ConstantOnComponentsHasNoGraphPenalty) {
  const Planted pl;
  FactorSet f{mat(4, 2, {0.3, 0.7, 0.3, 0.7, 0.9, 0.1, 0.9, 0.1}), Dense::Ones(4, 2), Dense::Ones(4, 2),
              Dense::Ones(4, 2), {}, 0, false};
  SolverConfig cfg;
  cfg.alpha = 5;
  EXPECT_NEAR(objective_terms(pl.multi(), f, cfg).users, 0.0, 1e-15);
}

TEST(Objective, MatchesTraceExpansion) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 30; ++rep) {
    const auto in = gen::random_instance(rng, 1 + rep % 3, 5, 15);
    const auto p = in.problem();
    auto cfg = in.cfg;
    cfg.alpha += 0.5;
    cfg.beta += 0.25;
    cfg.gamma += 2;
    cfg.theta += 3;
    auto inst = in;
    inst.cfg = cfg;
    const auto f = initial_factors(p, cfg);
    const auto t = objective_terms(p, f, cfg);
    const Dense L_C = oracle::laplacian(in.C);
    EXPECT_LE(rel_diff(t.users, cfg.alpha * (f.U.transpose() * L_C * f.U).trace()), 1e-10);
    EXPECT_LE(rel_diff(t.word_sim, cfg.beta * (f.W.transpose() * oracle::laplacian(in.Ws) * f.W).trace()), 1e-10);
    EXPECT_LE(rel_diff(t.words, (in.Xw - f.U * f.W.transpose()).squaredNorm()), 1e-10);
    EXPECT_LE(rel_diff(t.total(), inst.trace_objective(f)), 1e-10);
  }
}

class Monotone : public ::testing::TestWithParam<int> {};

TEST_P(Monotone, EverySweepDecreases) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) + 1000);
  for (int blocks = 1; blocks <= 3; ++blocks) {
    auto in = gen::random_instance(rng, blocks, 10, 25);
    in.cfg.max_iters = 150;
    in.cfg.rel_tol = 1e-12;
    const auto f = solve(in.problem(), in.cfg);
    for (std::size_t t = 1; t < f.objective_trace.size(); ++t)
      ASSERT_GE(f.objective_trace[t - 1] - f.objective_trace[t], -1e-9 * f.objective_trace[t - 1])
          << "blocks " << blocks << " sweep " << t;
    EXPECT_TRUE((f.U.array() >= 0).all() && (f.W.array() >= 0).all() && (f.H.array() >= 0).all() &&
                (f.D.array() >= 0).all());
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, Monotone, ::testing::Range(0, 8));

TEST(Reduction, MultiToTriToDual) {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    auto in = gen::random_instance(rng, 2, 8, 20);
    in.cfg.max_iters = 60;
    const Eigen::Index n = in.Xw.rows();
    const UserGraph C{sp(in.C)};
    const SimilarityMatrix W{sp(in.Ws)}, H{sp(in.Hs), SimilarityKind::cooccurrence}, none_sim{SparseMatrix(0, 0)};

    const auto multi = multi_nmf(sp(in.Xw), sp(in.Xh), empty_cols(n), C, H, none_sim, W, in.cfg);
    const auto tri = tri_nmf(sp(in.Xw), sp(in.Xh), Method::tri_hashtag, C, H, W, in.cfg);
    ASSERT_EQ(multi.objective_trace.size(), tri.objective_trace.size());
    for (std::size_t t = 0; t < tri.objective_trace.size(); ++t)
      EXPECT_LE(rel_diff(multi.objective_trace[t], tri.objective_trace[t]), 1e-12);

    const auto tri0 = tri_nmf(sp(in.Xw), empty_cols(n), Method::tri_hashtag, C, none_sim, W, in.cfg);
    const auto dual = dual_nmf(sp(in.Xw), C, W, in.cfg);
    ASSERT_EQ(tri0.objective_trace.size(), dual.objective_trace.size());
    for (std::size_t t = 0; t < dual.objective_trace.size(); ++t)
      EXPECT_LE(rel_diff(tri0.objective_trace[t], dual.objective_trace[t]), 1e-12);
    EXPECT_EQ(tri0.U, dual.U);
  }
}

TEST(Gradients, MatchCentralDifferences) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(0.1, 1.0);
  const double h = 1e-6;
  for (int rep = 0; rep < 10; ++rep) {
    gen::Instance in;
    in.Xw = gen::counts(rng, 5, 4, 0.6);
    in.Xh = gen::counts(rng, 5, 3, 0.5);
    in.Xd = gen::counts(rng, 5, 2, 0.5);
    in.C = oracle::random_symmetric(rng, 5, 0.5, 3);
    in.Ws = gen::similarity(rng, 4);
    in.Hs = gen::similarity(rng, 3);
    in.Ds = gen::similarity(rng, 2);
    in.cfg.k = 3;
    in.cfg.alpha = 1;
    in.cfg.beta = 10;
    in.cfg.gamma = 1;
    in.cfg.theta = 10;
    const auto p = in.problem();
    FactorSet f = initial_factors(p, in.cfg);
    const Gradients g = gradients(p, f, in.cfg);
    auto check = [&](Dense FactorSet::*field, const Dense& analytic, const char* name) {
      Dense fd(analytic.rows(), analytic.cols());
      for (Eigen::Index i = 0; i < fd.rows(); ++i)
        for (Eigen::Index j = 0; j < fd.cols(); ++j) {
          FactorSet plus = f, minus = f;
          (plus.*field)(i, j) += h;
          (minus.*field)(i, j) -= h;
          fd(i, j) = (objective(p, plus, in.cfg) - objective(p, minus, in.cfg)) / (2 * h);
        }
      // Error relative to the largest gradient entry of the factor.
      EXPECT_LE((fd - analytic).cwiseAbs().maxCoeff() / analytic.cwiseAbs().maxCoeff(), 1e-4) << name;
    };
    check(&FactorSet::U, g.U, "U");
    check(&FactorSet::W, g.W, "W");
    check(&FactorSet::H, g.H, "H");
    check(&FactorSet::D, g.D, "D");
  }
}

TEST(Kkt, SmallAtTightConvergence) {
  const Planted pl;
  const auto p = pl.multi();
  SolverConfig cfg;
  cfg.alpha = cfg.beta = cfg.gamma = cfg.theta = 1;
  cfg.rel_tol = 1e-15;
  cfg.max_iters = 20000;
  cfg.seed = 4;
  const auto f = solve(p, cfg);
  EXPECT_LE(kkt_residual(p, f, cfg), 1e-6 * kkt_scale(p, f, cfg));

  const auto start = initial_factors(p, cfg);
  EXPECT_GT(kkt_residual(p, start, cfg), 1e-2 * kkt_scale(p, start, cfg));
}

TEST(Kkt, ZeroFactors) {
  const Planted pl;
  const auto p = pl.multi();
  FactorSet f{Dense::Zero(4, 2), Dense::Zero(4, 2), Dense::Zero(4, 2), Dense::Zero(4, 2), {}, 0, false};
  SolverConfig cfg;
  cfg.alpha = 1;
  EXPECT_EQ(kkt_residual(p, f, cfg), 0.0);
}

TEST(Assign, ExhaustiveTieBreak) {
  // Every row over {0, 0.5, 1}^3.
  const double vals[] = {0, 0.5, 1};
  Dense U(27, 3);
  for (int r = 0; r < 27; ++r)
    for (int c = 0, x = r; c < 3; ++c, x /= 3) U(r, c) = vals[x % 3];
  const auto p = assign(U);
  EXPECT_EQ(p.k, 3);
  std::size_t zeros = 0;
  for (int r = 0; r < 27; ++r) {
    const double top = U.row(r).maxCoeff();
    int want = 0;
    while (U(r, want) != top) ++want;
    EXPECT_EQ(p.assignment[static_cast<std::size_t>(r)], want) << "row " << r;
    zeros += top == 0;
  }
  EXPECT_EQ(p.zero_rows, zeros);
  EXPECT_EQ(assign(mat(1, 2, {0.2, 0.7})).assignment[0], 1);
  EXPECT_EQ(assign(mat(1, 2, {0.5, 0.5})).assignment[0], 0);
  EXPECT_EQ(assign(Dense::Identity(3, 3)).assignment, (std::vector<int>{0, 1, 2}));
}

TEST(Solver, DeterministicTrace) {
  std::mt19937_64 rng(41);
  const auto in = gen::random_instance(rng, 3);
  const auto a = solve(in.problem(), in.cfg), b = solve(in.problem(), in.cfg);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
  EXPECT_EQ(a.U, b.U);
}

TEST(Solver, InitialFactorsInUnitInterval) {
  std::mt19937_64 rng(43);
  const auto in = gen::random_instance(rng, 3);
  const auto f = initial_factors(in.problem(), in.cfg);
  for (const Dense* m : {&f.U, &f.W, &f.H, &f.D}) {
    EXPECT_TRUE((m->array() > 0).all());
    EXPECT_TRUE((m->array() <= 1).all());
  }
}

TEST(Solver, NonFiniteValueNamesFactorAndIteration) {
  const Planted pl;
  const auto p = pl.multi();
  SolverConfig cfg;
  FactorSet f = ones(p, 2);
  f.W(0, 0) = std::numeric_limits<double>::infinity();
  try {
    update_sweep(p, cfg, f, 7);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("factor U"), std::string::npos) << msg;
    EXPECT_NE(msg.find("iteration 7"), std::string::npos) << msg;
  }
}

TEST(Solver, ConvergesAndStops) {
  const Planted pl;
  SolverConfig cfg;
  cfg.rel_tol = 1e-4;
  const auto f = solve(pl.multi(), cfg);
  EXPECT_TRUE(f.converged);
  EXPECT_EQ(f.objective_trace.size(), static_cast<std::size_t>(f.iterations) + 1);
  cfg.max_iters = 0;
  const auto g = solve(pl.multi(), cfg);
  EXPECT_EQ(g.iterations, 0);
  EXPECT_EQ(g.objective_trace.size(), 1u);
}

TEST(FactorIo, RoundTrip) {
  std::mt19937_64 rng(47);
  const auto in = gen::random_instance(rng, 3, 5, 8);
  auto cfg = in.cfg;
  cfg.max_iters = 5;
  const auto f = solve(in.problem(), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "polnmf_factor_io";
  std::filesystem::remove_all(dir);
  write_factor_set(dir, f, {{"seed", cfg.seed}});
  EXPECT_EQ(read_dense_matrix(dir / "U.txt"), f.U);
  EXPECT_EQ(read_dense_matrix(dir / "W.txt"), f.W);
  EXPECT_TRUE(std::filesystem::exists(dir / "objective_trace.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  std::filesystem::remove_all(dir);
}

TEST(Method, Names) {
  for (auto m : {Method::dual, Method::tri_hashtag, Method::tri_domain, Method::multi})
    EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_THROW(parse_method("nmtf"), std::invalid_argument);
}
