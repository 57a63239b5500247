#pragma once

// Hand-rolled random instance generators shared by the property tests and the
// acceptance binary.

#include <random>

#include "oracles.hpp"
#include "polnmf/factorize.hpp"

namespace gen {

using oracle::Dense;

struct Instance {
  Dense Xw, Xh, Xd;  // users x features; Xh / Xd may have zero columns
  Dense C;           // user graph
  Dense Ws, Hs, Ds;  // feature similarities
  polnmf::SolverConfig cfg;

  polnmf::NmfProblem problem() const {
    return polnmf::NmfProblem(Xw.sparseView(), Xh.sparseView(), Xd.sparseView(), C.sparseView(), Ws.sparseView(),
                              Hs.sparseView(), Ds.sparseView());
  }

  // The same instance in the oracle's terms.
  double trace_objective(const polnmf::FactorSet& f) const {
    return oracle::trace_objective(f.U, C, cfg.alpha,
                                   {{Xw, f.W, Ws, cfg.beta}, {Xh, f.H, Hs, cfg.gamma}, {Xd, f.D, Ds, cfg.theta}});
  }
};

inline Dense counts(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double density) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> v(1, 5);
  Dense X = Dense::Zero(rows, cols);
  for (auto& x : X.reshaped())
    if (u(rng) < density) x = v(rng);
  return X;
}

inline Dense similarity(std::mt19937_64& rng, Eigen::Index m) {
  std::uniform_real_distribution<double> u(0, 1);
  Dense S = Dense::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      if (u(rng) < 0.4) S(i, j) = S(j, i) = u(rng);
  return S;
}

// `blocks`: 1 = words only (DualNMF), 2 = words + hashtags (TriNMF),
// 3 = all three (MultiNMF). Weights come from {0, 1, 10}.
inline Instance random_instance(std::mt19937_64& rng, int blocks, Eigen::Index min_users = 10,
                                Eigen::Index max_users = 40) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const double weights[] = {0, 1, 10};
  Instance in;
  const Eigen::Index n = pick(static_cast<int>(min_users), static_cast<int>(max_users));
  const Eigen::Index w = pick(4, 25), h = blocks >= 2 ? pick(2, 10) : 0, d = blocks >= 3 ? pick(2, 8) : 0;
  in.Xw = counts(rng, n, w, 0.3);
  in.Xh = counts(rng, n, h, 0.25);
  in.Xd = counts(rng, n, d, 0.25);
  in.C = oracle::random_symmetric(rng, n, 0.15, 3);
  in.Ws = similarity(rng, w);
  in.Hs = similarity(rng, h);
  in.Ds = similarity(rng, d);
  in.cfg.k = pick(2, 4);
  in.cfg.alpha = weights[pick(0, 2)];
  in.cfg.beta = weights[pick(0, 2)];
  in.cfg.gamma = blocks >= 2 ? weights[pick(0, 2)] : 0;
  in.cfg.theta = blocks >= 3 ? weights[pick(0, 2)] : 0;
  in.cfg.seed = rng();
  return in;
}

}  // namespace gen
