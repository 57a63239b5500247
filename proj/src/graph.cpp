#include "polnmf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace polnmf {

namespace {

void require_same_size(const UserGraph& a, const UserGraph& b, const char* op) {
  if (a.size() != b.size() || a.weights.cols() != b.weights.cols())
    throw std::invalid_argument(std::string(op) + ": graph size mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
}

// Adds 1 to both (u, v) and (v, u).
void add_undirected(std::vector<Eigen::Triplet<double>>& trips, std::size_t u, std::size_t v) {
  trips.emplace_back(static_cast<int>(u), static_cast<int>(v), 1.0);
  trips.emplace_back(static_cast<int>(v), static_cast<int>(u), 1.0);
}

SparseMatrix from_triplets(Eigen::Index n, const std::vector<Eigen::Triplet<double>>& trips) {
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

// sum_k R[i][k] R[k][j] over ascending k, skipping k == i and k == j.
double two_path_weight(const SparseMatrix& R, Eigen::Index i, Eigen::Index j) {
  SparseMatrix::InnerIterator a(R, i), b(R, j);  // columns i and j; R is symmetric
  double s = 0;
  while (a && b) {
    if (a.index() < b.index()) {
      ++a;
    } else if (b.index() < a.index()) {
      ++b;
    } else {
      if (a.index() != i && a.index() != j) s += a.value() * b.value();
      ++a;
      ++b;
    }
  }
  return s;
}

template <class EdgeWeight>
UserGraph filter_mentions(const UserGraph& R, const UserGraph& M, GraphRole role, EdgeWeight weight) {
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index j = 0; j < M.weights.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(M.weights, j); it; ++it) {
      const Eigen::Index i = it.row();
      if (i == j || it.value() == 0) continue;
      const double w = weight(it.value(), R.weights.coeff(i, j), two_path_weight(R.weights, i, j));
      if (w != 0) trips.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
    }
  }
  return {from_triplets(M.size(), trips), role};
}

}  // namespace

std::string to_string(GraphRole role) {
  switch (role) {
    case GraphRole::R: return "R";
    case GraphRole::M: return "M";
    case GraphRole::DeltaM: return "DeltaM";
    case GraphRole::DeltaMw: return "DeltaMw";
    case GraphRole::Combined: return "Combined";
  }
  return "?";
}

GraphRole parse_graph_role(const std::string& name) {
  for (auto r : {GraphRole::R, GraphRole::M, GraphRole::DeltaM, GraphRole::DeltaMw, GraphRole::Combined})
    if (to_string(r) == name) return r;
  throw std::invalid_argument("unknown graph role '" + name + "'");
}

std::string to_string(GraphVariant v) {
  switch (v) {
    case GraphVariant::RM: return "RM";
    case GraphVariant::RdM: return "RdM";
    case GraphVariant::RdMw: return "RdMw";
  }
  return "?";
}

GraphVariant parse_graph_variant(const std::string& name) {
  for (auto v : {GraphVariant::RM, GraphVariant::RdM, GraphVariant::RdMw})
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown graph variant '" + name + "' (expected RM, RdM or RdMw)");
}

UserGraph build_retweet_graph(const Corpus& corpus) {
  const auto idx = corpus.user_index();
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& t : corpus.tweets) {
    if (!t.retweet_of || t.retweet_edited) continue;
    auto u = idx.find(t.author), v = idx.find(*t.retweet_of);
    if (u == idx.end() || v == idx.end() || u->second == v->second) continue;
    add_undirected(trips, u->second, v->second);
  }
  return {from_triplets(static_cast<Eigen::Index>(corpus.users.size()), trips), GraphRole::R};
}

UserGraph build_mention_graph(const Corpus& corpus) {
  const auto idx = corpus.user_index();
  std::vector<Eigen::Triplet<double>> trips;
  for (const auto& t : corpus.tweets) {
    auto u = idx.find(t.author);
    if (u == idx.end()) continue;
    for (const auto& m : t.mentions) {
      auto v = idx.find(m);
      if (v != idx.end() && v->second != u->second) add_undirected(trips, u->second, v->second);
    }
    if (t.retweet_of && t.retweet_edited) {
      auto v = idx.find(*t.retweet_of);
      if (v != idx.end() && v->second != u->second) add_undirected(trips, u->second, v->second);
    }
  }
  return {from_triplets(static_cast<Eigen::Index>(corpus.users.size()), trips), GraphRole::M};
}

UserGraph tsb_filter(const UserGraph& R, const UserGraph& M) {
  require_same_size(R, M, "tsb_filter");
  return filter_mentions(R, M, GraphRole::DeltaM, [](double m, double direct, double paths) {
    return (direct > 0 || paths > 0) ? m : 0.0;
  });
}

UserGraph tsb_filter_weighted(const UserGraph& R, const UserGraph& M) {
  require_same_size(R, M, "tsb_filter_weighted");
  return filter_mentions(R, M, GraphRole::DeltaMw,
                         [](double m, double direct, double paths) { return m * (direct + paths); });
}

UserGraph combine(const UserGraph& R, const UserGraph& M_variant) {
  require_same_size(R, M_variant, "combine");
  SparseMatrix c = R.weights + M_variant.weights;
  c.makeCompressed();
  return {std::move(c), GraphRole::Combined};
}

UserGraph connectivity(const UserGraph& R, const UserGraph& M, GraphVariant variant) {
  switch (variant) {
    case GraphVariant::RM: return combine(R, M);
    case GraphVariant::RdM: return combine(R, tsb_filter(R, M));
    case GraphVariant::RdMw: return combine(R, tsb_filter_weighted(R, M));
  }
  throw std::invalid_argument("bad graph variant");
}

LaplacianSplit laplacian_split(const SparseMatrix& S) {
  if (S.rows() != S.cols()) throw std::invalid_argument("laplacian_split: matrix is not square");
  const Eigen::Index n = S.rows();
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < S.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(S, j); it; ++it) degree(it.row()) += it.value();

  // L = D - S; plus = (|L| + L)/2, minus = (|L| - L)/2, entry by entry.
  SparseMatrix L = -S;
  for (Eigen::Index i = 0; i < n; ++i) L.coeffRef(i, i) += degree(i);
  L.makeCompressed();
  std::vector<Eigen::Triplet<double>> plus, minus;
  for (Eigen::Index j = 0; j < L.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(L, j); it; ++it) {
      const double v = it.value();
      const double p = (std::abs(v) + v) / 2, m = (std::abs(v) - v) / 2;
      if (p != 0) plus.emplace_back(static_cast<int>(it.row()), static_cast<int>(j), p);
      if (m != 0) minus.emplace_back(static_cast<int>(it.row()), static_cast<int>(j), m);
    }
  }
  return {from_triplets(n, plus), from_triplets(n, minus)};
}

EndorsementStats endorsement_stats(const UserGraph& R, const UserGraph& M_variant, std::span<const int> labels,
                                   EdgeMeasure measure) {
  require_same_size(R, M_variant, "endorsement_stats");
  if (static_cast<Eigen::Index>(labels.size()) != R.size())
    throw std::invalid_argument("endorsement_stats: label count does not match user count");
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0) throw std::invalid_argument("endorsement_stats: user " + std::to_string(i) + " has no label");

  const SparseMatrix c = R.weights + M_variant.weights;
  EndorsementStats s;
  for (Eigen::Index j = 0; j < c.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(c, j); it; ++it) {
      if (it.row() >= j || it.value() == 0) continue;
      const double amount = measure == EdgeMeasure::weight ? it.value() : 1.0;
      (labels[static_cast<std::size_t>(it.row())] == labels[static_cast<std::size_t>(j)] ? s.inner : s.inter) +=
          amount;
    }
  }
  return s;
}

void write_edge_list(std::ostream& out, const SparseMatrix& matrix, const nlohmann::json& header) {
  nlohmann::json h = header;
  h["n"] = matrix.rows();
  out << "# " << h.dump() << '\n';
  std::vector<std::tuple<Eigen::Index, Eigen::Index, double>> edges;
  for (Eigen::Index j = 0; j < matrix.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(matrix, j); it; ++it)
      if (it.row() < j && it.value() != 0) edges.emplace_back(it.row(), j, it.value());
  std::sort(edges.begin(), edges.end());
  std::ostringstream line;
  line.precision(17);
  for (const auto& [i, j, w] : edges) {
    line.str("");
    line << i << ' ' << j << ' ' << w << '\n';
    out << line.str();
  }
}

EdgeList read_edge_list(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw std::runtime_error("edge list: missing header line");
  EdgeList el;
  el.header = nlohmann::json::parse(line.substr(2));
  const auto n = el.header.at("n").get<Eigen::Index>();
  std::vector<Eigen::Triplet<double>> trips;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long i = 0, j = 0;
    double w = 0;
    if (!(fields >> i >> j >> w) || i < 0 || j < 0 || i >= n || j >= n)
      throw std::runtime_error("edge list: bad edge on line " + std::to_string(line_no));
    trips.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
    if (i != j) trips.emplace_back(static_cast<int>(j), static_cast<int>(i), w);
  }
  el.matrix = from_triplets(n, trips);
  return el;
}

nlohmann::json graph_header(const UserGraph& g, std::span<const UserId> users) {
  return {{"role", to_string(g.role)}, {"users", std::vector<UserId>(users.begin(), users.end())}};
}

}  // namespace polnmf
