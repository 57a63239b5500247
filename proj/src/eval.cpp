#include "polnmf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <unordered_map>

namespace polnmf {

namespace {

std::vector<int> compact(const std::vector<int>& labels, std::size_t& distinct) {
  std::unordered_map<int, int> id;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) out.push_back(id.try_emplace(l, static_cast<int>(id.size())).first->second);
  distinct = id.size();
  return out;
}

std::int64_t pairs(std::int64_t n) { return n * (n - 1) / 2; }

double entropy(const std::vector<std::int64_t>& sums, std::int64_t n) {
  double h = 0;
  for (auto s : sums)
    if (s > 0) {
      const double p = static_cast<double>(s) / static_cast<double>(n);
      h -= p * std::log(p);
    }
  return h;
}

}  // namespace

LabeledPartition::LabeledPartition(std::vector<int> p, std::vector<int> t) : predicted(std::move(p)), truth(std::move(t)) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("predicted and truth cover different numbers of users (" +
                                std::to_string(predicted.size()) + " vs " + std::to_string(truth.size()) + ")");
}

Contingency contingency(const LabeledPartition& lp) {
  std::size_t rows = 0, cols = 0;
  const auto pred = compact(lp.predicted, rows);
  const auto truth = compact(lp.truth, cols);
  Contingency c;
  c.counts.assign(rows, std::vector<std::int64_t>(cols, 0));
  c.row_sums.assign(rows, 0);
  c.col_sums.assign(cols, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++c.counts[static_cast<std::size_t>(pred[i])][static_cast<std::size_t>(truth[i])];
    ++c.row_sums[static_cast<std::size_t>(pred[i])];
    ++c.col_sums[static_cast<std::size_t>(truth[i])];
  }
  c.n = static_cast<std::int64_t>(pred.size());
  return c;
}

double purity(const LabeledPartition& lp) {
  if (lp.size() == 0) throw std::invalid_argument("purity of an empty partition");
  const Contingency c = contingency(lp);
  std::int64_t hit = 0;
  for (const auto& row : c.counts) hit += *std::max_element(row.begin(), row.end());
  return static_cast<double>(hit) / static_cast<double>(c.n);
}

namespace {

__int128 gcd_wide(__int128 a, __int128 b) {
  while (b != 0) {
    const __int128 t = a % b;
    a = b;
    b = t;
  }
  return a == 0 ? 1 : a;
}

}  // namespace

double adjusted_rand_index(const LabeledPartition& lp) {
  if (lp.size() < 2) throw std::invalid_argument("ARI needs at least two users");
  const Contingency c = contingency(lp);
  // Hubert-Arabie, scaled by C(n,2) so everything stays in integers:
  //   ARI = (index*N - a*b) / ((a+b)*N/2 - a*b)
  using wide = __int128;
  wide index = 0, a = 0, b = 0;
  for (const auto& row : c.counts)
    for (auto v : row) index += pairs(v);
  for (auto v : c.row_sums) a += pairs(v);
  for (auto v : c.col_sums) b += pairs(v);
  const wide N = pairs(c.n);
  const wide num = 2 * (index * N - a * b);
  const wide den = (a + b) * N - 2 * a * b;
  if (den == 0) return 1.0;  // both partitions trivial and identical
  // Reduced to lowest terms, the quotient is correctly rounded whenever both
  // parts are exact doubles, so any exact formula for ARI gives the same bits.
  wide g = gcd_wide(num < 0 ? -num : num, den < 0 ? -den : den);
  const wide rn = num / g, rd = den / g;
  constexpr wide exact = wide(1) << 53;
  if (rn < exact && -rn < exact && rd < exact && -rd < exact) return static_cast<double>(rn) / static_cast<double>(rd);
  return static_cast<double>(static_cast<long double>(rn) / static_cast<long double>(rd));
}

double nmi(const LabeledPartition& lp) {
  if (lp.size() == 0) throw std::invalid_argument("NMI of an empty partition");
  const Contingency c = contingency(lp);
  const double n = static_cast<double>(c.n);
  const double h_pred = entropy(c.row_sums, c.n);
  const double h_truth = entropy(c.col_sums, c.n);
  if (h_pred == 0 || h_truth == 0) return 0.0;
  double mi = 0;
  for (std::size_t i = 0; i < c.counts.size(); ++i)
    for (std::size_t j = 0; j < c.counts[i].size(); ++j) {
      const auto v = c.counts[i][j];
      if (v == 0) continue;
      const double pij = static_cast<double>(v) / n;
      mi += pij * std::log(pij * n * n / (static_cast<double>(c.row_sums[i]) * static_cast<double>(c.col_sums[j])));
    }
  return mi / std::sqrt(h_pred * h_truth);
}

double modularity(const UserGraph& graph, std::span<const int> communities) {
  const SparseMatrix& A = graph.weights;
  if (static_cast<Eigen::Index>(communities.size()) != A.rows())
    throw std::invalid_argument("modularity: partition size does not match graph size");
  const double two_m = A.sum();
  if (!(two_m > 0)) throw std::invalid_argument("modularity of a graph with zero total weight");

  // Q = sum_c [ e_c / 2m - (d_c / 2m)^2 ], e_c the weight inside c (both
  // directions), d_c the total degree of c.
  std::map<int, double> inside, degree;
  for (Eigen::Index j = 0; j < A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
      const int cj = communities[static_cast<std::size_t>(j)];
      degree[cj] += it.value();
      if (communities[static_cast<std::size_t>(it.row())] == cj) inside[cj] += it.value();
    }
  double q = 0;
  for (const auto& [c, d] : degree) {
    const double e = inside.count(c) ? inside.at(c) : 0.0;
    q += e / two_m - (d / two_m) * (d / two_m);
  }
  return q;
}

int communities_found(std::span<const int> assignment) {
  std::vector<int> v(assignment.begin(), assignment.end());
  std::sort(v.begin(), v.end());
  return static_cast<int>(std::unique(v.begin(), v.end()) - v.begin());
}

EvalReport evaluate(const LabeledPartition& lp, const UserGraph* graph) {
  EvalReport r;
  r.purity = purity(lp);
  r.ari = adjusted_rand_index(lp);
  r.nmi = nmi(lp);
  r.k_found = communities_found(lp.predicted);
  if (graph && graph->weights.sum() > 0) r.modularity = modularity(*graph, lp.predicted);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"purity", r.purity}, {"ari", r.ari}, {"nmi", r.nmi}, {"k_found", r.k_found}};
  j["modularity"] = r.modularity ? nlohmann::json(*r.modularity) : nlohmann::json(nullptr);
  return j;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10f", v);
  std::string s(buf);
  if (s == "-0.0000000000") s = "0.0000000000";
  return s;
}

std::string eval_csv_header() { return "Algorithm,Graph,Content,Purity,ARI,NMI,k"; }

std::string eval_csv_row(const EvalReport& r, const std::string& algorithm, const std::string& graph,
                         const std::string& content) {
  return algorithm + ',' + graph + ',' + content + ',' + format_real(r.purity) + ',' + format_real(r.ari) + ',' +
         format_real(r.nmi) + ',' + std::to_string(r.k_found);
}

}  // namespace polnmf
