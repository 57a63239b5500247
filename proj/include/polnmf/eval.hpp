#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "polnmf/graph.hpp"
#include "polnmf/partition.hpp"

namespace polnmf {

// Predicted communities and ground-truth classes for the same users. Any
// integer values work as labels; they are compared for equality only.
struct LabeledPartition {
  std::vector<int> predicted;
  std::vector<int> truth;

  LabeledPartition(std::vector<int> predicted, std::vector<int> truth);
  LabeledPartition(const Partition& p, std::vector<int> truth) : LabeledPartition(p.assignment, std::move(truth)) {}

  std::size_t size() const { return predicted.size(); }
};

// Rows: predicted communities; columns: truth classes; labels compacted in
// order of first appearance.
struct Contingency {
  std::vector<std::vector<std::int64_t>> counts;
  std::vector<std::int64_t> row_sums, col_sums;
  std::int64_t n = 0;
};

Contingency contingency(const LabeledPartition& lp);

double purity(const LabeledPartition& lp);
double adjusted_rand_index(const LabeledPartition& lp);
// Mutual information over sqrt(H(truth) H(predicted)); 0 when either entropy is 0.
double nmi(const LabeledPartition& lp);
double modularity(const UserGraph& graph, std::span<const int> communities);
inline double modularity(const UserGraph& graph, const Partition& p) { return modularity(graph, p.assignment); }

// Number of nonempty communities.
int communities_found(std::span<const int> assignment);

struct EvalReport {
  double purity = 0;
  double ari = 0;
  double nmi = 0;
  std::optional<double> modularity;
  int k_found = 0;
};

EvalReport evaluate(const LabeledPartition& lp, const UserGraph* graph = nullptr);

nlohmann::json to_json(const EvalReport& r);

// Algorithm,Graph,Content,Purity,ARI,NMI,k
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& r, const std::string& algorithm, const std::string& graph,
                         const std::string& content);

// Fixed-precision text so result files compare byte-for-byte.
std::string format_real(double v);

}  // namespace polnmf
