#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include <Eigen/SparseCore>
#include <json.hpp>

#include "polnmf/corpus.hpp"

namespace polnmf {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class GraphRole { R, M, DeltaM, DeltaMw, Combined };

std::string to_string(GraphRole role);
GraphRole parse_graph_role(const std::string& name);

// Weighted undirected user graph. Symmetric, zero diagonal, nonnegative;
// indices follow Corpus::users.
struct UserGraph {
  SparseMatrix weights;
  GraphRole role = GraphRole::Combined;

  Eigen::Index size() const { return weights.rows(); }
};

// Connectivity regularizers fed to the solvers: R+M, R+dM, R+dMw.
enum class GraphVariant { RM, RdM, RdMw };

std::string to_string(GraphVariant v);
GraphVariant parse_graph_variant(const std::string& name);

// Unedited retweets, folded into symmetric counts. Self-retweets and targets
// outside the user list are ignored.
UserGraph build_retweet_graph(const Corpus& corpus);

// Mentions plus edited retweets, folded the same way.
UserGraph build_mention_graph(const Corpus& corpus);

// Keeps M[i][j] where R[i][j] > 0 or i and j share a retweet neighbour.
// Never creates edges absent from M.
UserGraph tsb_filter(const UserGraph& R, const UserGraph& M);

// M[i][j] * (R[i][j] + sum_k R[i][k] R[k][j]).
UserGraph tsb_filter_weighted(const UserGraph& R, const UserGraph& M);

UserGraph combine(const UserGraph& R, const UserGraph& M_variant);

// R combined with the requested mention variant.
UserGraph connectivity(const UserGraph& R, const UserGraph& M, GraphVariant variant);

// L = D - S split elementwise into nonnegative parts with L = plus - minus.
// For a nonnegative zero-diagonal S this gives plus = diag(degree), minus = S.
struct LaplacianSplit {
  SparseMatrix plus;
  SparseMatrix minus;

  SparseMatrix laplacian() const { return plus - minus; }
};

LaplacianSplit laplacian_split(const SparseMatrix& adjacency);
inline LaplacianSplit laplacian_split(const UserGraph& g) { return laplacian_split(g.weights); }

enum class EdgeMeasure { weight, count };

struct EndorsementStats {
  double inner = 0;
  double inter = 0;

  double inner_fraction() const { return inner + inter > 0 ? inner / (inner + inter) : 0.0; }
};

// Splits the edges of R + M_variant into same-label and cross-label pairs.
// Each undirected pair counts once. labels[i] < 0 means missing.
EndorsementStats endorsement_stats(const UserGraph& R, const UserGraph& M_variant, std::span<const int> labels,
                                   EdgeMeasure measure = EdgeMeasure::weight);

// Edge-list text: first line "# " + JSON header, then "i j weight" for i < j.
void write_edge_list(std::ostream& out, const SparseMatrix& matrix, const nlohmann::json& header);

struct EdgeList {
  nlohmann::json header;
  SparseMatrix matrix;
};

// Reads what write_edge_list produced; the size comes from header["n"].
EdgeList read_edge_list(std::istream& in);

nlohmann::json graph_header(const UserGraph& g, std::span<const UserId> users);

}  // namespace polnmf
