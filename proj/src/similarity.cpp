#include "polnmf/similarity.hpp"

#include <algorithm>
#include <cmath>

namespace polnmf {

std::string to_string(SimilarityKind kind) {
  return kind == SimilarityKind::cosine ? "cosine" : "cooccurrence";
}

SimilarityMatrix cosine_similarity(const FeatureMatrix& X) {
  const Eigen::Index m = X.cols();
  Eigen::VectorXd norm(m);
  for (Eigen::Index j = 0; j < m; ++j) norm(j) = X.col(j).norm();

  // Only pairs of columns with overlapping user support have a nonzero dot.
  SparseMatrix gram = (SparseMatrix(X.transpose()) * X).pruned();
  const bool prune = m > kDenseSimilarityLimit;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(gram.nonZeros()));
  for (Eigen::Index j = 0; j < gram.outerSize(); ++j) {
    for (SparseMatrix::InnerIterator it(gram, j); it; ++it) {
      const Eigen::Index i = it.row();
      if (i == j || norm(i) == 0 || norm(j) == 0) continue;
      const double c = std::min(1.0, it.value() / (norm(i) * norm(j)));
      if (c <= 0 || (prune && c < kSparseSimilarityCutoff)) continue;
      trips.emplace_back(static_cast<int>(i), static_cast<int>(j), c);
    }
  }
  SimilarityMatrix s{SparseMatrix(m, m), SimilarityKind::cosine};
  s.values.setFromTriplets(trips.begin(), trips.end());
  // Symmetrize exactly: the product may round (i,j) and (j,i) differently.
  SparseMatrix t = s.values.transpose();
  s.values = (s.values + t) * 0.5;
  s.values.makeCompressed();
  return s;
}

SimilarityMatrix hashtag_cooccurrence(const Corpus& corpus, bool binarize) {
  std::unordered_map<std::string, int> col;
  for (std::size_t j = 0; j < corpus.hashtag_vocab.size(); ++j) col.emplace(corpus.hashtag_vocab[j], static_cast<int>(j));
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<int> present;
  for (const auto& t : corpus.tweets) {
    present.clear();
    for (const auto& h : t.hashtags) {
      auto it = col.find(h);
      if (it != col.end()) present.push_back(it->second);
    }
    std::sort(present.begin(), present.end());
    present.erase(std::unique(present.begin(), present.end()), present.end());
    for (std::size_t a = 0; a < present.size(); ++a)
      for (std::size_t b = a + 1; b < present.size(); ++b) {
        trips.emplace_back(present[a], present[b], 1.0);
        trips.emplace_back(present[b], present[a], 1.0);
      }
  }
  const auto m = static_cast<Eigen::Index>(corpus.hashtag_vocab.size());
  SimilarityMatrix s{SparseMatrix(m, m), SimilarityKind::cooccurrence};
  s.values.setFromTriplets(trips.begin(), trips.end());
  if (binarize)
    for (Eigen::Index j = 0; j < s.values.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(s.values, j); it; ++it) it.valueRef() = 1.0;
  s.values.makeCompressed();
  return s;
}

}  // namespace polnmf
