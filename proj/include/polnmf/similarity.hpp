#pragma once

#include <string>

#include "polnmf/corpus.hpp"
#include "polnmf/graph.hpp"

namespace polnmf {

enum class SimilarityKind { cosine, cooccurrence };

// Symmetric nonnegative feature x feature matrix with a zero diagonal.
struct SimilarityMatrix {
  SparseMatrix values;
  SimilarityKind kind = SimilarityKind::cosine;

  Eigen::Index size() const { return values.rows(); }
};

std::string to_string(SimilarityKind kind);

// Vocabularies larger than this get small cosines pruned.
inline constexpr Eigen::Index kDenseSimilarityLimit = 15000;
inline constexpr double kSparseSimilarityCutoff = 1e-3;

// Cosine between feature columns of X. Zero columns are similar to nothing.
SimilarityMatrix cosine_similarity(const FeatureMatrix& X);

// Number of tweets holding both hashtags (each tweet counted once per pair).
// With `binarize`, any co-occurrence becomes 1.
SimilarityMatrix hashtag_cooccurrence(const Corpus& corpus, bool binarize = false);

inline LaplacianSplit laplacian_split(const SimilarityMatrix& s) { return laplacian_split(s.values); }

}  // namespace polnmf
