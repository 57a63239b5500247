#pragma once

#include <cstddef>
#include <vector>

namespace polnmf {

// User index -> community in [0, k).
struct Partition {
  std::vector<int> assignment;
  int k = 0;
  std::size_t zero_rows = 0;  // rows assigned by default because U was all zero

  std::size_t size() const { return assignment.size(); }
};

}  // namespace polnmf
