#pragma once

#include <cstdint>
#include <vector>

#include "sodgp/numerics.hpp"

namespace sodgp {

/// Partition of training indices into the conditioning subset S (sorted,
/// distinct) and its complement.
struct SubsetIndex {
  std::vector<int> s;
  std::vector<int> sbar;

  int size() const { return static_cast<int>(s.size()); }
  static SubsetIndex from_selected(std::vector<int> selected, int n);
};

/// Lloyd's K-means (k-means++ seeding, K = m) followed by picking, for each
/// centroid in turn, the nearest training row not yet taken.
SubsetIndex kmeans_subset(const Tensor& x, int m, std::uint64_t seed, int max_iter = 100);

/// Uniform sample of m of n indices without replacement.
SubsetIndex random_subset(int n, int m, std::uint64_t seed);

/// 50 below 5000 training rows, 100 otherwise.
int default_subset_size(int n);

}  // namespace sodgp
