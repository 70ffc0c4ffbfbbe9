#include "sodgp/subset.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "sodgp/rng.hpp"

namespace sodgp {

namespace {

int count_distinct_rows(const Tensor& x) {
  std::vector<int> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](int a, int b) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (x(a, c) != x(b, c)) return x(a, c) < x(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), row_less);
  int distinct = x.rows() > 0 ? 1 : 0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (row_less(order[i - 1], order[i])) ++distinct;
  }
  return distinct;
}

double sq_dist_to(const Tensor& x, Eigen::Index row, const Tensor& centers, Eigen::Index k) {
  return (x.row(row) - centers.row(k)).squaredNorm();
}

Tensor kmeanspp_seed(const Tensor& x, int m, Rng& rng) {
  const Eigen::Index n = x.rows();
  Tensor centers(m, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.row(0) = x.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist_to(x, i, centers, 0);
  for (int k = 1; k < m; ++k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> dist(d2.begin(), d2.end());
      chosen = dist(rng);
    } else {
      chosen = pick(rng);
    }
    centers.row(k) = x.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& d = d2[static_cast<std::size_t>(i)];
      d = std::min(d, sq_dist_to(x, i, centers, k));
    }
  }
  return centers;
}

}  // namespace

SubsetIndex SubsetIndex::from_selected(std::vector<int> selected, int n) {
  std::sort(selected.begin(), selected.end());
  selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  SubsetIndex out;
  out.s = std::move(selected);
  std::vector<char> in_s(static_cast<std::size_t>(n), 0);
  for (int i : out.s) {
    if (i < 0 || i >= n) throw InvalidSize("subset index " + std::to_string(i) + " out of range");
    in_s[static_cast<std::size_t>(i)] = 1;
  }
  for (int i = 0; i < n; ++i) {
    if (!in_s[static_cast<std::size_t>(i)]) out.sbar.push_back(i);
  }
  return out;
}

SubsetIndex kmeans_subset(const Tensor& x, int m, std::uint64_t seed, int max_iter) {
  const auto n = static_cast<int>(x.rows());
  if (m < 1 || m > n) {
    throw InvalidSize("kmeans_subset: subset size " + std::to_string(m) + " for " +
                      std::to_string(n) + " rows");
  }
  if (count_distinct_rows(x) < m) {
    throw DegenerateData("kmeans_subset: fewer than " + std::to_string(m) + " distinct rows");
  }

  Rng rng = make_stream(seed, Stream::Subset);
  Tensor centers = kmeanspp_seed(x, m, rng);

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < m; ++k) {
        const double d = sq_dist_to(x, i, centers, k);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    Tensor sums = Tensor::Zero(m, x.cols());
    std::vector<int> counts(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < n; ++i) {
      const int k = assign[static_cast<std::size_t>(i)];
      sums.row(k) += x.row(i);
      ++counts[static_cast<std::size_t>(k)];
    }
    for (int k = 0; k < m; ++k) {
      if (counts[static_cast<std::size_t>(k)] > 0) {
        centers.row(k) = sums.row(k) / counts[static_cast<std::size_t>(k)];
        continue;
      }
      // Empty cluster: move it to the row farthest from where it was.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = sq_dist_to(x, i, centers, k);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      centers.row(k) = x.row(far);
    }
  }

  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(m));
  auto duplicates_selected = [&](int i) {
    for (int j : selected) {
      if (x.row(i) == x.row(j)) return true;
    }
    return false;
  };
  for (int k = 0; k < m; ++k) {
    while (true) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (taken[static_cast<std::size_t>(i)]) continue;
        const double d = sq_dist_to(x, i, centers, k);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      // Guaranteed by the distinct-row check above.
      taken[static_cast<std::size_t>(best)] = 1;
      if (!duplicates_selected(best)) {
        selected.push_back(best);
        break;
      }
    }
  }
  return SubsetIndex::from_selected(std::move(selected), n);
}

SubsetIndex random_subset(int n, int m, std::uint64_t seed) {
  if (m < 0 || m > n) {
    throw InvalidSize("random_subset: subset size " + std::to_string(m) + " for " +
                      std::to_string(n) + " rows");
  }
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(m));
  Rng rng = make_stream(seed, Stream::Subset);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), m, rng);
  return SubsetIndex::from_selected(std::move(picked), n);
}

int default_subset_size(int n) { return n < 5000 ? 50 : 100; }

}  // namespace sodgp
