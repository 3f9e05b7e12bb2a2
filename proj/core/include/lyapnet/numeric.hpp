#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <vector>

namespace lyapnet {

// Pairwise (cascade) summation. Error grows like O(log n) instead of O(n),
// so sums of non-negative per-sample terms are reproducible to ~1e-15
// relative regardless of sample ordering.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_mean(std::span<const double> v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

// Pairwise reduction of a list of vectors (e.g. per-block gradient partials).
// Reduction tree depends only on the number of blocks, never on threading.
inline Eigen::VectorXd pairwise_sum_vectors(std::vector<Eigen::VectorXd> blocks) {
  if (blocks.empty()) return Eigen::VectorXd();
  std::size_t n = blocks.size();
  while (n > 1) {
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i + half < n; ++i) blocks[i] += blocks[i + half];
    n = half;
  }
  return blocks[0];
}

}  // namespace lyapnet
