#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

namespace objslam {

// Isolation tree over 3D points, flat node arena. dim < 0 marks an external
// node of `size` points; internal nodes route x[dim] < split to left.
struct ITreeNode {
  int dim = -1;
  double split = 0;
  int left = -1, right = -1;
  int size = 0;
};

struct ITree {
  std::vector<ITreeNode> nodes;
};

struct IsolationForest {
  std::vector<ITree> trees;
  int psi = 0;
  int height_cap = 0;  // ceil(log2 psi)
  double c_psi = 0;    // normalization C = c(psi)
};

// Average unsuccessful BST search length: c(n) = 2H(n-1) - 2(n-1)/n, H(i) = ln i + gamma.
double average_path_length(int n);

// t_trees trees, each on a uniform-without-replacement subsample of size psi.
// Splits pick a uniform dimension and a uniform value in its current range; a
// zero-range dimension is redrawn up to 3 times before the node becomes a leaf.
IsolationForest build_forest(std::span<const Eigen::Vector3d> points, int t_trees, int psi,
                             std::uint64_t seed);

double path_length(const ITree& tree, const Eigen::Vector3d& x);

// 2^(-E(h)/C) with E(h) the mean path length over trees.
double anomaly_score(const IsolationForest& forest, const Eigen::Vector3d& x);

// Keeps points scoring <= threshold, but never fewer than min_keep (the
// lowest-scoring points are retained when the threshold would cut deeper).
std::vector<Eigen::Vector3d> filter_outliers(std::span<const Eigen::Vector3d> points,
                                             const IsolationForest& forest,
                                             double threshold = 0.6, std::size_t min_keep = 4);

}  // namespace objslam
