#include "objslam/isolation_forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "objslam/rng.hpp"

namespace objslam {

namespace {

constexpr double kEulerMascheroni = 0.5772156649;

int build_tree(ITree& tree, std::vector<Eigen::Vector3d>& pts, int lo, int hi, int height,
               int height_cap, std::mt19937_64& rng) {
  int n = hi - lo;
  int node_index = int(tree.nodes.size());
  tree.nodes.emplace_back();
  if (height >= height_cap || n <= 1) {
    tree.nodes[node_index].size = n;
    return node_index;
  }
  int dim = -1;
  double lo_v = 0, hi_v = 0;
  std::uniform_int_distribution<int> pick_dim(0, 2);
  for (int attempt = 0; attempt < 3; ++attempt) {
    int d = pick_dim(rng);
    double mn = pts[lo][d], mx = pts[lo][d];
    for (int i = lo + 1; i < hi; ++i) {
      mn = std::min(mn, pts[i][d]);
      mx = std::max(mx, pts[i][d]);
    }
    if (mx > mn) {
      dim = d;
      lo_v = mn;
      hi_v = mx;
      break;
    }
  }
  if (dim < 0) {  // constant in every sampled dimension
    tree.nodes[node_index].size = n;
    return node_index;
  }
  std::uniform_real_distribution<double> pick_split(lo_v, hi_v);
  double split = pick_split(rng);
  auto mid_it = std::partition(pts.begin() + lo, pts.begin() + hi,
                               [&](const Eigen::Vector3d& p) { return p[dim] < split; });
  int mid = int(mid_it - pts.begin());
  if (mid == lo || mid == hi) {  // numerically degenerate split
    tree.nodes[node_index].size = n;
    return node_index;
  }
  int left = build_tree(tree, pts, lo, mid, height + 1, height_cap, rng);
  int right = build_tree(tree, pts, mid, hi, height + 1, height_cap, rng);
  ITreeNode& node = tree.nodes[node_index];
  node.dim = dim;
  node.split = split;
  node.left = left;
  node.right = right;
  node.size = n;
  return node_index;
}

}  // namespace

double average_path_length(int n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  double h = std::log(double(n - 1)) + kEulerMascheroni;
  return 2.0 * h - 2.0 * double(n - 1) / double(n);
}

IsolationForest build_forest(std::span<const Eigen::Vector3d> points, int t_trees, int psi,
                             std::uint64_t seed) {
  if (points.size() < 10) throw std::invalid_argument("build_forest: fewer than 10 points");
  if (psi < 2 || std::size_t(psi) > points.size())
    throw std::invalid_argument("build_forest: psi out of range");
  if (t_trees < 1) throw std::invalid_argument("build_forest: need at least one tree");

  IsolationForest forest;
  forest.psi = psi;
  forest.height_cap = int(std::ceil(std::log2(double(psi))));
  forest.c_psi = average_path_length(psi);
  forest.trees.resize(t_trees);

  std::vector<int> indices(points.size());
  std::iota(indices.begin(), indices.end(), 0);

  for (int t = 0; t < t_trees; ++t) {
    std::mt19937_64 rng = make_engine(seed, std::uint64_t(t));
    // partial Fisher-Yates: first psi entries become the subsample
    for (int i = 0; i < psi; ++i) {
      std::uniform_int_distribution<int> pick(i, int(indices.size()) - 1);
      std::swap(indices[i], indices[pick(rng)]);
    }
    std::vector<Eigen::Vector3d> sub(psi);
    for (int i = 0; i < psi; ++i) sub[i] = points[indices[i]];
    forest.trees[t].nodes.reserve(2 * psi);
    build_tree(forest.trees[t], sub, 0, psi, 0, forest.height_cap, rng);
  }
  return forest;
}

double path_length(const ITree& tree, const Eigen::Vector3d& x) {
  int idx = 0;
  int depth = 0;
  while (tree.nodes[idx].dim >= 0) {
    const ITreeNode& n = tree.nodes[idx];
    idx = x[n.dim] < n.split ? n.left : n.right;
    ++depth;
  }
  return double(depth) + average_path_length(tree.nodes[idx].size);
}

double anomaly_score(const IsolationForest& forest, const Eigen::Vector3d& x) {
  if (forest.trees.empty()) throw std::invalid_argument("anomaly_score: empty forest");
  double sum = 0;
  for (const ITree& t : forest.trees) sum += path_length(t, x);
  double eh = sum / double(forest.trees.size());
  return std::pow(2.0, -eh / forest.c_psi);
}

std::vector<Eigen::Vector3d> filter_outliers(std::span<const Eigen::Vector3d> points,
                                             const IsolationForest& forest, double threshold,
                                             std::size_t min_keep) {
  std::vector<double> scores(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) scores[i] = anomaly_score(forest, points[i]);
  std::vector<Eigen::Vector3d> kept;
  kept.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    if (scores[i] <= threshold) kept.push_back(points[i]);
  if (kept.size() >= min_keep || points.size() <= min_keep) {
    if (points.size() <= min_keep && kept.size() < points.size()) {
      return {points.begin(), points.end()};
    }
    return kept;
  }
  // threshold cut too deep: retain the min_keep lowest scores (stable on ties)
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  kept.clear();
  for (std::size_t i = 0; i < min_keep && i < order.size(); ++i)
    kept.push_back(points[order[i]]);
  return kept;
}

}  // namespace objslam
