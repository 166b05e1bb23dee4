#include "objslam/topo_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "objslam/rng.hpp"

namespace objslam {

namespace {

constexpr double kPi = std::numbers::pi;

double fold_line(double angle) {
  double a = std::fmod(angle, kPi);
  if (a < 0) a += kPi;
  return a;
}

// Angle in [0, pi/2] between the horizontal direction from `from` to `to` and
// `from`'s yaw line; 0 when the two centroids share a vertical axis.
double yaw_line_alpha(const TopoNode& from, const TopoNode& to) {
  double dx = to.t.x() - from.t.x();
  double dy = to.t.y() - from.t.y();
  if (std::hypot(dx, dy) < 1e-12) return 0.0;
  return line_angle_diff(fold_line(std::atan2(dy, dx)), fold_line(from.theta));
}

}  // namespace

int TopoGraph::node_index(std::int64_t id) const {
  for (int i = 0; i < int(nodes.size()); ++i)
    if (nodes[i].id == id) return i;
  return -1;
}

TopoGraph build_topo_map(std::vector<TopoNode> nodes, int k_nn, double d_max) {
  TopoGraph g;
  std::sort(nodes.begin(), nodes.end(),
            [](const TopoNode& a, const TopoNode& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i].id == nodes[i - 1].id)
      throw std::invalid_argument("build_topo_map: duplicate node id");
  g.nodes = std::move(nodes);

  const int n = int(g.nodes.size());
  std::set<std::pair<int, int>> picked;
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> near;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = (g.nodes[i].t - g.nodes[j].t).norm();
      if (d > d_max || d < 1e-12) continue;
      near.emplace_back(d, j);
    }
    std::sort(near.begin(), near.end());
    for (int k = 0; k < std::min<int>(k_nn, int(near.size())); ++k) {
      int j = near[k].second;
      picked.emplace(std::min(i, j), std::max(i, j));
    }
  }

  g.adjacency.resize(n);
  for (const auto& [i, j] : picked) {
    TopoEdge e;
    e.u = g.nodes[i].id;
    e.v = g.nodes[j].id;
    e.d = (g.nodes[i].t - g.nodes[j].t).norm();
    e.alpha = yaw_line_alpha(g.nodes[i], g.nodes[j]);
    g.edges.push_back(e);
    g.adjacency[i].push_back(j);
    g.adjacency[j].push_back(i);
  }
  for (auto& adj : g.adjacency) std::sort(adj.begin(), adj.end());
  return g;
}

Descriptor random_walk_descriptor(const TopoGraph& graph, std::int64_t origin, int depth,
                                  int walks, std::uint64_t seed) {
  int oi = graph.node_index(origin);
  if (oi < 0) throw std::invalid_argument("random_walk_descriptor: origin not in graph");
  Descriptor desc;
  desc.origin = origin;
  desc.rows.resize(std::max(walks, 0));

  auto eng = make_engine(seed, std::uint64_t(origin));
  std::vector<char> visited(graph.nodes.size());
  std::vector<int> options;
  const TopoNode& base = graph.nodes[oi];

  for (auto& row : desc.rows) {
    std::fill(visited.begin(), visited.end(), 0);
    visited[oi] = 1;
    int cur = oi;
    for (int step = 0; step < depth; ++step) {
      options.clear();
      for (int nb : graph.adjacency[cur])
        if (!visited[nb]) options.push_back(nb);
      if (options.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, options.size() - 1);
      cur = options[pick(eng)];
      visited[cur] = 1;
      const TopoNode& node = graph.nodes[cur];
      row.push_back(WalkEntry{node.label, node.volume(), (node.t - base.t).norm(),
                              yaw_line_alpha(base, node)});
    }
  }
  return desc;
}

double descriptor_similarity(const Descriptor& a, const Descriptor& b, double rho,
                             const MatchConfig& cfg, SimilarityTerms terms) {
  if (!(rho > 0)) throw std::invalid_argument("descriptor_similarity: rho must be positive");
  if (a.rows.empty() || b.rows.empty()) return 0.0;

  const double sqrt_rho = std::sqrt(rho);
  const double rho3 = rho * rho * rho;
  double total = 0;
  for (const auto& ra : a.rows) {
    for (const auto& rb : b.rows) {
      std::size_t len = std::min(ra.size(), rb.size());
      double row = 0;
      for (std::size_t k = 0; k < len; ++k) {
        const WalkEntry& ea = ra[k];
        const WalkEntry& eb = rb[k];
        if (ea.label != eb.label) continue;
        double score = std::exp(-std::abs(ea.alpha - eb.alpha) / cfg.sigma_alpha);
        if (terms == SimilarityTerms::All) {
          score *= std::exp(-std::abs(rho * ea.d - eb.d) / (cfg.sigma_d * sqrt_rho));
          score *= std::exp(-std::abs(std::log(rho3 * ea.volume / eb.volume)) / cfg.sigma_s);
        }
        row += score;
      }
      total += row / double(std::max({ra.size(), rb.size(), std::size_t(1)}));
    }
  }
  return total / double(a.rows.size() * b.rows.size());
}

std::optional<MapTransform> solve_yaw_similarity(
    std::span<const std::pair<Eigen::Vector3d, Eigen::Vector3d>> pairs) {
  if (pairs.size() < 2) return std::nullopt;
  Eigen::Vector3d xbar = Eigen::Vector3d::Zero(), ybar = Eigen::Vector3d::Zero();
  for (const auto& [x, y] : pairs) {
    xbar += x;
    ybar += y;
  }
  xbar /= double(pairs.size());
  ybar /= double(pairs.size());

  Eigen::Matrix2d M = Eigen::Matrix2d::Zero();
  double den = 0;
  for (const auto& [x, y] : pairs) {
    Eigen::Vector3d xt = x - xbar, yt = y - ybar;
    M += yt.head<2>() * xt.head<2>().transpose();
    den += xt.squaredNorm();
  }
  double spread2d = 0;
  for (const auto& [x, y] : pairs) spread2d += (x - xbar).head<2>().squaredNorm();
  if (spread2d < 1e-18 || den < 1e-18) return std::nullopt;

  Eigen::JacobiSVD<Eigen::Matrix2d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix2d U = svd.matrixU(), V = svd.matrixV();
  Eigen::Matrix2d S = Eigen::Matrix2d::Identity();
  if ((U * V.transpose()).determinant() < 0) S(1, 1) = -1;
  Eigen::Matrix2d R2 = U * S * V.transpose();
  double yaw = std::atan2(R2(1, 0), R2(0, 0));

  Eigen::Matrix3d R3 = yaw_rotation(yaw);
  double num = 0;
  for (const auto& [x, y] : pairs) num += (y - ybar).dot(R3 * (x - xbar));
  double s = num / den;
  if (!(s > 1e-12)) return std::nullopt;

  MapTransform tf;
  tf.s = s;
  tf.yaw = yaw;
  tf.t = ybar - s * (R3 * xbar);
  return tf;
}

namespace {

struct ScoredPair {
  double score;
  int i, j;  // node indices into g1, g2
};

std::vector<std::pair<int, int>> greedy_assign(std::vector<ScoredPair> cands) {
  std::sort(cands.begin(), cands.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  std::set<int> used1, used2;
  std::vector<std::pair<int, int>> out;
  for (const auto& c : cands) {
    if (used1.count(c.i) || used2.count(c.j)) continue;
    used1.insert(c.i);
    used2.insert(c.j);
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

MatchResult match_maps(const TopoGraph& g1, const TopoGraph& g2, const MatchConfig& cfg) {
  MatchResult out;
  if (g1.nodes.empty() || g2.nodes.empty()) return out;

  std::vector<Descriptor> d1, d2;
  d1.reserve(g1.nodes.size());
  d2.reserve(g2.nodes.size());
  for (const auto& n : g1.nodes)
    d1.push_back(random_walk_descriptor(g1, n.id, cfg.walk_depth, cfg.walks,
                                        mix_seed(cfg.seed, 1)));
  for (const auto& n : g2.nodes)
    d2.push_back(random_walk_descriptor(g2, n.id, cfg.walk_depth, cfg.walks,
                                        mix_seed(cfg.seed, 2)));

  auto candidates = [&](double rho, SimilarityTerms terms) {
    std::vector<ScoredPair> cands;
    for (int i = 0; i < int(g1.nodes.size()); ++i) {
      for (int j = 0; j < int(g2.nodes.size()); ++j) {
        if (g1.nodes[i].label != g2.nodes[j].label) continue;
        double s = descriptor_similarity(d1[i], d2[j], rho, cfg, terms);
        if (s > 0) cands.push_back(ScoredPair{s, i, j});
      }
    }
    return cands;
  };

  // scale-free first pass, then rho from matched-pair distance ratios
  auto pairs0 = greedy_assign(candidates(1.0, SimilarityTerms::LabelAngle));
  double rho = 1;
  {
    double sum = 0;
    int count = 0;
    for (std::size_t p = 0; p < pairs0.size(); ++p) {
      for (std::size_t q = p + 1; q < pairs0.size(); ++q) {
        double da = (g1.nodes[pairs0[p].first].t - g1.nodes[pairs0[q].first].t).norm();
        double db = (g2.nodes[pairs0[p].second].t - g2.nodes[pairs0[q].second].t).norm();
        if (da < 1e-9 || db < 1e-9) continue;
        sum += db / da;
        ++count;
      }
    }
    if (count > 0) rho = sum / count;
  }

  auto matched = greedy_assign(candidates(rho, SimilarityTerms::All));
  out.rho = rho;
  for (const auto& [i, j] : matched) out.pairs.emplace_back(g1.nodes[i].id, g2.nodes[j].id);
  if (matched.size() < 3) return out;

  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> corr;
  corr.reserve(matched.size());
  for (const auto& [i, j] : matched) corr.emplace_back(g1.nodes[i].t, g2.nodes[j].t);

  const double eps = cfg.inlier_scale * rho;
  out.inlier_eps = eps;
  auto eng = make_engine(cfg.seed, 3);
  std::uniform_int_distribution<std::size_t> pick(0, corr.size() - 1);

  std::vector<std::size_t> best;
  double best_resid = std::numeric_limits<double>::infinity();
  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> sample(3);
  for (int iter = 0; iter < cfg.ransac_iters; ++iter) {
    std::size_t a = pick(eng), b = pick(eng), c = pick(eng);
    if (a == b || b == c || a == c) continue;
    sample[0] = corr[a];
    sample[1] = corr[b];
    sample[2] = corr[c];
    auto tf = solve_yaw_similarity(sample);
    if (!tf) continue;
    std::vector<std::size_t> inl;
    double resid = 0;
    for (std::size_t k = 0; k < corr.size(); ++k) {
      double err = (corr[k].second - tf->apply(corr[k].first)).norm();
      if (err <= eps) {
        inl.push_back(k);
        resid += err;
      }
    }
    if (inl.empty()) continue;
    resid /= double(inl.size());
    if (inl.size() > best.size() || (inl.size() == best.size() && resid < best_resid)) {
      best = std::move(inl);
      best_resid = resid;
    }
  }
  if (best.size() < 3) return out;

  std::vector<std::pair<Eigen::Vector3d, Eigen::Vector3d>> inlier_corr;
  for (std::size_t k : best) inlier_corr.push_back(corr[k]);
  auto final_tf = solve_yaw_similarity(inlier_corr);
  if (!final_tf) return out;

  out.transform = *final_tf;
  out.rho = final_tf->s;
  double resid = 0;
  for (std::size_t k : best) {
    out.inliers.push_back(out.pairs[k]);
    resid += (corr[k].second - final_tf->apply(corr[k].first)).norm();
  }
  out.residual = resid / double(best.size());
  return out;
}

std::optional<RelocResult> relocalize(const TopoGraph& prior, std::vector<TopoNode> query,
                                      const MatchConfig& cfg) {
  TopoGraph qg = build_topo_map(std::move(query), cfg.k_nn, cfg.d_max);
  MatchResult mr = match_maps(qg, prior, cfg);
  if (!mr.transform) return std::nullopt;
  return RelocResult{*mr.transform, std::move(mr)};
}

}  // namespace objslam
