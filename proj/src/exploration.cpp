#include "objslam/exploration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "objslam/rng.hpp"
#include "objslam/stats.hpp"

namespace objslam {

namespace {

Eigen::Vector3d camera_center(const Pose& T_cw) { return -T_cw.R.transpose() * T_cw.t; }

std::uint64_t pose_hash(const Pose& T) {
  double raw[12];
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) raw[3 * r + c] = T.R(r, c);
  for (int k = 0; k < 3; ++k) raw[9 + k] = T.t[k];
  return fnv1a64(raw, sizeof(raw));
}

double view_radius(const SimScene& scene) {
  double r = 2.2 * std::max(scene.table.half_x, scene.table.half_y);
  return std::clamp(r, 0.8, 3.0);
}

bool in_image(const Eigen::Vector2d& px, const CameraIntrinsics& K) {
  return px.x() >= 0 && px.x() <= K.width && px.y() >= 0 && px.y() <= K.height;
}

// Ray cam->target parameterized on [0,1]; true when the box blocks it strictly
// before the target.
bool ray_blocked_by(const Eigen::Vector3d& cam, const Eigen::Vector3d& target,
                    const GtObject& obj) {
  Eigen::Matrix3d Rt = yaw_rotation(obj.theta).transpose();
  Eigen::Vector3d o = Rt * (cam - obj.t);
  Eigen::Vector3d d = Rt * (target - cam);
  double t0 = 0.0, t1 = 1.0 - 1e-6;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a]) > obj.s[a]) return false;
      continue;
    }
    double lo = (-obj.s[a] - o[a]) / d[a];
    double hi = (obj.s[a] - o[a]) / d[a];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return false;
  }
  return t0 > 1e-9;  // entry strictly after the camera, before the target
}

// Liang-Barsky clip of [a,b] to the image rectangle.
bool clip_to_image(Eigen::Vector2d& a, Eigen::Vector2d& b, const CameraIntrinsics& K) {
  double t0 = 0.0, t1 = 1.0;
  Eigen::Vector2d d = b - a;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x(), K.width - a.x(), a.y(), K.height - a.y()};
  for (int k = 0; k < 4; ++k) {
    if (std::abs(p[k]) < 1e-12) {
      if (q[k] < 0) return false;
      continue;
    }
    double t = q[k] / p[k];
    if (p[k] < 0) {
      if (t > t1) return false;
      t0 = std::max(t0, t);
    } else {
      if (t < t0) return false;
      t1 = std::min(t1, t);
    }
  }
  Eigen::Vector2d a0 = a;
  a = a0 + t0 * d;
  b = a0 + t1 * d;
  return true;
}

struct FaceDef {
  int axis;
  int sign;
};
constexpr FaceDef kFaces[5] = {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}};

void face_axes(int axis, int& ua, int& va) {
  ua = axis == 0 ? 1 : 0;
  va = axis == 2 ? 1 : 2;
}

std::optional<BBox2D> project_model_bbox(const ObjectEstimate& est, const CameraIntrinsics& K,
                                         const Pose& T_cw) {
  auto verts = cube_vertices(est.cube());
  auto box = project_bbox(verts, K, T_cw);
  if (!box || !box->valid()) return std::nullopt;
  // clamping pins an out-of-frustum object to a zero-area edge sliver; treat
  // that as not visible or the utility would reward views that miss it
  if (box->xmax - box->xmin <= 0 || box->ymax - box->ymin <= 0) return std::nullopt;
  return box;
}

double plogp_bits(double p) {
  if (p <= 0.0) return 0.0;
  return -p * std::log2(p);
}

}  // namespace

Pose look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  Eigen::Vector3d z = target - eye;
  if (z.norm() < 1e-12) throw std::invalid_argument("look_at_pose: eye equals target");
  z.normalize();
  Eigen::Vector3d up = std::abs(z.z()) > 0.99 ? Eigen::Vector3d(1, 0, 0) : Eigen::Vector3d(0, 0, 1);
  Eigen::Vector3d x = z.cross(up).normalized();
  Eigen::Vector3d y = z.cross(x);
  Eigen::Matrix3d R_wc;
  R_wc.col(0) = x;
  R_wc.col(1) = y;
  R_wc.col(2) = z;
  Pose T;
  T.R = R_wc.transpose();
  T.t = -R_wc.transpose() * eye;
  return T;
}

std::vector<CandidateView> candidate_views(const SimScene& scene) {
  std::vector<CandidateView> views;
  const Table& tb = scene.table;
  Eigen::Vector3d center(tb.cx, tb.cy, tb.z);
  double r = view_radius(scene);
  const double elevations[2] = {35.0 * M_PI / 180.0, 60.0 * M_PI / 180.0};
  int idx = 0;
  for (double el : elevations)
    for (int k = 0; k < 16; ++k) {
      double az = 2.0 * M_PI * k / 16.0;
      Eigen::Vector3d eye = center + r * Eigen::Vector3d(std::cos(az) * std::cos(el),
                                                         std::sin(az) * std::cos(el), std::sin(el));
      views.push_back({look_at_pose(eye, center), eye, idx++});
    }
  const double sx[4] = {-1, 1, 1, -1};
  const double sy[4] = {-1, -1, 1, 1};
  for (int k = 0; k < 4; ++k) {
    // over the corner, aimed at the table center: an oblique top view that
    // keeps the whole table in frame and shows two side faces per object
    Eigen::Vector3d corner(tb.cx + sx[k] * tb.half_x, tb.cy + sy[k] * tb.half_y, tb.z);
    Eigen::Vector3d eye = corner + Eigen::Vector3d(0, 0, r);
    views.push_back({look_at_pose(eye, center), eye, idx++});
  }
  return views;
}

std::vector<CandidateView> init_views(const SimScene& scene) {
  auto all = candidate_views(scene);
  return {all.begin() + 32, all.end()};
}

std::vector<CandidateView> coverage_views(const SimScene& scene, int stops) {
  if (stops < 1) throw std::invalid_argument("coverage_views: stops must be positive");
  const Table& tb = scene.table;
  double height = tb.z + 0.8 * view_radius(scene);
  int cols = (stops + 1) / 2;
  std::vector<CandidateView> views;
  int idx = 0;
  for (int row = 0; row < 2 && idx < stops; ++row) {
    double y = tb.cy + (row == 0 ? -0.5 : 0.5) * tb.half_y;
    for (int c = 0; c < cols && idx < stops; ++c) {
      int cc = row == 0 ? c : cols - 1 - c;  // boustrophedon: reverse on the return row
      double x = cols == 1 ? tb.cx : tb.cx + (-0.7 + 1.4 * cc / double(cols - 1)) * tb.half_x;
      Eigen::Vector3d eye(x, y, height);
      views.push_back({look_at_pose(eye, Eigen::Vector3d(x, y, tb.z)), eye, idx++});
    }
  }
  return views;
}

Frame simulate_observation(const SimScene& scene, const CandidateView& view,
                           std::int64_t frame_id) {
  Frame frame;
  frame.frame_id = frame_id;
  frame.timestamp = 0.1 * static_cast<double>(frame_id);
  frame.T_cw = view.T_cw;
  const CameraIntrinsics& K = frame.K;

  auto eng = std::mt19937_64(mix_seed(scene.seed, pose_hash(view.T_cw)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector3d cam = camera_center(view.T_cw);

  for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
    const GtObject& obj = scene.objects[oi];
    auto verts = cube_vertices(obj.box());

    const Eigen::Vector3d samples[5] = {obj.t, verts[0], verts[3], verts[5], verts[6]};
    bool visible = false;
    for (const auto& sp : samples) {
      auto px = project_point(sp, K, view.T_cw);
      if (!px || !in_image(*px, K)) continue;
      bool blocked = false;
      for (std::size_t oj = 0; oj < scene.objects.size() && !blocked; ++oj)
        if (oj != oi && ray_blocked_by(cam, sp, scene.objects[oj])) blocked = true;
      if (!blocked) {
        visible = true;
        break;
      }
    }
    if (!visible) continue;

    auto box = project_bbox(verts, K, view.T_cw);
    if (!box || !box->valid()) continue;
    BBox2D bbox = *box;
    if (scene.noise_px > 0) {
      bbox.xmin += scene.noise_px * gauss(eng);
      bbox.ymin += scene.noise_px * gauss(eng);
      bbox.xmax += scene.noise_px * gauss(eng);
      bbox.ymax += scene.noise_px * gauss(eng);
      if (bbox.xmin > bbox.xmax) std::swap(bbox.xmin, bbox.xmax);
      if (bbox.ymin > bbox.ymax) std::swap(bbox.ymin, bbox.ymax);
      bbox = bbox.clamped(K);
      if (!bbox.valid()) continue;
    }
    frame.detections.push_back({obj.label, bbox, 1.0});

    Eigen::Matrix3d R = yaw_rotation(obj.theta);
    auto emit_point = [&](const Eigen::Vector3d& local) {
      Eigen::Vector3d w = obj.t + R * local;
      if (scene.noise_depth > 0)
        w += scene.noise_depth * Eigen::Vector3d(gauss(eng), gauss(eng), gauss(eng));
      auto px = project_point(w, K, view.T_cw);
      if (px && in_image(*px, K)) frame.points.push_back({px->x(), px->y(), w});
    };

    bool face_visible[6] = {};  // +x,-x,+y,-y,+z,-z in kFaces order plus bottom
    for (int fi = 0; fi < 5; ++fi) {
      const FaceDef& fd = kFaces[fi];
      Eigen::Vector3d n = R.col(fd.axis) * fd.sign;
      Eigen::Vector3d fc = obj.t + R.col(fd.axis) * (fd.sign * obj.s[fd.axis]);
      face_visible[fi] = n.dot(cam - fc) > 0;
    }

    if (obj.kind == ModelKind::Cube) {
      for (int fi = 0; fi < 5; ++fi) {
        if (!face_visible[fi]) continue;
        const FaceDef& fd = kFaces[fi];
        int ua, va;
        face_axes(fd.axis, ua, va);
        double area_cm2 = (2 * obj.s[ua] * 100.0) * (2 * obj.s[va] * 100.0);
        int n_pts = static_cast<int>(std::llround(area_cm2 * obj.texture));
        n_pts = std::min(n_pts, 5000);
        for (int k = 0; k < n_pts; ++k) {
          Eigen::Vector3d local;
          local[fd.axis] = fd.sign * obj.s[fd.axis];
          local[ua] = (2 * unit(eng) - 1) * obj.s[ua];
          local[va] = (2 * unit(eng) - 1) * obj.s[va];
          emit_point(local);
        }
      }
    } else {
      double r = obj.s.x(), hh = obj.s.z();
      int n_lat = static_cast<int>(std::llround(2 * M_PI * r * 2 * hh * 1e4 * obj.texture));
      n_lat = std::min(2 * n_lat, 10000);  // half the draws fail the facing test
      for (int k = 0; k < n_lat; ++k) {
        double phi = 2 * M_PI * unit(eng);
        double z = (2 * unit(eng) - 1) * hh;
        Eigen::Vector3d local(r * std::cos(phi), r * std::sin(phi), z);
        Eigen::Vector3d n = R * Eigen::Vector3d(std::cos(phi), std::sin(phi), 0);
        if (n.dot(cam - (obj.t + R * local)) > 0) emit_point(local);
      }
      if (face_visible[4]) {
        int n_top = static_cast<int>(std::llround(M_PI * r * r * 1e4 * obj.texture));
        n_top = std::min(n_top, 5000);
        for (int k = 0; k < n_top; ++k) {
          double rho = r * std::sqrt(unit(eng));
          double phi = 2 * M_PI * unit(eng);
          emit_point({rho * std::cos(phi), rho * std::sin(phi), hh});
        }
      }
    }

    if (obj.kind == ModelKind::Cube) {
      for (const auto& e : cube_edges()) {
        int diff = e[0] ^ e[1];
        bool emit = false;
        for (int axis = 0; axis < 3 && !emit; ++axis) {
          if (diff & (1 << axis)) continue;  // the edge runs along this axis
          int sign = (e[0] >> axis) & 1 ? 1 : -1;
          for (int fi = 0; fi < 5; ++fi)
            if (kFaces[fi].axis == axis && kFaces[fi].sign == sign && face_visible[fi]) {
              emit = true;
              break;
            }
        }
        if (!emit) continue;
        auto pa = project_point(verts[e[0]], K, view.T_cw);
        auto pb = project_point(verts[e[1]], K, view.T_cw);
        if (!pa || !pb) continue;
        Eigen::Vector2d a = *pa, b = *pb;
        if (!clip_to_image(a, b, K)) continue;
        if ((b - a).norm() < 8.0) continue;
        if (scene.noise_seg_deg > 0) {
          double ang = gauss(eng) * scene.noise_seg_deg * M_PI / 180.0;
          Eigen::Vector2d m = 0.5 * (a + b);
          double ca = std::cos(ang), sa = std::sin(ang);
          auto rot = [&](const Eigen::Vector2d& p) {
            Eigen::Vector2d d = p - m;
            return Eigen::Vector2d(m.x() + ca * d.x() - sa * d.y(),
                                   m.y() + sa * d.x() + ca * d.y());
          };
          a = rot(a);
          b = rot(b);
        }
        frame.segments.push_back({a, b});
      }
    }
  }
  return frame;
}

std::vector<Frame> generate_sequence(const SimScene& scene, int n_frames, double dropout) {
  if (n_frames < 0) throw std::invalid_argument("generate_sequence: negative frame count");
  if (dropout < 0 || dropout >= 1)
    throw std::invalid_argument("generate_sequence: dropout must be in [0,1)");
  Eigen::Vector3d center(scene.table.cx, scene.table.cy, scene.table.z);
  double r = view_radius(scene);
  auto drop_eng = make_engine(scene.seed, 401);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Frame> frames;
  frames.reserve(n_frames);
  for (int k = 0; k < n_frames; ++k) {
    double az = 2.0 * M_PI * k / std::max(n_frames, 1);
    // one smooth orbit with a gentle elevation swell, video-like between frames
    double el = (42.5 - 7.5 * std::cos(4.0 * M_PI * k / std::max(n_frames, 1))) * M_PI / 180.0;
    Eigen::Vector3d eye =
        center + r * Eigen::Vector3d(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el),
                                     std::sin(el));
    CandidateView view{look_at_pose(eye, center), eye, k};
    Frame f = simulate_observation(scene, view, k);
    if (dropout > 0) {
      std::vector<Detection> kept;
      for (auto& d : f.detections)
        if (unit(drop_eng) >= dropout) kept.push_back(std::move(d));
      f.detections = std::move(kept);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::size_t SurfaceGrid::total() const {
  std::size_t n = 0;
  for (const auto& f : faces) n += f.cells.size();
  return n;
}

std::size_t SurfaceGrid::count(CellState s) const {
  std::size_t n = 0;
  for (const auto& f : faces)
    n += static_cast<std::size_t>(std::count(f.cells.begin(), f.cells.end(), s));
  return n;
}

SurfaceGrid make_surface_grid(const ObjectEstimate& estimate, double cell) {
  if (cell <= 0) throw std::invalid_argument("make_surface_grid: cell size must be positive");
  SurfaceGrid g;
  g.anchor = estimate.cube();
  g.cell = cell;
  for (int fi = 0; fi < 5; ++fi) {
    FaceGrid& f = g.faces[fi];
    f.axis = kFaces[fi].axis;
    f.sign = kFaces[fi].sign;
    int ua, va;
    face_axes(f.axis, ua, va);
    f.nu = std::max(1, static_cast<int>(std::ceil(2 * g.anchor.s[ua] / cell - 1e-9)));
    f.nv = std::max(1, static_cast<int>(std::ceil(2 * g.anchor.s[va] / cell - 1e-9)));
    f.cells.assign(static_cast<std::size_t>(f.nu) * f.nv, CellState::Unknown);
  }
  return g;
}

void update_grid(SurfaceGrid& grid, std::span<const Eigen::Vector3d> points,
                 const CameraIntrinsics& K, const Pose& T_cw) {
  const CubeModel& a = grid.anchor;
  Eigen::Matrix3d R = yaw_rotation(a.theta);
  Eigen::Matrix3d Rt = R.transpose();

  for (const auto& p : points) {
    Eigen::Vector3d q = Rt * (p - a.t);
    bool inside = true;
    for (int k = 0; k < 3; ++k)
      if (std::abs(q[k]) > 1.5 * a.s[k]) inside = false;
    if (!inside) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int fi = 0; fi < 5; ++fi) {
      double d = std::abs(q[kFaces[fi].axis] - kFaces[fi].sign * a.s[kFaces[fi].axis]);
      if (d < best_d) {
        best_d = d;
        best = fi;
      }
    }
    FaceGrid& f = grid.faces[best];
    int ua, va;
    face_axes(f.axis, ua, va);
    double pu = 2 * a.s[ua] / f.nu, pv = 2 * a.s[va] / f.nv;
    int i = std::clamp(static_cast<int>(std::floor((q[ua] + a.s[ua]) / pu)), 0, f.nu - 1);
    int j = std::clamp(static_cast<int>(std::floor((q[va] + a.s[va]) / pv)), 0, f.nv - 1);
    f.cells[static_cast<std::size_t>(j) * f.nu + i] = CellState::Occupied;
  }

  Eigen::Vector3d cam = camera_center(T_cw);
  for (auto& f : grid.faces) {
    int ua, va;
    face_axes(f.axis, ua, va);
    Eigen::Vector3d n = R.col(f.axis) * f.sign;
    double pu = 2 * a.s[ua] / f.nu, pv = 2 * a.s[va] / f.nv;
    for (int j = 0; j < f.nv; ++j)
      for (int i = 0; i < f.nu; ++i) {
        CellState& cs = f.cells[static_cast<std::size_t>(j) * f.nu + i];
        if (cs == CellState::Occupied) continue;
        Eigen::Vector3d local;
        local[f.axis] = f.sign * a.s[f.axis];
        local[ua] = -a.s[ua] + (i + 0.5) * pu;
        local[va] = -a.s[va] + (j + 0.5) * pv;
        Eigen::Vector3d center = a.t + R * local;
        if (n.dot(cam - center) <= 0) continue;
        auto px = project_point(center, K, T_cw);
        if (!px || !in_image(*px, K)) continue;
        cs = CellState::Free;
      }
  }
}

double grid_entropy(double p) {
  if (!std::isfinite(p) || p < 0 || p > 1)
    throw std::invalid_argument("grid_entropy: p outside [0,1]");
  if (p <= 0 || p >= 1) return 0.0;
  return -p * std::log2(p) - (1 - p) * std::log2(1 - p);
}

std::pair<double, double> object_entropy(const SurfaceGrid& grid) {
  const double h_unknown = 1.0;
  const double h_edge = grid_entropy(0.99);  // == grid_entropy(0.01)
  double h = 0;
  for (const auto& f : grid.faces)
    for (CellState cs : f.cells) h += cs == CellState::Unknown ? h_unknown : h_edge;
  std::size_t n = grid.total();
  return {h, n ? h / static_cast<double>(n) : 0.0};
}

double volume_convergence_p(std::span<const double> history) {
  if (history.size() < 3) return 0.5;
  double mean = sample_mean(history);
  double sd = sample_sd(history);
  if (sd <= 1e-12) return 1.0;
  double z = (history.back() - mean) / sd;
  return std::exp(-0.5 * z * z);
}

FeatureVector feature_vector(const ExplorationState& state, std::int64_t object_id,
                             const CandidateView& view) {
  const GlobalObject* g = state.map.find(object_id);
  if (!g || !g->estimate) throw std::invalid_argument("feature_vector: object not estimated");
  auto it = state.progress.find(object_id);
  if (it == state.progress.end())
    throw std::invalid_argument("feature_vector: object has no grid");
  const ObjectProgress& prog = it->second;

  FeatureVector x;
  auto [h, hbar] = object_entropy(prog.grid);
  x.h_obj = h;
  x.h_bar = hbar;
  std::size_t total = prog.grid.total();
  x.r_o = total ? static_cast<double>(prog.grid.count(CellState::Occupied)) / total : 0.0;

  CameraIntrinsics K;
  auto own = project_model_bbox(*g->estimate, K, view.T_cw);
  int others = 0;
  double iou_sum = 0;
  for (const auto& other : state.map.objects) {
    if (other.id == object_id || !other.estimate) continue;
    ++others;
    if (!own) continue;
    auto ob = project_model_bbox(*other.estimate, K, view.T_cw);
    if (ob) iou_sum += bbox_iou(*own, *ob);
  }
  x.r_iou = others ? iou_sum / others : 0.0;
  x.volume = g->estimate->volume();
  x.s = prog.done ? 0.0 : 1.0;
  return x;
}

double view_utility(const ExplorationState& state, const CandidateView& view, double lambda) {
  CameraIntrinsics K;
  double f = 0;
  for (const auto& g : state.map.objects) {
    if (!g.estimate) continue;
    auto it = state.progress.find(g.id);
    if (it == state.progress.end()) continue;
    if (it->second.done) continue;
    if (!project_model_bbox(*g.estimate, K, view.T_cw)) continue;
    FeatureVector x = feature_vector(state, g.id, view);
    double p_v = volume_convergence_p(it->second.volume_history);
    f += (1 - x.r_o) * x.h_obj + lambda * (plogp_bits(x.r_iou / 2) + plogp_bits(p_v));
  }
  return f;
}

const CandidateView& select_nbv(const ExplorationState& state,
                                std::span<const CandidateView> candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_nbv: no candidates");
  std::size_t best = 0;
  double best_f = -1;
  double best_motion = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    double f = view_utility(state, candidates[k]);
    double motion = (candidates[k].position - state.camera_pos).norm();
    bool better =
        f > best_f ||
        (f == best_f && (motion < best_motion ||
                         (motion == best_motion && candidates[k].index < candidates[best].index)));
    if (better) {
      best = k;
      best_f = f;
      best_motion = motion;
    }
  }
  return candidates[best];
}

Policy policy_from_string(const std::string& name) {
  if (name == "nbv") return Policy::Nbv;
  if (name == "random") return Policy::Random;
  if (name == "coverage") return Policy::Coverage;
  if (name == "init") return Policy::Init;
  throw std::invalid_argument("unknown policy '" + name + "'");
}

namespace {

void absorb_observation(ExplorationState& state, const SimScene& scene,
                        const CandidateView& view, std::int64_t frame_id,
                        const PipelineConfig& cfg) {
  Frame frame = simulate_observation(scene, view, frame_id);
  auto locals = locals_from_frame(frame);
  std::map<std::int64_t, int> seen_before;
  for (const auto& g : state.map.objects) seen_before[g.id] = g.observations;
  associate_frame(state.map, locals, frame.K, frame.T_cw, cfg.assoc);
  refit_all(state.map, cfg);

  // drop progress for globals removed by merging
  for (auto it = state.progress.begin(); it != state.progress.end();)
    it = state.map.find(it->first) ? ++it : state.progress.erase(it);

  for (auto& g : state.map.objects) {
    if (!g.estimate) continue;
    auto [it, fresh] = state.progress.try_emplace(g.id);
    if (fresh) it->second.grid = make_surface_grid(*g.estimate);
    update_grid(it->second.grid, g.points, frame.K, frame.T_cw);
    // the volume series tracks re-observations; repeating a stale estimate
    // while the object is out of view would fake convergence
    auto before = seen_before.find(g.id);
    if (before == seen_before.end() || g.observations > before->second)
      it->second.volume_history.push_back(g.estimate->volume());
  }
  for (auto& [id, prog] : state.progress) {
    auto [h, hbar] = object_entropy(prog.grid);
    std::size_t total = prog.grid.total();
    double r_o = total ? static_cast<double>(prog.grid.count(CellState::Occupied)) / total : 0.0;
    prog.done = (hbar < 0.5 || r_o > 0.5) && volume_convergence_p(prog.volume_history) > 0.8;
  }
  state.camera_pos = view.position;
}

StepTrace make_trace(const ExplorationState& state, const PipelineConfig& cfg,
                     const ObjectMapFile& gt, int observation, bool init_phase, int view_index,
                     double utility) {
  StepTrace t;
  t.observation = observation;
  t.init_phase = init_phase;
  t.view_index = view_index;
  t.utility = utility;
  t.objects = static_cast<int>(state.map.objects.size());
  for (const auto& [id, prog] : state.progress) {
    auto [h, hbar] = object_entropy(prog.grid);
    t.total_entropy += h;
    t.mean_normalized_entropy += hbar;
    t.object_entropies.emplace_back(id, hbar);
    if (prog.done) ++t.done_count;
  }
  if (!state.progress.empty())
    t.mean_normalized_entropy /= static_cast<double>(state.progress.size());
  t.metrics = eval_map(map_file_from(state.map, cfg), gt);
  return t;
}

}  // namespace

ExploreResult explore(const SimScene& scene, Policy policy, const PipelineConfig& cfg,
                      int max_steps) {
  if (max_steps < 0) throw std::invalid_argument("explore: negative max_steps");
  ExploreResult res;
  ExplorationState state;
  state.map = ObjectMap(mix_seed(cfg.seed, 17));

  auto candidates = candidate_views(scene);
  auto init = init_views(scene);
  auto coverage = coverage_views(scene);
  ObjectMapFile gt = gt_map_from_scene(scene);
  auto random_eng = make_engine(cfg.seed, 23);

  std::int64_t fid = 0;
  state.camera_pos = init.front().position;
  for (const auto& v : init) {
    absorb_observation(state, scene, v, fid, cfg);
    res.trace.push_back(
        make_trace(state, cfg, gt, static_cast<int>(fid), true, v.index, 0.0));
    ++fid;
  }

  auto all_done = [&] {
    for (const auto& [id, prog] : state.progress)
      if (!prog.done) return false;
    return true;
  };

  for (int step = 1; step <= max_steps && policy != Policy::Init; ++step) {
    if (all_done()) {
      res.stopped_early = true;
      break;
    }
    const CandidateView* view = nullptr;
    CandidateView sampled;
    double utility = 0;
    switch (policy) {
      case Policy::Nbv: {
        const CandidateView& v = select_nbv(state, candidates);
        utility = view_utility(state, v);
        view = &v;
        break;
      }
      case Policy::Random: {
        // a random reachable pose, not a random pick from the planner's curated
        // proposals: uniform direction on the view shell aimed at a uniform
        // table point, so framing quality is left to chance
        std::uniform_real_distribution<double> uu(0.0, 1.0);
        double az = 2 * M_PI * uu(random_eng);
        double el = (20.0 + 55.0 * uu(random_eng)) * M_PI / 180.0;
        double r = (0.9 + 0.2 * uu(random_eng)) * view_radius(scene);
        const Table& tb = scene.table;
        Eigen::Vector3d look(tb.cx + (2 * uu(random_eng) - 1) * tb.half_x,
                             tb.cy + (2 * uu(random_eng) - 1) * tb.half_y, tb.z);
        Eigen::Vector3d eye =
            look + r * Eigen::Vector3d(std::cos(az) * std::cos(el),
                                       std::sin(az) * std::cos(el), std::sin(el));
        sampled = CandidateView{look_at_pose(eye, look), eye, -1};
        view = &sampled;
        break;
      }
      case Policy::Coverage:
        view = &coverage[static_cast<std::size_t>(step - 1) % coverage.size()];
        break;
      case Policy::Init:
        break;
    }
    absorb_observation(state, scene, *view, fid, cfg);
    res.trace.push_back(
        make_trace(state, cfg, gt, static_cast<int>(fid), false, view->index, utility));
    ++fid;
    ++res.steps_taken;
    state.steps = res.steps_taken;
  }
  if (policy == Policy::Init && all_done()) res.stopped_early = true;

  res.map = std::move(state.map);
  res.file = map_file_from(res.map, cfg);
  return res;
}

std::string trace_to_csv(const std::vector<StepTrace>& trace) {
  auto g9 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return std::string(buf);
  };
  std::ostringstream out;
  out << "observation,init_phase,view_index,utility,objects,done_count,total_entropy,"
         "mean_normalized_entropy,matched,misses,extras,mean_cde_cm,mean_yae_deg,"
         "mean_iou_top,mean_iou_3d\n";
  for (const auto& t : trace)
    out << t.observation << ',' << (t.init_phase ? 1 : 0) << ',' << t.view_index << ','
        << g9(t.utility) << ',' << t.objects << ',' << t.done_count << ','
        << g9(t.total_entropy) << ',' << g9(t.mean_normalized_entropy) << ','
        << t.metrics.matched << ',' << t.metrics.misses << ',' << t.metrics.extras << ','
        << g9(t.metrics.mean_cde_cm) << ',' << g9(t.metrics.mean_yae_deg) << ','
        << g9(t.metrics.mean_iou_top) << ',' << g9(t.metrics.mean_iou_3d) << '\n';
  return out.str();
}

}  // namespace objslam
