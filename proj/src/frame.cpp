#include "objslam/frame.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace objslam {

using nlohmann::json;

double canon9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw SchemaError("line " + std::to_string(line) + ": " + what);
}

double num(const json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || !j[field].is_number())
    fail(line, std::string("missing or non-numeric field '") + field + "'");
  double v = j[field].get<double>();
  if (!std::isfinite(v)) fail(line, std::string("non-finite field '") + field + "'");
  return v;
}

json vec3_json(const Eigen::Vector3d& v) {
  return json::array({canon9(v.x()), canon9(v.y()), canon9(v.z())});
}

Eigen::Vector3d vec3_from(const json& j, const char* field, std::size_t line) {
  if (!j.is_array() || j.size() != 3) fail(line, std::string(field) + " must be a 3-array");
  Eigen::Vector3d v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number() || !std::isfinite(j[k].get<double>()))
      fail(line, std::string(field) + " has a non-finite entry");
    v[k] = j[k].get<double>();
  }
  return v;
}

json frame_to_json(const Frame& f) {
  json j;
  j["frame_id"] = f.frame_id;
  j["timestamp"] = canon9(f.timestamp);
  j["K"] = {{"fx", canon9(f.K.fx)},       {"fy", canon9(f.K.fy)},
            {"cx", canon9(f.K.cx)},       {"cy", canon9(f.K.cy)},
            {"width", f.K.width},         {"height", f.K.height}};
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back(json::array({canon9(f.T_cw.R(r, 0)), canon9(f.T_cw.R(r, 1)),
                                canon9(f.T_cw.R(r, 2))}));
  j["T_cw"] = {{"R", rows}, {"t", vec3_json(f.T_cw.t)}};
  j["detections"] = json::array();
  for (const auto& d : f.detections)
    j["detections"].push_back({{"label", d.label},
                               {"bbox", json::array({canon9(d.bbox.xmin), canon9(d.bbox.ymin),
                                                     canon9(d.bbox.xmax), canon9(d.bbox.ymax)})},
                               {"confidence", canon9(d.confidence)}});
  j["points"] = json::array();
  for (const auto& p : f.points)
    j["points"].push_back(json::array({canon9(p.u), canon9(p.v), canon9(p.xyz.x()),
                                       canon9(p.xyz.y()), canon9(p.xyz.z())}));
  j["segments"] = json::array();
  for (const auto& s : f.segments)
    j["segments"].push_back(
        json::array({canon9(s.a.x()), canon9(s.a.y()), canon9(s.b.x()), canon9(s.b.y())}));
  return j;
}

Frame frame_from_json(const json& j, std::size_t line) {
  Frame f;
  if (!j.contains("frame_id") || !j["frame_id"].is_number_integer())
    fail(line, "missing or non-integer field 'frame_id'");
  f.frame_id = j["frame_id"].get<std::int64_t>();
  f.timestamp = num(j, "timestamp", line);

  if (!j.contains("K") || !j["K"].is_object()) fail(line, "missing object field 'K'");
  const json& K = j["K"];
  f.K.fx = num(K, "fx", line);
  f.K.fy = num(K, "fy", line);
  f.K.cx = num(K, "cx", line);
  f.K.cy = num(K, "cy", line);
  if (!K.contains("width") || !K["width"].is_number_integer() || !K.contains("height") ||
      !K["height"].is_number_integer())
    fail(line, "K.width/K.height must be integers");
  f.K.width = K["width"].get<int>();
  f.K.height = K["height"].get<int>();
  if (f.K.fx <= 0 || f.K.fy <= 0 || f.K.width <= 0 || f.K.height <= 0)
    fail(line, "K must have positive focal lengths and image size");

  if (!j.contains("T_cw") || !j["T_cw"].is_object()) fail(line, "missing object field 'T_cw'");
  const json& T = j["T_cw"];
  if (!T.contains("R") || !T["R"].is_array() || T["R"].size() != 3)
    fail(line, "T_cw.R must be a 3x3 array");
  for (int r = 0; r < 3; ++r) {
    Eigen::Vector3d row = vec3_from(T["R"][r], "T_cw.R row", line);
    f.T_cw.R.row(r) = row.transpose();
  }
  if (!is_rotation(f.T_cw.R, 1e-6)) fail(line, "T_cw.R is not orthonormal (tolerance 1e-6)");
  if (!T.contains("t")) fail(line, "missing field 'T_cw.t'");
  f.T_cw.t = vec3_from(T["t"], "T_cw.t", line);

  if (j.contains("detections")) {
    if (!j["detections"].is_array()) fail(line, "'detections' must be an array");
    for (const auto& dj : j["detections"]) {
      Detection d;
      if (!dj.contains("label") || !dj["label"].is_string())
        fail(line, "detection missing string 'label'");
      d.label = dj["label"].get<std::string>();
      if (!dj.contains("bbox") || !dj["bbox"].is_array() || dj["bbox"].size() != 4)
        fail(line, "detection 'bbox' must be a 4-array");
      for (int k = 0; k < 4; ++k)
        if (!dj["bbox"][k].is_number() || !std::isfinite(dj["bbox"][k].get<double>()))
          fail(line, "detection 'bbox' has a non-finite entry");
      d.bbox = BBox2D{dj["bbox"][0].get<double>(), dj["bbox"][1].get<double>(),
                      dj["bbox"][2].get<double>(), dj["bbox"][3].get<double>()};
      if (!d.bbox.valid()) fail(line, "detection 'bbox' is inverted or empty");
      if (dj.contains("confidence")) d.confidence = num(dj, "confidence", line);
      f.detections.push_back(std::move(d));
    }
  }

  if (j.contains("points")) {
    if (!j["points"].is_array()) fail(line, "'points' must be an array");
    for (const auto& pj : j["points"]) {
      if (!pj.is_array() || pj.size() != 5) fail(line, "point must be a [u,v,x,y,z] 5-array");
      for (int k = 0; k < 5; ++k)
        if (!pj[k].is_number() || !std::isfinite(pj[k].get<double>()))
          fail(line, "point has a non-finite entry");
      FramePoint p;
      p.u = pj[0].get<double>();
      p.v = pj[1].get<double>();
      p.xyz = Eigen::Vector3d(pj[2].get<double>(), pj[3].get<double>(), pj[4].get<double>());
      if (p.u < 0 || p.u > f.K.width || p.v < 0 || p.v > f.K.height)
        fail(line, "point pixel lies outside the image");
      f.points.push_back(p);
    }
  }

  if (j.contains("segments")) {
    if (!j["segments"].is_array()) fail(line, "'segments' must be an array");
    for (const auto& sj : j["segments"]) {
      if (!sj.is_array() || sj.size() != 4)
        fail(line, "segment must be an [ax,ay,bx,by] 4-array");
      for (int k = 0; k < 4; ++k)
        if (!sj[k].is_number() || !std::isfinite(sj[k].get<double>()))
          fail(line, "segment has a non-finite entry");
      f.segments.push_back(LineSegment2D{{sj[0].get<double>(), sj[1].get<double>()},
                                         {sj[2].get<double>(), sj[3].get<double>()}});
    }
  }
  return f;
}

}  // namespace

std::vector<Frame> read_frames_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Frame> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(lineno, "invalid JSON");
    Frame f = frame_from_json(j, lineno);
    if (!frames.empty() && f.frame_id <= frames.back().frame_id)
      fail(lineno, "frame_id " + std::to_string(f.frame_id) + " not strictly increasing");
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_frames_jsonl(const std::string& path, const std::vector<Frame>& frames) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& f : frames) out << frame_to_json(f).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::vector<LocalObject> locals_from_frame(const Frame& frame) {
  std::vector<LocalObject> locals;
  locals.reserve(frame.detections.size());
  for (const auto& d : frame.detections) {
    LocalObject l;
    l.label = d.label;
    l.bbox = d.bbox;
    l.frame_id = frame.frame_id;
    for (const auto& p : frame.points)
      if (d.bbox.contains(p.u, p.v)) l.points.push_back(p.xyz);
    for (const auto& s : frame.segments) {
      Eigen::Vector2d m = s.midpoint();
      if (d.bbox.contains(m.x(), m.y())) l.segments.push_back(s);
    }
    locals.push_back(std::move(l));
  }
  return locals;
}

}  // namespace objslam
