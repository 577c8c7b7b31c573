#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sgae/error.hpp"
#include "sgae/scene.hpp"

namespace sgae {

/// Scene files are plain text ("SGSCENE v1"), one record per line, with
/// every floating-point value printed to 9 significant digits. Values are
/// quantized to that precision at generation time, so write -> read ->
/// write reproduces files byte for byte. A final "end" line guards
/// against truncation.

/// Rounds to the scene format's 9-significant-digit precision.
inline double quantize9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in, std::string label = "scene file")
      : in_(in), label_(std::move(label)) {}

  std::istringstream next(const char* expected_key) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string key;
      ls >> key;
      if (key != expected_key)
        throw DataError(label_ + " line " + std::to_string(line_no_) +
                        ": expected '" + expected_key + "', got '" + key +
                        "'");
      return ls;
    }
    throw DataError(label_ + ": truncated before '" + expected_key +
                    "' record");
  }

  template <class T>
  T value(std::istringstream& ls, const char* what) {
    T v;
    if (!(ls >> v))
      throw DataError(label_ + " line " + std::to_string(line_no_) +
                      ": bad or missing " + what);
    return v;
  }

 private:
  std::istream& in_;
  std::string label_;
  int line_no_ = 0;
};

}  // namespace detail

inline void write_scene(std::ostream& out, const Scene& scene) {
  using detail::fmt9;
  out << "SGSCENE v1\n";
  out << "vocab " << scene.num_classes << ' ' << scene.num_predicates << '\n';
  out << "labels " << (scene.has_labels ? 1 : 0) << '\n';
  out << "objects " << scene.objects.size() << '\n';
  for (const auto& o : scene.objects) {
    out << "object " << o.instance_id << ' ' << o.class_id << ' '
        << o.shape_family;
    for (double v : o.box.params()) out << ' ' << fmt9(v);
    out << '\n';
  }
  out << "points " << scene.points.size() << '\n';
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    const Vec3& p = scene.points[i];
    out << "point " << fmt9(p.x) << ' ' << fmt9(p.y) << ' ' << fmt9(p.z)
        << ' ' << scene.point_instance[i] << '\n';
  }
  out << "graph " << scene.graph.edges.size() << '\n';
  for (const auto& e : scene.graph.edges) {
    out << "edge " << e.src << ' ' << e.dst << ' ' << e.predicates.size();
    for (int p : e.predicates) out << ' ' << p;
    out << '\n';
  }
  out << "end\n";
}

inline Scene read_scene(std::istream& in) {
  detail::LineReader r(in);

  {
    auto ls = r.next("SGSCENE");
    const auto version = r.value<std::string>(ls, "format version");
    if (version != "v1")
      throw DataError("scene file: unsupported version '" + version + "'");
  }

  Scene scene;
  {
    auto ls = r.next("vocab");
    scene.num_classes = r.value<int>(ls, "class count");
    scene.num_predicates = r.value<int>(ls, "predicate count");
  }
  {
    auto ls = r.next("labels");
    scene.has_labels = r.value<int>(ls, "labels flag") != 0;
  }
  {
    auto ls = r.next("objects");
    const auto n = r.value<long>(ls, "object count");
    if (n < 0) throw DataError("scene file: negative object count");
    scene.objects.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      auto ol = r.next("object");
      SceneObject o;
      o.instance_id = r.value<int>(ol, "instance id");
      o.class_id = r.value<int>(ol, "class id");
      o.shape_family = r.value<int>(ol, "shape family");
      std::array<double, 7> params{};
      for (double& v : params) v = r.value<double>(ol, "box parameter");
      o.box = OrientedBox::from_params(params);
      scene.objects.push_back(o);
    }
  }
  {
    auto ls = r.next("points");
    const auto n = r.value<long>(ls, "point count");
    if (n < 0) throw DataError("scene file: negative point count");
    scene.points.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      auto pl = r.next("point");
      Vec3 p;
      p.x = r.value<double>(pl, "x");
      p.y = r.value<double>(pl, "y");
      p.z = r.value<double>(pl, "z");
      scene.points.push_back(p);
      scene.point_instance.push_back(r.value<int>(pl, "point instance"));
    }
  }
  {
    auto ls = r.next("graph");
    const auto n = r.value<long>(ls, "edge count");
    if (n < 0) throw DataError("scene file: negative edge count");
    for (long i = 0; i < n; ++i) {
      auto el = r.next("edge");
      GroundTruthGraph::Edge e;
      e.src = r.value<int>(el, "edge source");
      e.dst = r.value<int>(el, "edge target");
      const auto k = r.value<int>(el, "predicate count");
      for (int j = 0; j < k; ++j)
        e.predicates.push_back(r.value<int>(el, "predicate id"));
      scene.graph.edges.push_back(std::move(e));
    }
  }
  r.next("end");

  validate_scene(scene);
  return scene;
}

inline void save_scene(const std::string& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_scene(out, scene);
  if (!out) throw DataError("failed writing scene to '" + path + "'");
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scene file '" + path + "'");
  return read_scene(in);
}

}  // namespace sgae
