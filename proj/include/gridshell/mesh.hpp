#pragma once

// Triangle-mesh kernel: storage, adjacency, boundary classification,
// graph geodesics, edge splitting and Wavefront OBJ I/O.

#include "gridshell/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace gridshell {

using Tri = std::array<int, 3>;

struct MeshEdge {
  int v0 = -1;  // v0 < v1
  int v1 = -1;
  std::array<int, 2> tris{-1, -1};

  bool is_boundary() const { return tris[1] < 0; }
  int other_triangle(int t) const { return tris[0] == t ? tris[1] : tris[0]; }
};

struct Neighbor {
  int vertex;
  int edge;
};

enum class Validation { Full, TopologyOnly };

// Indexed, consistently oriented, edge-manifold triangle mesh. Immutable once
// built; "modifying" operations return a new mesh.
class TriMesh {
 public:
  TriMesh() = default;

  // Builds adjacency and validates the invariants. Throws gridshell::Error
  // naming the offending element.
  static TriMesh build(std::vector<Vec3> vertices, std::vector<Tri> triangles,
                       Validation validation = Validation::Full) {
    TriMesh m;
    m.vertices_ = std::move(vertices);
    m.triangles_ = std::move(triangles);
    m.init(validation);
    return m;
  }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Tri>& triangles() const { return triangles_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }
  const Vec3& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const Tri& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }
  const MeshEdge& edge(int e) const { return edges_[static_cast<std::size_t>(e)]; }

  bool is_boundary(int v) const { return boundary_[static_cast<std::size_t>(v)] != 0; }
  bool is_corner(int v) const { return corner_[static_cast<std::size_t>(v)] != 0; }
  const std::vector<char>& boundary_flags() const { return boundary_; }
  const std::vector<char>& corner_flags() const { return corner_; }
  bool has_boundary() const { return !boundary_loops_.empty(); }

  // Edge index of (a, b), or -1.
  int find_edge(int a, int b) const {
    auto it = edge_lookup_.find(edge_key(a, b));
    return it == edge_lookup_.end() ? -1 : it->second;
  }

  // Edge i of triangle t joins corner i and corner (i + 1) % 3.
  const std::array<int, 3>& triangle_edges(int t) const {
    return triangle_edges_[static_cast<std::size_t>(t)];
  }

  std::span<const Neighbor> neighbors(int v) const {
    const auto b = static_cast<std::size_t>(adjacency_offsets_[static_cast<std::size_t>(v)]);
    const auto e = static_cast<std::size_t>(adjacency_offsets_[static_cast<std::size_t>(v) + 1]);
    return {adjacency_.data() + b, e - b};
  }

  // Boundary loops with the surface on the left, each starting at its
  // smallest vertex index; loops ordered by that index.
  const std::vector<std::vector<int>>& boundary_loops() const { return boundary_loops_; }

  double edge_length(int e) const {
    const auto& ed = edge(e);
    return (vertex(ed.v1) - vertex(ed.v0)).norm();
  }

  Vec3 area_vector(int t) const {
    const auto& f = triangle(t);
    return 0.5 * (vertex(f[1]) - vertex(f[0])).cross(vertex(f[2]) - vertex(f[0]));
  }
  double triangle_area(int t) const { return area_vector(t).norm(); }
  Vec3 triangle_normal(int t) const { return area_vector(t).normalized(); }
  Vec3 barycenter(int t) const {
    const auto& f = triangle(t);
    return (vertex(f[0]) + vertex(f[1]) + vertex(f[2])) / 3.0;
  }
  double total_area() const {
    double a = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) a += triangle_area(static_cast<int>(t));
    return a;
  }

  // Orthonormal tangent basis of triangle t: first axis along edge 0.
  std::pair<Vec3, Vec3> tangent_basis(int t) const {
    const auto& f = triangle(t);
    const Vec3 n = triangle_normal(t);
    const Vec3 e1 = (vertex(f[1]) - vertex(f[0])).normalized();
    return {e1, n.cross(e1)};
  }

  // Same connectivity and flags, new positions.
  TriMesh with_positions(std::vector<Vec3> positions,
                         Validation validation = Validation::TopologyOnly) const {
    if (positions.size() != vertices_.size()) fail("with_positions: vertex count mismatch");
    TriMesh m = *this;
    m.vertices_ = std::move(positions);
    if (validation == Validation::Full) m.check_areas();
    return m;
  }

  TriMesh with_corners(std::vector<char> corners) const {
    if (corners.size() != vertices_.size()) fail("with_corners: size mismatch");
    TriMesh m = *this;
    for (std::size_t v = 0; v < corners.size(); ++v) {
      if (corners[v] && !boundary_[v]) fail("corner flag on interior vertex ", v);
    }
    m.corner_ = std::move(corners);
    return m;
  }

  bool is_connected() const {
    if (vertices_.empty()) return true;
    std::vector<char> seen(vertices_.size(), 0);
    std::vector<int> stack;
    std::size_t count = 0;
    // isolated vertices do not count as separate components
    std::size_t referenced = 0;
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      if (!neighbors(static_cast<int>(v)).empty()) ++referenced;
    if (referenced == 0) return true;
    int start = 0;
    while (neighbors(start).empty()) ++start;
    stack.push_back(start);
    seen[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      ++count;
      for (const auto& nb : neighbors(v)) {
        if (!seen[static_cast<std::size_t>(nb.vertex)]) {
          seen[static_cast<std::size_t>(nb.vertex)] = 1;
          stack.push_back(nb.vertex);
        }
      }
    }
    return count == referenced;
  }

 private:
  void init(Validation validation) {
    const int nv = static_cast<int>(vertices_.size());
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      if (!vertices_[v].allFinite()) fail("vertex ", v, " has non-finite coordinates");
    }
    edges_.clear();
    edge_lookup_.clear();
    triangle_edges_.assign(triangles_.size(), {-1, -1, -1});
    edge_lookup_.reserve(triangles_.size() * 2);
    // first-owner direction per edge for the orientation check
    std::vector<char> first_forward;
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const Tri& f = triangles_[t];
      for (int i = 0; i < 3; ++i) {
        if (f[static_cast<std::size_t>(i)] < 0 || f[static_cast<std::size_t>(i)] >= nv)
          fail("triangle ", t, " references out-of-range vertex ", f[static_cast<std::size_t>(i)]);
      }
      if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
        fail("triangle ", t, " repeats a vertex");
      for (int i = 0; i < 3; ++i) {
        const int a = f[static_cast<std::size_t>(i)];
        const int b = f[static_cast<std::size_t>((i + 1) % 3)];
        const auto key = edge_key(a, b);
        auto [it, inserted] = edge_lookup_.try_emplace(key, static_cast<int>(edges_.size()));
        if (inserted) {
          MeshEdge e;
          e.v0 = std::min(a, b);
          e.v1 = std::max(a, b);
          e.tris[0] = static_cast<int>(t);
          edges_.push_back(e);
          first_forward.push_back(a < b ? 1 : 0);
        } else {
          MeshEdge& e = edges_[static_cast<std::size_t>(it->second)];
          if (e.tris[1] >= 0)
            fail("non-manifold edge (", e.v0, ", ", e.v1, "): more than two incident triangles");
          const char forward = a < b ? 1 : 0;
          if (forward == first_forward[static_cast<std::size_t>(it->second)])
            fail("inconsistent triangle orientation across edge (", e.v0, ", ", e.v1, ")");
          e.tris[1] = static_cast<int>(t);
        }
        triangle_edges_[t][static_cast<std::size_t>(i)] = it->second;
      }
    }

    // vertex adjacency (CSR)
    std::vector<int> degree(vertices_.size(), 0);
    for (const auto& e : edges_) {
      ++degree[static_cast<std::size_t>(e.v0)];
      ++degree[static_cast<std::size_t>(e.v1)];
    }
    adjacency_offsets_.assign(vertices_.size() + 1, 0);
    for (std::size_t v = 0; v < vertices_.size(); ++v)
      adjacency_offsets_[v + 1] = adjacency_offsets_[v] + degree[v];
    adjacency_.assign(static_cast<std::size_t>(adjacency_offsets_.back()), Neighbor{-1, -1});
    std::vector<int> fill(adjacency_offsets_.begin(), adjacency_offsets_.end() - 1);
    for (std::size_t ei = 0; ei < edges_.size(); ++ei) {
      const auto& e = edges_[ei];
      adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.v0)]++)] = {e.v1, static_cast<int>(ei)};
      adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(e.v1)]++)] = {e.v0, static_cast<int>(ei)};
    }
    for (std::size_t v = 0; v < vertices_.size(); ++v) {
      std::sort(adjacency_.begin() + adjacency_offsets_[v], adjacency_.begin() + adjacency_offsets_[v + 1],
                [](const Neighbor& x, const Neighbor& y) { return x.vertex < y.vertex; });
    }

    // boundary: half-edges (a -> b) as oriented in their single triangle
    boundary_.assign(vertices_.size(), 0);
    corner_.assign(vertices_.size(), 0);
    std::vector<int> next(vertices_.size(), -1);
    for (const auto& e : edges_) {
      if (!e.is_boundary()) continue;
      const Tri& f = triangles_[static_cast<std::size_t>(e.tris[0])];
      int a = -1, b = -1;
      for (int i = 0; i < 3; ++i) {
        const int x = f[static_cast<std::size_t>(i)], y = f[static_cast<std::size_t>((i + 1) % 3)];
        if (edge_key(x, y) == edge_key(e.v0, e.v1)) {
          a = x;
          b = y;
        }
      }
      if (next[static_cast<std::size_t>(a)] >= 0)
        fail("non-manifold boundary vertex ", a, " (multiple boundary fans)");
      next[static_cast<std::size_t>(a)] = b;
      boundary_[static_cast<std::size_t>(a)] = 1;
      boundary_[static_cast<std::size_t>(b)] = 1;
    }
    boundary_loops_.clear();
    std::vector<char> used(vertices_.size(), 0);
    for (int v = 0; v < nv; ++v) {
      if (!boundary_[static_cast<std::size_t>(v)] || used[static_cast<std::size_t>(v)]) continue;
      std::vector<int> loop;
      int cur = v;
      while (!used[static_cast<std::size_t>(cur)]) {
        used[static_cast<std::size_t>(cur)] = 1;
        loop.push_back(cur);
        cur = next[static_cast<std::size_t>(cur)];
        if (cur < 0) fail("open boundary chain at vertex ", loop.back());
      }
      if (cur != v) fail("non-manifold boundary vertex ", cur);
      boundary_loops_.push_back(std::move(loop));
    }

    if (validation == Validation::Full) check_areas();
  }

  void check_areas() const {
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      const Tri& f = triangles_[t];
      const Vec3& a = vertices_[static_cast<std::size_t>(f[0])];
      const Vec3& b = vertices_[static_cast<std::size_t>(f[1])];
      const Vec3& c = vertices_[static_cast<std::size_t>(f[2])];
      const double lmax = std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
      const double area = 0.5 * (b - a).cross(c - a).norm();
      if (!(area > 1e-12 * lmax * lmax)) fail("degenerate triangle ", t, " (zero area)");
    }
  }

  std::vector<Vec3> vertices_;
  std::vector<Tri> triangles_;
  std::vector<MeshEdge> edges_;
  std::unordered_map<std::uint64_t, int> edge_lookup_;
  std::vector<std::array<int, 3>> triangle_edges_;
  std::vector<int> adjacency_offsets_{0};
  std::vector<Neighbor> adjacency_;
  std::vector<char> boundary_;
  std::vector<char> corner_;
  std::vector<std::vector<int>> boundary_loops_;
};

// Polygonal mesh (hex-dominant grid-shell output).
struct PolyMesh {
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> faces;
  std::vector<double> planarity;   // per face, filled by the regularizer
  std::vector<double> regularity;  // per face, filled by the regularizer
};

struct PolyEdge {
  int v0;
  int v1;
  std::vector<int> faces;
  bool is_boundary() const { return faces.size() == 1; }
};

// Unique undirected edges in order of first appearance. Throws on repeated
// face vertices or edges shared by more than two faces.
inline std::vector<PolyEdge> poly_edges(const PolyMesh& mesh) {
  std::vector<PolyEdge> edges;
  std::unordered_map<std::uint64_t, std::size_t> lookup;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    if (face.size() < 3) fail("face ", f, " has fewer than 3 vertices");
    for (std::size_t i = 0; i < face.size(); ++i) {
      for (std::size_t j = i + 1; j < face.size(); ++j)
        if (face[i] == face[j]) fail("face ", f, " repeats vertex ", face[i]);
      const int a = face[i], b = face[(i + 1) % face.size()];
      if (a < 0 || b < 0 || a >= static_cast<int>(mesh.vertices.size()) ||
          b >= static_cast<int>(mesh.vertices.size()))
        fail("face ", f, " references out-of-range vertex");
      auto [it, inserted] = lookup.try_emplace(edge_key(a, b), edges.size());
      if (inserted) edges.push_back(PolyEdge{std::min(a, b), std::max(a, b), {static_cast<int>(f)}});
      else {
        auto& e = edges[it->second];
        if (e.faces.size() >= 2)
          fail("non-manifold polygon edge (", e.v0, ", ", e.v1, ")");
        e.faces.push_back(static_cast<int>(f));
      }
    }
  }
  return edges;
}

inline std::vector<char> poly_boundary_vertices(const PolyMesh& mesh) {
  std::vector<char> flags(mesh.vertices.size(), 0);
  for (const auto& e : poly_edges(mesh)) {
    if (e.is_boundary()) {
      flags[static_cast<std::size_t>(e.v0)] = 1;
      flags[static_cast<std::size_t>(e.v1)] = 1;
    }
  }
  return flags;
}

// Area of a (possibly non-planar) polygon, fan-triangulated from the vertex
// average.
inline double polygon_area(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double a = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    a += 0.5 * (pts[i] - c).cross(pts[(i + 1) % pts.size()] - c).norm();
  return a;
}

inline std::vector<Vec3> face_points(const PolyMesh& mesh, std::size_t f) {
  std::vector<Vec3> pts;
  pts.reserve(mesh.faces[f].size());
  for (int v : mesh.faces[f]) pts.push_back(mesh.vertices[static_cast<std::size_t>(v)]);
  return pts;
}

// ---------------------------------------------------------------------------
// OBJ I/O

namespace detail {

inline int parse_obj_index(const std::string& token, int nv, std::size_t line_no) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    fail("OBJ parse error at line ", line_no, ": bad face index '", token, "'");
  }
  if (idx < 0) idx = nv + idx + 1;
  if (idx < 1 || idx > nv) fail("OBJ parse error at line ", line_no, ": face index ", head, " out of range");
  return idx - 1;
}

struct ObjData {
  std::vector<Vec3> vertices;
  std::vector<std::vector<int>> faces;
};

inline ObjData read_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open OBJ file '", path, "'");
  ObjData data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        fail("OBJ parse error at line ", line_no, ": malformed vertex");
      data.vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ls >> tok) face.push_back(parse_obj_index(tok, static_cast<int>(data.vertices.size()), line_no));
      if (face.size() < 3) fail("OBJ parse error at line ", line_no, ": face with fewer than 3 vertices");
      data.faces.push_back(std::move(face));
    }
    // other records (vn, vt, o, g, s, usemtl, ...) are ignored
  }
  return data;
}

inline void write_obj(const std::string& path, const std::vector<Vec3>& vertices,
                      const std::vector<std::vector<int>>& faces) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) fail("cannot write OBJ file '", path, "'");
  bool ok = true;
  // shortest text that reads back to the same double, so stages chained
  // through files match the in-memory pipeline bit for bit
  char buf[32];
  auto put = [&](double x) {
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    ok = ok && std::fputc(' ', fp) != EOF && std::fwrite(buf, 1, static_cast<std::size_t>(r.ptr - buf), fp) == static_cast<std::size_t>(r.ptr - buf);
  };
  for (const auto& v : vertices) {
    ok = ok && std::fputc('v', fp) != EOF;
    put(v.x()), put(v.y()), put(v.z());
    ok = ok && std::fputc('\n', fp) != EOF;
  }
  for (const auto& f : faces) {
    ok = ok && std::fputc('f', fp) != EOF;
    for (int i : f) ok = ok && std::fprintf(fp, " %d", i + 1) > 0;
    ok = ok && std::fputc('\n', fp) != EOF;
  }
  ok = (std::fclose(fp) == 0) && ok;
  if (!ok) fail("I/O failure writing '", path, "'");
}

}  // namespace detail

inline TriMesh load_obj(const std::string& path) {
  auto data = detail::read_obj(path);
  std::vector<Tri> tris;
  tris.reserve(data.faces.size());
  for (std::size_t f = 0; f < data.faces.size(); ++f) {
    if (data.faces[f].size() != 3) fail("non-triangular face ", f, " in '", path, "'");
    tris.push_back({data.faces[f][0], data.faces[f][1], data.faces[f][2]});
  }
  return TriMesh::build(std::move(data.vertices), std::move(tris));
}

inline PolyMesh load_poly_obj(const std::string& path) {
  auto data = detail::read_obj(path);
  PolyMesh m{std::move(data.vertices), std::move(data.faces), {}, {}};
  poly_edges(m);  // validates
  return m;
}

inline void save_obj(const TriMesh& mesh, const std::string& path) {
  std::vector<std::vector<int>> faces;
  faces.reserve(mesh.num_triangles());
  for (const auto& t : mesh.triangles()) faces.push_back({t[0], t[1], t[2]});
  detail::write_obj(path, mesh.vertices(), faces);
}

inline void save_obj(const PolyMesh& mesh, const std::string& path) {
  detail::write_obj(path, mesh.vertices, mesh.faces);
}

// ---------------------------------------------------------------------------
// Boundary classification

// Flags corners: boundary vertices whose turning angle between incoming and
// outgoing boundary edges exceeds `corner_angle_threshold` (radians).
inline TriMesh classify_boundary(const TriMesh& mesh, double corner_angle_threshold = 30.0 * kPi / 180.0) {
  std::vector<char> corners(mesh.num_vertices(), 0);
  for (const auto& loop : mesh.boundary_loops()) {
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& prev = mesh.vertex(loop[(i + n - 1) % n]);
      const Vec3& cur = mesh.vertex(loop[i]);
      const Vec3& next = mesh.vertex(loop[(i + 1) % n]);
      const Vec3 din = cur - prev, dout = next - cur;
      const double c = din.dot(dout) / (din.norm() * dout.norm());
      const double turning = std::acos(std::clamp(c, -1.0, 1.0));
      if (turning > corner_angle_threshold) corners[static_cast<std::size_t>(loop[i])] = 1;
    }
  }
  return mesh.with_corners(std::move(corners));
}

// ---------------------------------------------------------------------------
// Graph geodesics

struct GeodesicField {
  std::vector<int> sources;
  std::vector<double> distance;  // +inf where unreachable
  std::vector<int> nearest;      // position in `sources`, -1 where unreachable

  int nearest_vertex(int v) const {
    const int s = nearest[static_cast<std::size_t>(v)];
    return s < 0 ? -1 : sources[static_cast<std::size_t>(s)];
  }
  bool all_reached() const {
    return std::none_of(nearest.begin(), nearest.end(), [](int s) { return s < 0; });
  }
};

namespace detail {

// Multi-source Dijkstra on the edge graph. Ties in distance are resolved
// towards the lower label, so the labeling does not depend on heap order.
// Entries in `dist`/`label` act as an existing field that sources must beat.
inline void dijkstra_update(const TriMesh& mesh, std::span<const int> starts, std::span<const int> start_labels,
                            std::vector<double>& dist, std::vector<int>& label,
                            double cutoff = kInfinity) {
  using Entry = std::tuple<double, int, int>;  // distance, label, vertex
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  auto better = [&](double d, int l, int v) {
    const auto vi = static_cast<std::size_t>(v);
    return d < dist[vi] || (d == dist[vi] && label[vi] >= 0 && l < label[vi]) ||
           (d == dist[vi] && label[vi] < 0);
  };
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const int v = starts[i];
    if (better(0.0, start_labels[i], v)) {
      dist[static_cast<std::size_t>(v)] = 0.0;
      label[static_cast<std::size_t>(v)] = start_labels[i];
      heap.emplace(0.0, start_labels[i], v);
    }
  }
  while (!heap.empty()) {
    const auto [d, l, v] = heap.top();
    heap.pop();
    const auto vi = static_cast<std::size_t>(v);
    if (d != dist[vi] || l != label[vi]) continue;  // stale
    for (const auto& nb : mesh.neighbors(v)) {
      const double nd = d + mesh.edge_length(nb.edge);
      if (nd > cutoff) continue;
      if (better(nd, l, nb.vertex)) {
        dist[static_cast<std::size_t>(nb.vertex)] = nd;
        label[static_cast<std::size_t>(nb.vertex)] = l;
        heap.emplace(nd, l, nb.vertex);
      }
    }
  }
}

}  // namespace detail

inline GeodesicField geodesic_distances(const TriMesh& mesh, std::span<const int> sources) {
  if (sources.empty()) fail("geodesic_distances: empty source set");
  GeodesicField field;
  field.sources.assign(sources.begin(), sources.end());
  field.distance.assign(mesh.num_vertices(), kInfinity);
  field.nearest.assign(mesh.num_vertices(), -1);
  std::vector<int> labels(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i] < 0 || sources[i] >= static_cast<int>(mesh.num_vertices()))
      fail("geodesic_distances: source ", sources[i], " out of range");
    labels[i] = static_cast<int>(i);
  }
  detail::dijkstra_update(mesh, sources, labels, field.distance, field.nearest);
  return field;
}

// ---------------------------------------------------------------------------
// Edge splitting

struct SplitVertex {
  int vertex;    // index in the split mesh
  int parent0;   // parent edge endpoints, in the split mesh numbering
  int parent1;
  double parameter = 0.5;
};

struct SplitResult {
  TriMesh mesh;
  std::vector<SplitVertex> new_vertices;
  std::vector<int> triangle_parent;  // split-mesh triangle -> input triangle
};

// Midpoint-splits each marked edge (given as vertex pairs) together with its
// incident triangles, one edge after another. A triangle (a, b, c) split on
// (a, b) at m becomes (a, m, c) in place plus an appended (m, b, c).
// Boundary flags propagate to midpoints of boundary edges; corner flags are kept.
inline SplitResult split_long_edges(const TriMesh& mesh, std::span<const std::pair<int, int>> marked_edges) {
  std::vector<Vec3> verts = mesh.vertices();
  std::vector<Tri> tris = mesh.triangles();
  std::vector<int> parent(tris.size());
  for (std::size_t t = 0; t < parent.size(); ++t) parent[t] = static_cast<int>(t);
  std::vector<char> corners = mesh.corner_flags();

  std::unordered_map<std::uint64_t, std::array<int, 2>> incident;
  incident.reserve(mesh.num_edges() + 3 * marked_edges.size());
  for (const auto& e : mesh.edges()) incident[edge_key(e.v0, e.v1)] = e.tris;

  auto set_incident = [&](int a, int b, int old_t, int new_t) {
    auto& inc = incident[edge_key(a, b)];
    if (inc[0] == old_t) inc[0] = new_t;
    else if (inc[1] == old_t) inc[1] = new_t;
  };

  SplitResult result;
  for (const auto& [a, b] : marked_edges) {
    auto it = incident.find(edge_key(a, b));
    if (it == incident.end()) fail("split_long_edges: edge (", a, ", ", b, ") not in mesh");
    const std::array<int, 2> owners = it->second;
    const int m = static_cast<int>(verts.size());
    verts.push_back(0.5 * (verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]));
    corners.push_back(0);
    result.new_vertices.push_back({m, a, b, 0.5});
    incident.erase(it);

    std::array<int, 2> half_a{-1, -1}, half_b{-1, -1};
    for (int k = 0; k < 2; ++k) {
      const int t = owners[static_cast<std::size_t>(k)];
      if (t < 0) continue;
      Tri f = tris[static_cast<std::size_t>(t)];
      int i = 0;
      while (!((f[static_cast<std::size_t>(i)] == a && f[static_cast<std::size_t>((i + 1) % 3)] == b) ||
               (f[static_cast<std::size_t>(i)] == b && f[static_cast<std::size_t>((i + 1) % 3)] == a)))
        ++i;
      const int p = f[static_cast<std::size_t>(i)], q = f[static_cast<std::size_t>((i + 1) % 3)],
                r = f[static_cast<std::size_t>((i + 2) % 3)];
      const int t2 = static_cast<int>(tris.size());
      tris[static_cast<std::size_t>(t)] = {p, m, r};
      tris.push_back({m, q, r});
      parent.push_back(parent[static_cast<std::size_t>(t)]);
      // (q, r) moved from t to t2; (m, r) is new and shared by t and t2
      set_incident(q, r, t, t2);
      incident[edge_key(m, r)] = {t, t2};
      if (p == a) {
        half_a[static_cast<std::size_t>(k)] = t;
        half_b[static_cast<std::size_t>(k)] = t2;
      } else {
        half_b[static_cast<std::size_t>(k)] = t;
        half_a[static_cast<std::size_t>(k)] = t2;
      }
    }
    auto pack = [](std::array<int, 2> x) {
      if (x[0] < 0) std::swap(x[0], x[1]);
      return x;
    };
    incident[edge_key(a, m)] = pack(half_a);
    incident[edge_key(m, b)] = pack(half_b);
  }
  result.mesh = TriMesh::build(std::move(verts), std::move(tris), Validation::TopologyOnly);
  result.mesh = result.mesh.with_corners(std::move(corners));
  result.triangle_parent = std::move(parent);
  return result;
}

}  // namespace gridshell
