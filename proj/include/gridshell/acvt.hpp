#pragma once

// Seed sampling, discrete Lloyd relaxation and Voronoi extraction on the
// deformed surface M'. Regions are vertex labels from multi-source
// Dijkstra; the polygons are mapped back onto M.

#include "gridshell/metric_deform.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>

namespace gridshell {

enum class SeedKind : std::uint8_t { Corner, Border, Interior };

inline const char* to_string(SeedKind k) {
  switch (k) {
    case SeedKind::Corner: return "corner";
    case SeedKind::Border: return "border";
    default: return "interior";
  }
}

struct SeedSet {
  std::vector<int> seeds;  // vertices of M'
  std::vector<SeedKind> kind;
  std::uint64_t rng_seed = 0;

  std::size_t size() const { return seeds.size(); }
};

struct VoronoiState {
  std::vector<int> label;        // per vertex, index into the seed list
  std::vector<double> distance;  // per vertex, to its seed
  std::vector<std::vector<int>> regions;
  std::vector<std::pair<int, int>> adjacency;  // region pairs, r < s, sorted
  double energy = 0.0;  // sum over vertices of |x_v - x_seed|^2
};

// Arclength coordinates along the boundary loops.
struct BoundaryCoords {
  std::vector<int> loop;       // per vertex, -1 off the boundary
  std::vector<int> position;   // index within its loop
  std::vector<double> arc;     // arclength from the loop start
  std::vector<double> length;  // per loop

  explicit BoundaryCoords(const TriMesh& mesh)
      : loop(mesh.num_vertices(), -1), position(mesh.num_vertices(), -1), arc(mesh.num_vertices(), 0.0) {
    const auto& loops = mesh.boundary_loops();
    for (std::size_t l = 0; l < loops.size(); ++l) {
      double s = 0.0;
      const auto& lp = loops[l];
      for (std::size_t i = 0; i < lp.size(); ++i) {
        const auto v = static_cast<std::size_t>(lp[i]);
        loop[v] = static_cast<int>(l);
        position[v] = static_cast<int>(i);
        arc[v] = s;
        s += (mesh.vertex(lp[(i + 1) % lp.size()]) - mesh.vertex(lp[i])).norm();
      }
      length.push_back(s);
    }
  }

  // Distance along the loop; infinite across loops.
  double separation(int a, int b) const {
    const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
    if (loop[ia] < 0 || loop[ia] != loop[ib]) return kInfinity;
    const double d = std::abs(arc[ia] - arc[ib]);
    return std::min(d, length[static_cast<std::size_t>(loop[ia])] - d);
  }
};

namespace detail {

inline void shuffle(std::vector<int>& v, std::mt19937_64& rng) {
  // explicit Fisher-Yates: std::shuffle is not specified bit-for-bit
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

// Three-stage dart throwing on M': corners, then border vertices spaced
// >= R along the boundary, then interior vertices >= R in graph distance.
inline SeedSet poisson_sample(const DeformedDomain& domain, double R, std::uint64_t rng_seed) {
  if (!(R > 0.0)) fail("poisson_sample: R must be positive");
  if (R < 2.0 * domain.q)
    fail("poisson_sample: R = ", R, " is below 2q = ", 2.0 * domain.q, " (sampling would be mesh-limited)");
  const TriMesh& mesh = domain.deformed;
  const std::size_t nv = mesh.num_vertices();
  SeedSet out;
  out.rng_seed = rng_seed;
  std::mt19937_64 rng(rng_seed);

  for (std::size_t v = 0; v < nv; ++v)
    if (mesh.is_corner(static_cast<int>(v))) {
      out.seeds.push_back(static_cast<int>(v));
      out.kind.push_back(SeedKind::Corner);
    }

  const BoundaryCoords bc(mesh);
  std::vector<std::set<double>> taken(bc.length.size());
  for (int s : out.seeds) taken[static_cast<std::size_t>(bc.loop[static_cast<std::size_t>(s)])].insert(bc.arc[static_cast<std::size_t>(s)]);
  std::vector<int> border;
  for (std::size_t v = 0; v < nv; ++v)
    if (mesh.is_boundary(static_cast<int>(v)) && !mesh.is_corner(static_cast<int>(v))) border.push_back(static_cast<int>(v));
  detail::shuffle(border, rng);
  for (int v : border) {
    const auto l = static_cast<std::size_t>(bc.loop[static_cast<std::size_t>(v)]);
    const double s = bc.arc[static_cast<std::size_t>(v)], len = bc.length[l];
    auto& set = taken[l];
    bool ok = true;
    if (!set.empty()) {
      // nearest taken positions on either side, with wrap-around
      auto hi = set.lower_bound(s);
      const double next = hi == set.end() ? *set.begin() + len : *hi;
      const double prev = hi == set.begin() ? *set.rbegin() - len : *std::prev(hi);
      ok = next - s >= R && s - prev >= R;
    }
    if (ok) {
      set.insert(s);
      out.seeds.push_back(v);
      out.kind.push_back(SeedKind::Border);
    }
  }

  std::vector<double> dist(nv, kInfinity);
  std::vector<int> label(nv, -1);
  if (!out.seeds.empty()) {
    std::vector<int> labels(out.seeds.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i);
    detail::dijkstra_update(mesh, out.seeds, labels, dist, label);
  }
  std::vector<int> interior;
  for (std::size_t v = 0; v < nv; ++v)
    if (!mesh.is_boundary(static_cast<int>(v))) interior.push_back(static_cast<int>(v));
  detail::shuffle(interior, rng);
  for (int v : interior) {
    if (dist[static_cast<std::size_t>(v)] < R) continue;
    const int id = static_cast<int>(out.seeds.size());
    out.seeds.push_back(v);
    out.kind.push_back(SeedKind::Interior);
    const int start[1] = {v}, lab[1] = {id};
    detail::dijkstra_update(mesh, start, lab, dist, label, R);
  }
  return out;
}

inline VoronoiState compute_voronoi(const TriMesh& mesh, const SeedSet& seeds) {
  if (seeds.seeds.empty()) fail("compute_voronoi: no seeds");
  VoronoiState vd;
  const std::size_t nv = mesh.num_vertices();
  vd.distance.assign(nv, kInfinity);
  vd.label.assign(nv, -1);
  std::vector<int> labels(seeds.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i);
  detail::dijkstra_update(mesh, seeds.seeds, labels, vd.distance, vd.label);
  vd.regions.assign(seeds.size(), {});
  for (std::size_t v = 0; v < nv; ++v) {
    const int l = vd.label[v];
    if (l < 0) fail("compute_voronoi: vertex ", v, " is not reachable from any seed");
    vd.regions[static_cast<std::size_t>(l)].push_back(static_cast<int>(v));
    vd.energy += (mesh.vertex(static_cast<int>(v)) - mesh.vertex(seeds.seeds[static_cast<std::size_t>(l)])).squaredNorm();
  }
  std::set<std::pair<int, int>> adj;
  for (const auto& e : mesh.edges()) {
    const int a = vd.label[static_cast<std::size_t>(e.v0)], b = vd.label[static_cast<std::size_t>(e.v1)];
    if (a != b) adj.emplace(std::min(a, b), std::max(a, b));
  }
  vd.adjacency.assign(adj.begin(), adj.end());
  return vd;
}

// Region vertex minimizing sum_i |x - v_i|^2; ties to the lowest index.
inline int centroid_by_quadric(std::span<const int> region, std::span<const Vec3> positions) {
  if (region.empty()) fail("centroid_by_quadric: empty region");
  // Q(x) = n x.x - 2 x.b + c
  Vec3 b = Vec3::Zero();
  double c = 0.0;
  for (int v : region) {
    const Vec3& p = positions[static_cast<std::size_t>(v)];
    b += p;
    c += p.squaredNorm();
  }
  const double n = static_cast<double>(region.size());
  int best = -1;
  double best_q = kInfinity;
  for (int v : region) {
    const Vec3& x = positions[static_cast<std::size_t>(v)];
    const double q = n * x.squaredNorm() - 2.0 * x.dot(b) + c;
    const double tie = 1e-12 * (std::abs(q) + c);
    if (best < 0 || q < best_q - tie || (q <= best_q + tie && v < best)) {
      best = v;
      best_q = q;
    }
  }
  return best;
}

struct LloydResult {
  SeedSet seeds;
  VoronoiState voronoi;          // of the returned seeds
  std::vector<double> energy;    // per iteration, E(S_k) with S_0 the input
  int iterations = 0;
  double displacement = 0.0;     // max seed move of the last iteration
  int rejected_moves = 0;        // in the last iteration (target occupied)
  bool converged = false;
  bool energy_guard = false;     // an iteration raised the energy and was undone
  std::vector<std::string> warnings;
};

// Discrete Lloyd relaxation: border seeds go to the middle of their 1D
// boundary region, interior seeds to their region's quadric centroid.
// Energy is the CVT energy of the geodesic partition measured with the same
// squared Euclidean distances the quadric minimizes.
inline LloydResult lloyd_relax(const DeformedDomain& domain, const SeedSet& seeds, int max_iters, double tol) {
  const TriMesh& mesh = domain.deformed;
  if (seeds.seeds.size() != seeds.kind.size()) fail("lloyd_relax: seed/kind size mismatch");
  if (max_iters < 1) fail("lloyd_relax: max_iters must be at least 1");
  LloydResult res;
  res.seeds = seeds;
  const BoundaryCoords bc(mesh);

  VoronoiState vd = compute_voronoi(mesh, res.seeds);
  for (int it = 0; it < max_iters; ++it) {
    auto& S = res.seeds;
    // drop seeds that lost their whole region (defensive: seeds label themselves)
    for (std::size_t i = S.size(); i-- > 0;) {
      if (vd.regions[i].empty()) {
        res.warnings.push_back("seed at vertex " + std::to_string(S.seeds[i]) + " lost its region and was removed");
        S.seeds.erase(S.seeds.begin() + static_cast<std::ptrdiff_t>(i));
        S.kind.erase(S.kind.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
    if (vd.regions.size() != S.size()) vd = compute_voronoi(mesh, S);
    res.energy.push_back(vd.energy);

    std::set<int> occupied(S.seeds.begin(), S.seeds.end());
    // per loop, seeds sorted by arclength
    std::map<int, std::vector<std::pair<double, int>>> on_loop;
    for (std::size_t i = 0; i < S.size(); ++i) {
      const auto v = static_cast<std::size_t>(S.seeds[i]);
      if (bc.loop[v] >= 0) on_loop[bc.loop[v]].emplace_back(bc.arc[v], static_cast<int>(i));
    }
    for (auto& [l, list] : on_loop) std::sort(list.begin(), list.end());

    std::vector<int> proposal(S.seeds);
    for (std::size_t i = 0; i < S.size(); ++i) {
      const int s = S.seeds[i];
      if (S.kind[i] == SeedKind::Border) {
        const auto l = bc.loop[static_cast<std::size_t>(s)];
        const auto& list = on_loop[l];
        if (list.size() < 2) continue;
        const double len = bc.length[static_cast<std::size_t>(l)];
        std::size_t k = 0;
        while (list[k].second != static_cast<int>(i)) ++k;
        const double a = bc.arc[static_cast<std::size_t>(s)];
        double prev = list[(k + list.size() - 1) % list.size()].first;
        double next = list[(k + 1) % list.size()].first;
        if (prev >= a) prev -= len;
        if (next <= a) next += len;
        double target = 0.25 * (prev + 2.0 * a + next);
        target = std::fmod(target + len, len);
        // nearest vertex of the loop by arclength
        const auto& loop = mesh.boundary_loops()[static_cast<std::size_t>(l)];
        int best = s;
        double best_d = kInfinity;
        for (int v : loop) {
          if (mesh.is_corner(v)) continue;
          double d = std::abs(bc.arc[static_cast<std::size_t>(v)] - target);
          d = std::min(d, len - d);
          if (d < best_d - 1e-12 || (d <= best_d + 1e-12 && v < best)) {
            best = v;
            best_d = d;
          }
        }
        proposal[i] = best;
      } else if (S.kind[i] == SeedKind::Interior) {
        std::vector<int> candidates;
        for (int v : vd.regions[i])
          if (!mesh.is_boundary(v)) candidates.push_back(v);
        if (!candidates.empty()) proposal[i] = centroid_by_quadric(candidates, mesh.vertices());
      }
    }

    double disp = 0.0;
    int rejected = 0;
    SeedSet next = S;
    for (std::size_t i = 0; i < S.size(); ++i) {
      const int from = S.seeds[i], to = proposal[i];
      if (to == from) continue;
      if (occupied.count(to)) {
        ++rejected;
        continue;
      }
      occupied.erase(from);
      occupied.insert(to);
      next.seeds[i] = to;
      disp = std::max(disp, (mesh.vertex(to) - mesh.vertex(from)).norm());
    }
    res.iterations = it + 1;
    res.rejected_moves = rejected;
    if (disp == 0.0) {
      res.displacement = 0.0;
      res.converged = true;
      break;
    }
    auto next_vd = compute_voronoi(mesh, next);
    if (next_vd.energy > vd.energy) {
      res.energy_guard = true;
      res.warnings.push_back("Lloyd step " + std::to_string(it + 1) + " raised the energy; stopped at the previous seeds");
      break;
    }
    S = std::move(next);
    vd = std::move(next_vd);
    res.displacement = disp;
    if (disp < tol) {
      res.converged = true;
      res.iterations = it + 1;
      break;
    }
  }
  res.voronoi = std::move(vd);
  if (res.energy.back() != res.voronoi.energy) res.energy.push_back(res.voronoi.energy);
  return res;
}

// ---------------------------------------------------------------------------
// Extraction

struct ExtractResult {
  PolyMesh mesh;                  // on M
  std::vector<Vec3> deformed;     // the same vertices on M'
  std::vector<char> corner;       // per vertex: a corner of M
  std::vector<int> face_seed;     // per face, index into the seed list
  std::vector<std::string> warnings;
};

inline ExtractResult extract_cvt(const DeformedDomain& domain, const SeedSet& seeds, const VoronoiState& vd) {
  const TriMesh& mp = domain.deformed;
  const TriMesh& m = domain.original;
  const std::size_t nt = mp.num_triangles();
  if (seeds.size() < 3) fail("extract_cvt: needs at least 3 regions (got ", seeds.size(), ")");
  if (vd.label.size() != mp.num_vertices()) fail("extract_cvt: labeling does not match the mesh");
  ExtractResult out;
  const BoundaryCoords bc(mp);
  std::vector<char> is_seed_vertex(mp.num_vertices(), 0);
  for (int s : seeds.seeds) is_seed_vertex[static_cast<std::size_t>(s)] = 1;

  // output vertices keyed by what produced them
  enum Key : std::uint64_t { VoronoiTri = 0, BoundaryEdge = 1, MeshVertex = 2 };
  std::map<std::uint64_t, int> ids;
  auto vertex_id = [&](Key kind, int index, const Vec3& on_m, const Vec3& on_mp, bool corner) {
    const std::uint64_t key = (static_cast<std::uint64_t>(kind) << 32) | static_cast<std::uint32_t>(index);
    auto [it, inserted] = ids.emplace(key, static_cast<int>(out.mesh.vertices.size()));
    if (inserted) {
      out.mesh.vertices.push_back(on_m);
      out.deformed.push_back(on_mp);
      out.corner.push_back(corner ? 1 : 0);
    }
    return it->second;
  };
  auto lab = [&](int v) { return vd.label[static_cast<std::size_t>(v)]; };
  auto bary_point = [](const TriMesh& mesh, int t, const Vec3& w) {
    const auto& f = mesh.triangle(t);
    return Vec3(w[0] * mesh.vertex(f[0]) + w[1] * mesh.vertex(f[1]) + w[2] * mesh.vertex(f[2]));
  };
  auto voronoi_vertex = [&](int t) {
    const auto& f = mp.triangle(t);
    Vec3 w;
    for (std::size_t i = 0; i < 3; ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / std::max(vd.distance[static_cast<std::size_t>(f[i])], 1e-12);
    w /= w.sum();
    return vertex_id(VoronoiTri, t, bary_point(m, t, w), bary_point(mp, t, w), false);
  };
  // point on boundary edge (x, y) equidistant from both seeds
  auto transition_vertex = [&](int x, int y) {
    const int e = mp.find_edge(x, y);
    const int a = mp.edge(e).v0, b = mp.edge(e).v1;
    const double len = mp.edge_length(e);
    double t = (len + vd.distance[static_cast<std::size_t>(b)] - vd.distance[static_cast<std::size_t>(a)]) / (2.0 * len);
    t = std::clamp(t, 0.01, 0.99);  // keep clear of the end vertices
    return vertex_id(BoundaryEdge, e, (1 - t) * m.vertex(a) + t * m.vertex(b), (1 - t) * mp.vertex(a) + t * mp.vertex(b), false);
  };
  auto mesh_vertex = [&](int v) { return vertex_id(MeshVertex, v, m.vertex(v), mp.vertex(v), m.is_corner(v)); };

  // The region's curve enters triangle t across (prev non-r, first r) and
  // leaves across (last r, next non-r); walking exits to entries keeps the
  // region on the right.
  auto exit_edge = [&](int t, int r) {
    const auto& f = mp.triangle(t);
    for (std::size_t i = 0; i < 3; ++i)
      if (lab(f[i]) == r && lab(f[(i + 1) % 3]) != r) return std::pair<int, int>{f[i], f[(i + 1) % 3]};
    return std::pair<int, int>{-1, -1};
  };

  std::vector<std::vector<int>> touching(seeds.size());
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& f = mp.triangle(static_cast<int>(t));
    std::set<int> ls{lab(f[0]), lab(f[1]), lab(f[2])};
    if (ls.size() < 2) continue;
    for (int r : ls) touching[static_cast<std::size_t>(r)].push_back(static_cast<int>(t));
  }

  std::vector<int> visited(nt, -1);
  for (std::size_t r = 0; r < seeds.size(); ++r) {
    const int ri = static_cast<int>(r);
    std::vector<std::vector<int>> cycles;
    for (int start : touching[r]) {
      if (visited[static_cast<std::size_t>(start)] == ri) continue;
      std::vector<int> poly;
      int t = start;
      std::size_t guard = 0;
      do {
        if (++guard > 4 * nt + 8) fail("extract_cvt: region ", r, " has a non-cyclic boundary");
        visited[static_cast<std::size_t>(t)] = ri;
        const auto& f = mp.triangle(t);
        if (lab(f[0]) != lab(f[1]) && lab(f[1]) != lab(f[2]) && lab(f[0]) != lab(f[2])) poly.push_back(voronoi_vertex(t));
        const auto [u, w] = exit_edge(t, ri);
        if (u < 0) fail("extract_cvt: inconsistent region adjacency at triangle ", t, " (region ", r, ")");
        const auto& ed = mp.edge(mp.find_edge(u, w));
        if (!ed.is_boundary()) {
          t = ed.tris[0] == t ? ed.tris[1] : ed.tris[0];
          continue;
        }
        // follow the boundary backwards through the region
        poly.push_back(transition_vertex(u, w));
        const auto& loop = mp.boundary_loops()[static_cast<std::size_t>(bc.loop[static_cast<std::size_t>(u)])];
        const std::size_t n = loop.size();
        std::size_t p = static_cast<std::size_t>(bc.position[static_cast<std::size_t>(u)]);
        int last = u;
        for (std::size_t step = 0; step <= n; ++step) {
          const int v = loop[p];
          if (lab(v) != ri) break;
          if (mp.is_corner(v) || is_seed_vertex[static_cast<std::size_t>(v)]) poly.push_back(mesh_vertex(v));
          last = v;
          p = (p + n - 1) % n;
        }
        const int x = loop[p];
        if (lab(x) == ri) fail("extract_cvt: region ", r, " covers a whole boundary loop");
        poly.push_back(transition_vertex(x, last));
        const auto& be = mp.edge(mp.find_edge(x, last));
        t = be.tris[0];
      } while (t != start);
      cycles.push_back(std::move(poly));
    }
    if (cycles.empty()) continue;
    std::size_t best = 0;
    for (std::size_t c = 1; c < cycles.size(); ++c)
      if (cycles[c].size() > cycles[best].size()) best = c;
    if (cycles.size() > 1)
      out.warnings.push_back("region " + std::to_string(r) + " has " + std::to_string(cycles.size()) +
                             " boundary cycles; kept the longest");
    auto poly = std::move(cycles[best]);
    if (poly.size() < 3) {
      out.warnings.push_back("region " + std::to_string(r) + " gives a degenerate polygon; dropped");
      continue;
    }
    std::reverse(poly.begin(), poly.end());
    out.mesh.faces.push_back(std::move(poly));
    out.face_seed.push_back(ri);
  }
  // vertices created by dropped polygons are unreferenced: compact
  std::vector<int> remap(out.mesh.vertices.size(), -1);
  int next = 0;
  for (auto& f : out.mesh.faces)
    for (int& v : f) {
      if (remap[static_cast<std::size_t>(v)] < 0) remap[static_cast<std::size_t>(v)] = next++;
      v = remap[static_cast<std::size_t>(v)];
    }
  PolyMesh compact;
  compact.faces = std::move(out.mesh.faces);
  compact.vertices.resize(static_cast<std::size_t>(next));
  std::vector<Vec3> def(static_cast<std::size_t>(next));
  std::vector<char> corner(static_cast<std::size_t>(next));
  for (std::size_t v = 0; v < remap.size(); ++v) {
    const int k = remap[v];
    if (k < 0) continue;
    compact.vertices[static_cast<std::size_t>(k)] = out.mesh.vertices[v];
    def[static_cast<std::size_t>(k)] = out.deformed[v];
    corner[static_cast<std::size_t>(k)] = out.corner[v];
  }
  out.mesh = std::move(compact);
  out.deformed = std::move(def);
  out.corner = std::move(corner);
  poly_edges(out.mesh);  // validates manifoldness
  return out;
}

}  // namespace gridshell
