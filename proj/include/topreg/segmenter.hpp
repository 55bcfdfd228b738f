#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "topreg/fitting.hpp"
#include "topreg/grid.hpp"
#include "topreg/mc_tables.hpp"
#include "topreg/tets.hpp"

namespace topreg {

/// Indexed boundary geometry: a polyline soup in 2D, a triangle soup in 3D,
/// with shared vertices.
struct Geometry {
  int dim = 2;
  std::vector<double> vertices;               // interleaved coordinates
  std::vector<std::array<int, 2>> segments;   // 2D
  std::vector<std::array<int, 3>> triangles;  // 3D

  std::size_t vertex_count() const { return dim ? vertices.size() / dim : 0; }
};

namespace detail {

// Vertices are deduplicated by the lattice edge they sit on.
struct EdgeVertexMap {
  std::unordered_map<std::uint64_t, int> map;
  Geometry* geom;

  int get(std::uint64_t key, double px, double py, double pz, int dim) {
    auto it = map.find(key);
    if (it != map.end()) return it->second;
    int idx = static_cast<int>(geom->vertex_count());
    geom->vertices.push_back(px);
    geom->vertices.push_back(py);
    if (dim == 3) geom->vertices.push_back(pz);
    map.emplace(key, idx);
    return idx;
  }
};

}  // namespace detail

/// Marching squares on the region indicator sampled at cell centers (plus a
/// zero ghost ring), iso level 0.5.  Ambiguous cases are resolved with the
/// asymptotic decider; the exact-tie case (binary data) separates the
/// diagonal corners.
inline Geometry extract_boundary_2d(const PriorPartition& prior, int region) {
  const GridSpec& g = prior.grid;
  int np = g.n + 2;  // padded lattice points per axis
  auto value = [&](int i, int j) -> double {
    if (i < 1 || j < 1 || i > g.n || j > g.n) return 0.0;
    return prior.labels[g.cell_index(i - 1, j - 1)] == region ? 1.0 : 0.0;
  };
  auto coord = [&](int i) { return (i - 0.5) * g.h; };
  const double iso = 0.5;

  Geometry geom;
  geom.dim = 2;
  detail::EdgeVertexMap vm{{}, &geom};
  auto edge_vertex = [&](int ai, int aj, int bi, int bj) -> int {
    double va = value(ai, aj), vb = value(bi, bj);
    double t = (iso - va) / (vb - va);
    int axis = (aj == bj) ? 0 : 1;
    std::uint64_t key =
        (static_cast<std::uint64_t>(ai + np * aj) << 1) | static_cast<std::uint64_t>(axis);
    double px = coord(ai) + (axis == 0 ? t * g.h : 0.0);
    double py = coord(aj) + (axis == 1 ? t * g.h : 0.0);
    return vm.get(key, px, py, 0.0, 2);
  };

  for (int j = 0; j <= g.n; ++j)
    for (int i = 0; i <= g.n; ++i) {
      double f0 = value(i, j), f1 = value(i + 1, j), f2 = value(i + 1, j + 1), f3 = value(i, j + 1);
      int idx = (f0 > iso ? 1 : 0) | (f1 > iso ? 2 : 0) | (f2 > iso ? 4 : 0) | (f3 > iso ? 8 : 0);
      if (idx == 0 || idx == 15) continue;
      // edge endpoints: e0 bottom, e1 right, e2 top, e3 left
      auto e0 = [&] { return edge_vertex(i, j, i + 1, j); };
      auto e1 = [&] { return edge_vertex(i + 1, j, i + 1, j + 1); };
      auto e2 = [&] { return edge_vertex(i, j + 1, i + 1, j + 1); };
      auto e3 = [&] { return edge_vertex(i, j, i, j + 1); };
      auto emit = [&](int a, int b) { geom.segments.push_back({a, b}); };
      switch (idx) {
        case 1: emit(e3(), e0()); break;
        case 2: emit(e0(), e1()); break;
        case 3: emit(e3(), e1()); break;
        case 4: emit(e1(), e2()); break;
        case 6: emit(e0(), e2()); break;
        case 7: emit(e3(), e2()); break;
        case 8: emit(e2(), e3()); break;
        case 9: emit(e0(), e2()); break;
        case 11: emit(e1(), e2()); break;
        case 12: emit(e1(), e3()); break;
        case 13: emit(e0(), e1()); break;
        case 14: emit(e3(), e0()); break;
        case 5: {  // c0,c2 inside
          double denom = f0 + f2 - f1 - f3;
          double center = denom != 0.0 ? (f0 * f2 - f1 * f3) / denom : iso;
          if (center > iso) {
            emit(e0(), e1());
            emit(e2(), e3());
          } else {
            emit(e3(), e0());
            emit(e1(), e2());
          }
          break;
        }
        case 10: {  // c1,c3 inside
          double denom = f0 + f2 - f1 - f3;
          double center = denom != 0.0 ? (f0 * f2 - f1 * f3) / denom : iso;
          if (center > iso) {
            emit(e3(), e0());
            emit(e1(), e2());
          } else {
            emit(e0(), e1());
            emit(e2(), e3());
          }
          break;
        }
        default: break;
      }
    }
  return geom;
}

/// Marching cubes (fixed 256-case table) on the region indicator with a zero
/// ghost ring, iso level 0.5.
inline Geometry extract_boundary_3d(const PriorPartition& prior, int region) {
  const GridSpec& g = prior.grid;
  int np = g.n + 2;
  auto value = [&](int i, int j, int k) -> double {
    if (i < 1 || j < 1 || k < 1 || i > g.n || j > g.n || k > g.n) return 0.0;
    return prior.labels[g.cell_index(i - 1, j - 1, k - 1)] == region ? 1.0 : 0.0;
  };
  auto coord = [&](int i) { return (i - 0.5) * g.h; };
  const double iso = 0.5;

  Geometry geom;
  geom.dim = 3;
  detail::EdgeVertexMap vm{{}, &geom};

  int corner[8][3];
  double fv[8];
  int everts[12];
  for (int k = 0; k <= g.n; ++k)
    for (int j = 0; j <= g.n; ++j)
      for (int i = 0; i <= g.n; ++i) {
        int idx = 0;
        for (int c = 0; c < 8; ++c) {
          corner[c][0] = i + kMcCornerOffset[c][0];
          corner[c][1] = j + kMcCornerOffset[c][1];
          corner[c][2] = k + kMcCornerOffset[c][2];
          fv[c] = value(corner[c][0], corner[c][1], corner[c][2]);
          if (fv[c] > iso) idx |= 1 << c;
        }
        unsigned short eb = kMcEdgeTable[idx];
        if (eb == 0) continue;
        for (int e = 0; e < 12; ++e) {
          if (!(eb & (1u << e))) continue;
          int a = kMcEdgeCorners[e][0], b = kMcEdgeCorners[e][1];
          int axis = 0;
          for (int d = 0; d < 3; ++d)
            if (corner[a][d] != corner[b][d]) axis = d;
          const int* lo = corner[a][axis] < corner[b][axis] ? corner[a] : corner[b];
          double vl = value(lo[0], lo[1], lo[2]);
          double vh = (lo == corner[a]) ? fv[b] : fv[a];
          double t = (iso - vl) / (vh - vl);
          std::uint64_t flat = static_cast<std::uint64_t>(lo[0]) +
                               static_cast<std::uint64_t>(np) * (lo[1] + static_cast<std::uint64_t>(np) * lo[2]);
          std::uint64_t key = flat * 3 + axis;
          double p[3] = {coord(lo[0]), coord(lo[1]), coord(lo[2])};
          p[axis] += t * g.h;
          everts[e] = vm.get(key, p[0], p[1], p[2], 3);
        }
        const signed char* row = kMcTriTable[idx];
        for (int t3 = 0; row[t3] != -1; t3 += 3)
          geom.triangles.push_back({everts[row[t3]], everts[row[t3 + 1]], everts[row[t3 + 2]]});
      }
  return geom;
}

/// Closed boundary (contours / surfaces) of one region of the prior, in
/// reference coordinates.
inline Geometry extract_boundary(const PriorPartition& prior, int region) {
  if (region < 1 || region > prior.m) throw std::invalid_argument("extract_boundary: bad region id");
  return prior.grid.dim == 3 ? extract_boundary_3d(prior, region)
                             : extract_boundary_2d(prior, region);
}

/// Maps geometry vertices through the piecewise-linear interpolant of Y;
/// connectivity is unchanged.  Input vertices must lie in the unit domain.
inline Geometry warp_geometry(const GridSpec& g, const std::vector<double>& Y, const Geometry& in) {
  require_nodal(g, Y, "warp_geometry");
  Geometry out = in;
  std::size_t nv = in.vertex_count();
  double x[3], y[3];
  for (std::size_t v = 0; v < nv; ++v) {
    for (int p = 0; p < g.dim; ++p) {
      double c = in.vertices[v * g.dim + p];
      if (c < -1e-12 || c > 1.0 + 1e-12) throw std::invalid_argument("warp_geometry: vertex outside domain");
      x[p] = std::clamp(c, 0.0, 1.0);
    }
    eval_piecewise_linear(g, Y, x, y);
    for (int p = 0; p < g.dim; ++p) out.vertices[v * g.dim + p] = y[p];
  }
  return out;
}

/// Number of connected components of the geometry (union-find on shared
/// vertices).
inline int geometry_components(const Geometry& geom) {
  std::size_t nv = geom.vertex_count();
  std::vector<int> parent(nv);
  for (std::size_t i = 0; i < nv; ++i) parent[i] = static_cast<int>(i);
  std::vector<int> rank(nv, 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank[a] < rank[b]) std::swap(a, b);
    parent[b] = a;
    if (rank[a] == rank[b]) rank[a]++;
  };
  for (const auto& s : geom.segments) unite(s[0], s[1]);
  for (const auto& t : geom.triangles) {
    unite(t[0], t[1]);
    unite(t[1], t[2]);
  }
  int count = 0;
  for (std::size_t i = 0; i < nv; ++i)
    if (find(static_cast<int>(i)) == static_cast<int>(i)) count++;
  return count;
}

/// V - E + F of a triangle mesh (edges counted once).
inline long euler_characteristic(const Geometry& geom) {
  if (geom.dim != 3) return 0;
  std::unordered_map<std::uint64_t, char> edges;
  auto add = [&](int a, int b) {
    std::uint64_t lo = static_cast<std::uint64_t>(std::min(a, b));
    std::uint64_t hi = static_cast<std::uint64_t>(std::max(a, b));
    edges.emplace((lo << 32) | hi, 1);
  };
  for (const auto& t : geom.triangles) {
    add(t[0], t[1]);
    add(t[1], t[2]);
    add(t[2], t[0]);
  }
  return static_cast<long>(geom.vertex_count()) - static_cast<long>(edges.size()) +
         static_cast<long>(geom.triangles.size());
}

/// Cell x receives the label of the reference element whose deformed image
/// contains x.  Because v(Y) > 0, the deformed elements tile injectively and
/// point location is well defined; the lowest element index wins ties on
/// shared faces.  Cells outside the deformed domain fall to label 1.
inline std::vector<int> rasterize_mask(const GridSpec& g, const std::vector<double>& Y,
                                       const PriorPartition& prior) {
  require_nodal(g, Y, "rasterize_mask");
  if (prior.grid.n != g.n || prior.grid.dim != g.dim)
    throw std::invalid_argument("rasterize_mask: prior grid mismatch");
  std::size_t NC = g.cell_count(), NN = g.node_count(), NE = g.elem_count();
  int nv = g.dim + 1;
  int epc = static_cast<int>(g.elems_per_cell());

  // Deformed vertex coordinates per element, plus AABB -> candidate cells.
  std::vector<std::size_t> enodes(NE * nv);
  {
    std::size_t nodes[4];
    std::size_t e = 0;
    if (g.dim == 3) {
      for (int ck = 0; ck < g.n; ++ck)
        for (int cj = 0; cj < g.n; ++cj)
          for (int ci = 0; ci < g.n; ++ci)
            for (int t = 0; t < 6; ++t, ++e) {
              element_nodes(g, ci, cj, ck, t, nodes);
              for (int m = 0; m < 4; ++m) enodes[e * 4 + m] = nodes[m];
            }
    } else {
      for (int cj = 0; cj < g.n; ++cj)
        for (int ci = 0; ci < g.n; ++ci)
          for (int t = 0; t < 2; ++t, ++e) {
            element_nodes(g, ci, cj, 0, t, nodes);
            for (int m = 0; m < 3; ++m) enodes[e * 3 + m] = nodes[m];
          }
    }
  }

  auto cell_range = [&](double lo, double hi, int& c0, int& c1) {
    // cell centers at (c + 0.5) h
    c0 = static_cast<int>(std::ceil(lo / g.h - 0.5 - 1e-12));
    c1 = static_cast<int>(std::floor(hi / g.h - 0.5 + 1e-12));
    c0 = std::max(c0, 0);
    c1 = std::min(c1, g.n - 1);
  };

  // Count, then fill candidate element lists per cell (elements ascending).
  std::vector<std::uint32_t> counts(NC + 1, 0);
  auto for_covered_cells = [&](std::size_t e, auto&& fn) {
    double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
    for (int m = 0; m < nv; ++m) {
      std::size_t node = enodes[e * nv + m];
      for (int p = 0; p < g.dim; ++p) {
        double c = Y[p * NN + node];
        lo[p] = std::min(lo[p], c);
        hi[p] = std::max(hi[p], c);
      }
    }
    int r0[3] = {0, 0, 0}, r1[3] = {-1, -1, -1};
    for (int p = 0; p < g.dim; ++p) cell_range(lo[p], hi[p], r0[p], r1[p]);
    if (g.dim == 3) {
      for (int k = r0[2]; k <= r1[2]; ++k)
        for (int j = r0[1]; j <= r1[1]; ++j)
          for (int i = r0[0]; i <= r1[0]; ++i) fn(g.cell_index(i, j, k));
    } else {
      for (int j = r0[1]; j <= r1[1]; ++j)
        for (int i = r0[0]; i <= r1[0]; ++i) fn(g.cell_index(i, j));
    }
  };
  for (std::size_t e = 0; e < NE; ++e)
    for_covered_cells(e, [&](std::size_t c) { counts[c + 1]++; });
  for (std::size_t c = 0; c < NC; ++c) counts[c + 1] += counts[c];
  std::vector<std::uint32_t> cand(counts[NC]);
  {
    std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
    for (std::size_t e = 0; e < NE; ++e)
      for_covered_cells(e, [&](std::size_t c) { cand[fill[c]++] = static_cast<std::uint32_t>(e); });
  }

  auto barycentric_inside = [&](std::size_t e, const double* x, double tol) -> bool {
    const std::size_t* nd = &enodes[e * nv];
    if (g.dim == 3) {
      double v0[3], E[3][3], r[3];
      for (int p = 0; p < 3; ++p) {
        v0[p] = Y[p * NN + nd[0]];
        for (int m = 0; m < 3; ++m) E[p][m] = Y[p * NN + nd[m + 1]] - v0[p];
        r[p] = x[p] - v0[p];
      }
      double det = E[0][0] * (E[1][1] * E[2][2] - E[1][2] * E[2][1]) -
                   E[0][1] * (E[1][0] * E[2][2] - E[1][2] * E[2][0]) +
                   E[0][2] * (E[1][0] * E[2][1] - E[1][1] * E[2][0]);
      if (det == 0.0) return false;
      double b0 = (r[0] * (E[1][1] * E[2][2] - E[1][2] * E[2][1]) -
                   E[0][1] * (r[1] * E[2][2] - E[1][2] * r[2]) +
                   E[0][2] * (r[1] * E[2][1] - E[1][1] * r[2])) / det;
      double b1 = (E[0][0] * (r[1] * E[2][2] - E[1][2] * r[2]) -
                   r[0] * (E[1][0] * E[2][2] - E[1][2] * E[2][0]) +
                   E[0][2] * (E[1][0] * r[2] - r[1] * E[2][0])) / det;
      double b2 = (E[0][0] * (E[1][1] * r[2] - r[1] * E[2][1]) -
                   E[0][1] * (E[1][0] * r[2] - r[1] * E[2][0]) +
                   r[0] * (E[1][0] * E[2][1] - E[1][1] * E[2][0])) / det;
      return b0 >= -tol && b1 >= -tol && b2 >= -tol && b0 + b1 + b2 <= 1.0 + tol;
    }
    double v0[2], E00, E01, E10, E11, r0, r1;
    for (int p = 0; p < 2; ++p) v0[p] = Y[p * NN + nd[0]];
    E00 = Y[0 * NN + nd[1]] - v0[0];
    E01 = Y[0 * NN + nd[2]] - v0[0];
    E10 = Y[1 * NN + nd[1]] - v0[1];
    E11 = Y[1 * NN + nd[2]] - v0[1];
    r0 = x[0] - v0[0];
    r1 = x[1] - v0[1];
    double det = E00 * E11 - E01 * E10;
    if (det == 0.0) return false;
    double b0 = (r0 * E11 - E01 * r1) / det;
    double b1 = (E00 * r1 - r0 * E10) / det;
    return b0 >= -tol && b1 >= -tol && b0 + b1 <= 1.0 + tol;
  };

  std::vector<int> mask(NC, 0);
  double x[3];
  for (std::size_t c = 0; c < NC; ++c) {
    std::size_t ci = c % g.n, cj = (c / g.n) % g.n, ck = g.dim == 3 ? c / (static_cast<std::size_t>(g.n) * g.n) : 0;
    x[0] = (ci + 0.5) * g.h;
    x[1] = (cj + 0.5) * g.h;
    x[2] = (ck + 0.5) * g.h;
    int found = 0;
    for (double tol : {1e-13, 1e-9}) {
      for (std::uint32_t q = counts[c]; q < counts[c + 1]; ++q) {
        if (barycentric_inside(cand[q], x, tol)) {
          found = prior.labels[cand[q] / epc];
          break;
        }
      }
      if (found) break;
    }
    mask[c] = found ? found : 1;
  }
  return mask;
}

/// Per-region connected-component count (8-connectivity in 2D,
/// 26-connectivity in 3D).
inline int connected_components(const GridSpec& g, const std::vector<int>& labels, int region) {
  if (labels.size() != g.cell_count()) throw std::invalid_argument("connected_components: size");
  std::vector<char> visited(labels.size(), 0);
  int comps = 0;
  std::vector<std::size_t> stack;
  int n = g.n;
  for (std::size_t start = 0; start < labels.size(); ++start) {
    if (visited[start] || labels[start] != region) continue;
    comps++;
    visited[start] = 1;
    stack.assign(1, start);
    while (!stack.empty()) {
      std::size_t c = stack.back();
      stack.pop_back();
      int ci = static_cast<int>(c % n), cj = static_cast<int>((c / n) % n);
      int ck = g.dim == 3 ? static_cast<int>(c / (static_cast<std::size_t>(n) * n)) : 0;
      int dk0 = g.dim == 3 ? -1 : 0, dk1 = g.dim == 3 ? 1 : 0;
      for (int dk = dk0; dk <= dk1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0 && dk == 0) continue;
            int i = ci + di, j = cj + dj, k = ck + dk;
            if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || (g.dim == 3 && k >= n)) continue;
            std::size_t nc = g.cell_index(i, j, k);
            if (!visited[nc] && labels[nc] == region) {
              visited[nc] = 1;
              stack.push_back(nc);
            }
          }
    }
  }
  return comps;
}

/// Dice overlap 2|A^B| / (|A|+|B|) of one region between two label maps.
inline double dice_coefficient(const std::vector<int>& a, const std::vector<int>& b, int region) {
  if (a.size() != b.size()) throw std::invalid_argument("dice_coefficient: size mismatch");
  std::size_t na = 0, nb = 0, ni = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    bool ia = a[c] == region, ib = b[c] == region;
    na += ia;
    nb += ib;
    ni += ia && ib;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

struct TopologyReport {
  std::vector<int> prior_components;  // per region, index l-1
  std::vector<int> mask_components;
  std::vector<double> dice;  // vs ground truth; empty when none given
  bool components_match = false;
};

inline TopologyReport topology_report(const GridSpec& g, const std::vector<int>& mask,
                                      const PriorPartition& prior,
                                      const std::vector<int>* ground_truth = nullptr) {
  TopologyReport rep;
  rep.components_match = true;
  for (int l = 1; l <= prior.m; ++l) {
    rep.prior_components.push_back(connected_components(g, prior.labels, l));
    rep.mask_components.push_back(connected_components(g, mask, l));
    if (rep.prior_components.back() != rep.mask_components.back()) rep.components_match = false;
  }
  if (ground_truth) {
    for (int l = 1; l <= prior.m; ++l) rep.dice.push_back(dice_coefficient(mask, *ground_truth, l));
  }
  return rep;
}

/// End-to-end post-processing artifact.
struct SegmentationResult {
  std::vector<int> mask;
  std::vector<Geometry> boundaries;  // warped, one per region carrying a boundary
  std::vector<int> boundary_regions; // region id per geometry
  double det_min = 0, det_max = 0;
  TopologyReport report;
};

/// Transports the prior through Y: rasterized mask, warped region boundaries,
/// and topology metrics.  Boundaries are extracted for every region except
/// the background (lowest id) when more than one region exists.
inline SegmentationResult make_segmentation_result(const GridSpec& g, const std::vector<double>& Y,
                                                   const PriorPartition& prior, double det_min,
                                                   double det_max,
                                                   const std::vector<int>* ground_truth = nullptr) {
  SegmentationResult res;
  res.det_min = det_min;
  res.det_max = det_max;
  res.mask = rasterize_mask(g, Y, prior);
  int first_region = prior.m == 1 ? 1 : 2;
  for (int l = first_region; l <= prior.m; ++l) {
    Geometry ref = extract_boundary(prior, l);
    res.boundaries.push_back(warp_geometry(g, Y, ref));
    res.boundary_regions.push_back(l);
  }
  res.report = topology_report(g, res.mask, prior, ground_truth);
  return res;
}

}  // namespace topreg
