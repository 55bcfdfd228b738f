#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "topreg/grid.hpp"

namespace topreg {

// Kuhn split of a voxel along the main diagonal: element t corresponds to the
// order cone u_{perm[0]} >= u_{perm[1]} >= u_{perm[2]} in local coordinates
// u in [0,1]^dim, with the vertex path 0 -> e_{perm[0]} -> e_{perm[0]}+e_{perm[1]}
// -> (1,..,1).  The same split is used in every cell, so the per-element
// derivative operators are translation-invariant stencils, and factor-2
// refinements nest element-in-element.
inline constexpr int kTetPerm3[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                        {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
inline constexpr int kTriPerm2[2][2] = {{0, 1}, {1, 0}};

/// Local (di,dj,dk) offsets of the 4 path vertices of 3D element type t.
inline std::array<std::array<int, 3>, 4> tet_vertex_offsets(int t) {
  std::array<std::array<int, 3>, 4> v{};
  v[0] = {0, 0, 0};
  for (int m = 0; m < 3; ++m) {
    v[m + 1] = v[m];
    v[m + 1][kTetPerm3[t][m]] += 1;
  }
  return v;
}

/// Local (di,dj) offsets of the 3 path vertices of 2D element type t.
inline std::array<std::array<int, 2>, 3> tri_vertex_offsets(int t) {
  std::array<std::array<int, 2>, 3> v{};
  v[0] = {0, 0};
  for (int m = 0; m < 2; ++m) {
    v[m + 1] = v[m];
    v[m + 1][kTriPerm2[t][m]] += 1;
  }
  return v;
}

/// Flat node indices of the path vertices of element (cell, type).
inline void element_nodes(const GridSpec& g, int ci, int cj, int ck, int t, std::size_t* nodes) {
  if (g.dim == 3) {
    auto off = tet_vertex_offsets(t);
    for (int m = 0; m < 4; ++m)
      nodes[m] = g.node_index(ci + off[m][0], cj + off[m][1], ck + off[m][2]);
  } else {
    auto off = tri_vertex_offsets(t);
    for (int m = 0; m < 3; ++m) nodes[m] = g.node_index(ci + off[m][0], cj + off[m][1]);
  }
}

/// Per-element constant partials of the piecewise-linear interpolant of Y.
/// In 3D, d[3*p+q] holds dy_{p+1}/dx_{q+1} for every tetrahedron (length
/// 6 n^3, element index = 6*cell + type).  In 2D, d[2*p+q] with 2 triangles
/// per pixel.  Because each element is a path simplex, the partial along the
/// m-th path axis is just the difference of consecutive path vertices over h.
struct TetDerivatives {
  GridSpec grid;
  std::array<std::vector<double>, 9> d;  // first dim*dim entries used

  std::size_t elem_count() const { return grid.elem_count(); }
};

inline TetDerivatives tet_derivatives(const GridSpec& g, const std::vector<double>& Y) {
  require_nodal(g, Y, "tet_derivatives");
  TetDerivatives td;
  td.grid = g;
  std::size_t NE = g.elem_count(), NN = g.node_count();
  int nd = g.dim * g.dim;
  for (int l = 0; l < nd; ++l) td.d[l].assign(NE, 0.0);
  double ih = 1.0 / g.h;
  int n = g.n;
  if (g.dim == 3) {
    std::size_t nodes[4];
    std::size_t e = 0;
    for (int ck = 0; ck < n; ++ck)
      for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci)
          for (int t = 0; t < 6; ++t, ++e) {
            element_nodes(g, ci, cj, ck, t, nodes);
            for (int p = 0; p < 3; ++p) {
              const double* y = Y.data() + p * NN;
              for (int m = 0; m < 3; ++m)
                td.d[p * 3 + kTetPerm3[t][m]][e] = ih * (y[nodes[m + 1]] - y[nodes[m]]);
            }
          }
  } else {
    std::size_t nodes[3];
    std::size_t e = 0;
    for (int cj = 0; cj < n; ++cj)
      for (int ci = 0; ci < n; ++ci)
        for (int t = 0; t < 2; ++t, ++e) {
          element_nodes(g, ci, cj, 0, t, nodes);
          for (int p = 0; p < 2; ++p) {
            const double* y = Y.data() + p * NN;
            for (int m = 0; m < 2; ++m)
              td.d[p * 2 + kTriPerm2[t][m]][e] = ih * (y[nodes[m + 1]] - y[nodes[m]]);
          }
        }
  }
  return td;
}

/// Accumulates sum_l D_l^T g_l into a nodal field (exact adjoint of the
/// per-element derivative stencils).
inline void tet_derivatives_adjoint_add(const GridSpec& g,
                                        const std::array<const double*, 9>& coeff,
                                        std::vector<double>& out) {
  require_nodal(g, out, "tet_derivatives_adjoint_add");
  std::size_t NN = g.node_count();
  double ih = 1.0 / g.h;
  int n = g.n;
  if (g.dim == 3) {
    std::size_t nodes[4];
    std::size_t e = 0;
    for (int ck = 0; ck < n; ++ck)
      for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci)
          for (int t = 0; t < 6; ++t, ++e) {
            element_nodes(g, ci, cj, ck, t, nodes);
            for (int p = 0; p < 3; ++p) {
              double* o = out.data() + p * NN;
              for (int m = 0; m < 3; ++m) {
                double s = ih * coeff[p * 3 + kTetPerm3[t][m]][e];
                o[nodes[m + 1]] += s;
                o[nodes[m]] -= s;
              }
            }
          }
  } else {
    std::size_t nodes[3];
    std::size_t e = 0;
    for (int cj = 0; cj < n; ++cj)
      for (int ci = 0; ci < n; ++ci)
        for (int t = 0; t < 2; ++t, ++e) {
          element_nodes(g, ci, cj, 0, t, nodes);
          for (int p = 0; p < 2; ++p) {
            double* o = out.data() + p * NN;
            for (int m = 0; m < 2; ++m) {
              double s = ih * coeff[p * 2 + kTriPerm2[t][m]][e];
              o[nodes[m + 1]] += s;
              o[nodes[m]] -= s;
            }
          }
        }
  }
}

/// Located point: owning cell, element type within the cell, and the
/// barycentric path weights w (dim+1 of them) over the path vertices.
struct LocatedPoint {
  int cell[3] = {0, 0, 0};
  int type = 0;
  double w[4] = {0, 0, 0, 0};
  std::size_t elem = 0;
};

/// Locates x in the reference Kuhn triangulation.  Ties on the order cone are
/// broken toward the lexicographically smallest permutation, so location is
/// deterministic for points on shared faces (where the interpolant agrees).
inline LocatedPoint locate_point(const GridSpec& g, const double* x) {
  LocatedPoint lp;
  double u[3] = {0, 0, 0};
  for (int p = 0; p < g.dim; ++p) {
    if (x[p] < 0.0 || x[p] > 1.0) throw std::invalid_argument("locate_point: point outside domain");
    int c = static_cast<int>(std::floor(x[p] / g.h));
    if (c < 0) c = 0;
    if (c > g.n - 1) c = g.n - 1;
    lp.cell[p] = c;
    u[p] = x[p] / g.h - c;
  }
  if (g.dim == 3) {
    int best = -1;
    for (int t = 0; t < 6; ++t) {
      const int* pm = kTetPerm3[t];
      if (u[pm[0]] >= u[pm[1]] && u[pm[1]] >= u[pm[2]]) {
        best = t;
        break;
      }
    }
    lp.type = best;
    const int* pm = kTetPerm3[best];
    lp.w[0] = 1.0 - u[pm[0]];
    lp.w[1] = u[pm[0]] - u[pm[1]];
    lp.w[2] = u[pm[1]] - u[pm[2]];
    lp.w[3] = u[pm[2]];
    lp.elem = g.cell_index(lp.cell[0], lp.cell[1], lp.cell[2]) * 6 + best;
  } else {
    int best = (u[0] >= u[1]) ? 0 : 1;
    lp.type = best;
    const int* pm = kTriPerm2[best];
    lp.w[0] = 1.0 - u[pm[0]];
    lp.w[1] = u[pm[0]] - u[pm[1]];
    lp.w[2] = u[pm[1]];
    lp.elem = g.cell_index(lp.cell[0], lp.cell[1]) * 2 + best;
  }
  return lp;
}

/// Evaluates the piecewise-linear interpolant of a nodal field Y at x
/// (the same basis that defines the energies and the determinant field).
inline void eval_piecewise_linear(const GridSpec& g, const std::vector<double>& Y, const double* x,
                                  double* out) {
  LocatedPoint lp = locate_point(g, x);
  std::size_t NN = g.node_count();
  std::size_t nodes[4];
  element_nodes(g, lp.cell[0], lp.cell[1], lp.cell[2], lp.type, nodes);
  int nv = g.dim + 1;
  for (int p = 0; p < g.dim; ++p) {
    const double* y = Y.data() + p * NN;
    double s = 0;
    for (int m = 0; m < nv; ++m) s += lp.w[m] * y[nodes[m]];
    out[p] = s;
  }
}

}  // namespace topreg
