#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace topreg {

enum class BoundaryCondition { Dirichlet, Natural };

/// Uniform nodal/cell-centered discretization of the unit square/cube.
///
/// Nodes live at (i*h, j*h[, k*h]) with 0 <= i,j,k <= n; cells are the n^dim
/// voxels with centers at ((i+0.5)*h, ...).  Flattened fields are stored
/// component-major, each component in lexicographic order with the first
/// axis fastest.
struct GridSpec {
  int dim = 3;
  int n = 2;       // cells per axis
  double h = 0.5;  // spacing, 1/n
  BoundaryCondition bc = BoundaryCondition::Natural;

  GridSpec() = default;
  GridSpec(int dim_, int n_, BoundaryCondition bc_ = BoundaryCondition::Natural)
      : dim(dim_), n(n_), h(1.0 / n_), bc(bc_) {
    if (dim != 2 && dim != 3) throw std::invalid_argument("GridSpec: dim must be 2 or 3");
    if (n < 1) throw std::invalid_argument("GridSpec: n must be >= 1");
  }

  std::size_t nodes_per_axis() const { return static_cast<std::size_t>(n) + 1; }

  std::size_t node_count() const {
    std::size_t N = nodes_per_axis();
    return dim == 3 ? N * N * N : N * N;
  }

  std::size_t cell_count() const {
    std::size_t c = static_cast<std::size_t>(n);
    return dim == 3 ? c * c * c : c * c;
  }

  /// Number of unknowns of a nodal vector field (dim components).
  std::size_t dof_count() const { return static_cast<std::size_t>(dim) * node_count(); }

  /// Kuhn split: 6 tetrahedra per voxel in 3D, 2 triangles per pixel in 2D.
  std::size_t elems_per_cell() const { return dim == 3 ? 6u : 2u; }
  std::size_t elem_count() const { return elems_per_cell() * cell_count(); }

  /// Measure of one simplex: h^3/6 per tetrahedron, h^2/2 per triangle.
  double elem_measure() const { return dim == 3 ? h * h * h / 6.0 : h * h / 2.0; }

  /// Measure of one cell: the quadrature weight h^dim.
  double cell_measure() const { return dim == 3 ? h * h * h : h * h; }

  std::size_t node_index(int i, int j, int k = 0) const {
    std::size_t N = nodes_per_axis();
    return dim == 3 ? static_cast<std::size_t>(i) + N * (static_cast<std::size_t>(j) + N * k)
                    : static_cast<std::size_t>(i) + N * static_cast<std::size_t>(j);
  }

  std::size_t cell_index(int i, int j, int k = 0) const {
    std::size_t c = static_cast<std::size_t>(n);
    return dim == 3 ? static_cast<std::size_t>(i) + c * (static_cast<std::size_t>(j) + c * k)
                    : static_cast<std::size_t>(i) + c * static_cast<std::size_t>(j);
  }

  bool is_boundary_node(int i, int j, int k = 0) const {
    if (i == 0 || i == n || j == 0 || j == n) return true;
    return dim == 3 && (k == 0 || k == n);
  }

  bool operator==(const GridSpec& o) const { return dim == o.dim && n == o.n && bc == o.bc; }
};

inline void require_nodal(const GridSpec& g, const std::vector<double>& Y, const char* what) {
  if (Y.size() != g.dof_count())
    throw std::invalid_argument(std::string(what) + ": nodal field size mismatch, expected " +
                                std::to_string(g.dof_count()) + " got " + std::to_string(Y.size()));
}

inline void require_cellwise(const GridSpec& g, const std::vector<double>& v, const char* what) {
  if (v.size() != static_cast<std::size_t>(g.dim) * g.cell_count())
    throw std::invalid_argument(std::string(what) + ": cell point list size mismatch");
}

/// Nodal coordinates X in the flattened ordering: X^{i,j,k} = (ih, jh, kh).
inline std::vector<double> nodal_coordinates(const GridSpec& g) {
  std::size_t N = g.nodes_per_axis(), NN = g.node_count();
  std::vector<double> X(g.dof_count());
  if (g.dim == 3) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t i = 0; i < N; ++i, ++idx) {
          X[idx] = i * g.h;
          X[NN + idx] = j * g.h;
          X[2 * NN + idx] = k * g.h;
        }
  } else {
    std::size_t idx = 0;
    for (std::size_t j = 0; j < N; ++j)
      for (std::size_t i = 0; i < N; ++i, ++idx) {
        X[idx] = i * g.h;
        X[NN + idx] = j * g.h;
      }
  }
  return X;
}

/// Averaging operator P: nodal values -> cell-centered means of the 2^dim
/// surrounding corners, per component.
inline std::vector<double> average_to_cells(const GridSpec& g, const std::vector<double>& Y) {
  require_nodal(g, Y, "average_to_cells");
  std::size_t NN = g.node_count(), NC = g.cell_count();
  std::vector<double> out(static_cast<std::size_t>(g.dim) * NC);
  double w = g.dim == 3 ? 0.125 : 0.25;
  if (g.dim == 3) {
    for (int p = 0; p < 3; ++p) {
      const double* y = Y.data() + p * NN;
      double* o = out.data() + p * NC;
      std::size_t idx = 0;
      for (int k = 0; k < g.n; ++k)
        for (int j = 0; j < g.n; ++j)
          for (int i = 0; i < g.n; ++i, ++idx) {
            double s = 0;
            for (int c = 0; c < 8; ++c)
              s += y[g.node_index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))];
            o[idx] = w * s;
          }
    }
  } else {
    for (int p = 0; p < 2; ++p) {
      const double* y = Y.data() + p * NN;
      double* o = out.data() + p * NC;
      std::size_t idx = 0;
      for (int j = 0; j < g.n; ++j)
        for (int i = 0; i < g.n; ++i, ++idx) {
          o[idx] = w * (y[g.node_index(i, j)] + y[g.node_index(i + 1, j)] +
                        y[g.node_index(i, j + 1)] + y[g.node_index(i + 1, j + 1)]);
        }
    }
  }
  return out;
}

/// Exact adjoint P^T: scatter cell values back to the surrounding corners.
inline std::vector<double> average_to_cells_adjoint(const GridSpec& g, const std::vector<double>& V) {
  require_cellwise(g, V, "average_to_cells_adjoint");
  std::size_t NN = g.node_count(), NC = g.cell_count();
  std::vector<double> out(g.dof_count(), 0.0);
  double w = g.dim == 3 ? 0.125 : 0.25;
  if (g.dim == 3) {
    for (int p = 0; p < 3; ++p) {
      double* o = out.data() + p * NN;
      const double* v = V.data() + p * NC;
      std::size_t idx = 0;
      for (int k = 0; k < g.n; ++k)
        for (int j = 0; j < g.n; ++j)
          for (int i = 0; i < g.n; ++i, ++idx) {
            double s = w * v[idx];
            for (int c = 0; c < 8; ++c)
              o[g.node_index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1))] += s;
          }
    }
  } else {
    for (int p = 0; p < 2; ++p) {
      double* o = out.data() + p * NN;
      const double* v = V.data() + p * NC;
      std::size_t idx = 0;
      for (int j = 0; j < g.n; ++j)
        for (int i = 0; i < g.n; ++i, ++idx) {
          double s = w * v[idx];
          o[g.node_index(i, j)] += s;
          o[g.node_index(i + 1, j)] += s;
          o[g.node_index(i, j + 1)] += s;
          o[g.node_index(i + 1, j + 1)] += s;
        }
    }
  }
  return out;
}

/// Size of one directional difference block of A (rows of A_axis).
inline std::size_t diff_block_size(const GridSpec& g) {
  std::size_t N = g.nodes_per_axis(), c = static_cast<std::size_t>(g.n);
  return g.dim == 3 ? c * N * N : c * N;
}

inline std::size_t diff_total_size(const GridSpec& g) {
  return static_cast<std::size_t>(g.dim) * g.dim * diff_block_size(g);
}

/// Forward-difference operator A = I_dim (x) (A_1^T, ..., A_dim^T)^T applied
/// to a nodal field: all first differences (w_{+1} - w)/h per axis per
/// component.  Block layout: component-major, then axis blocks, each with the
/// Kronecker row ordering of the corresponding A_axis.
inline std::vector<double> forward_difference(const GridSpec& g, const std::vector<double>& W) {
  require_nodal(g, W, "forward_difference");
  std::size_t N = g.nodes_per_axis(), NN = g.node_count(), bs = diff_block_size(g);
  std::vector<double> out(diff_total_size(g));
  double ih = 1.0 / g.h;
  int n = g.n;
  if (g.dim == 3) {
    for (int p = 0; p < 3; ++p) {
      const double* w = W.data() + p * NN;
      double* o0 = out.data() + (p * 3 + 0) * bs;
      double* o1 = out.data() + (p * 3 + 1) * bs;
      double* o2 = out.data() + (p * 3 + 2) * bs;
      // A1 = I_N (x) I_N (x) d : rows (i,j,k), i < n, index i + n*(j + N*k)
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < n; ++i)
            o0[i + n * (j + N * k)] = ih * (w[g.node_index(i + 1, j, k)] - w[g.node_index(i, j, k)]);
      // A2 = I_N (x) d (x) I_N : rows (i,j,k), j < n, index i + N*(j + n*k)
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < static_cast<int>(N); ++i)
            o1[i + N * (j + static_cast<std::size_t>(n) * k)] =
                ih * (w[g.node_index(i, j + 1, k)] - w[g.node_index(i, j, k)]);
      // A3 = d (x) I_N (x) I_N : rows (i,j,k), k < n, index i + N*(j + N*k)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < static_cast<int>(N); ++i)
            o2[i + N * (j + N * static_cast<std::size_t>(k))] =
                ih * (w[g.node_index(i, j, k + 1)] - w[g.node_index(i, j, k)]);
    }
  } else {
    for (int p = 0; p < 2; ++p) {
      const double* w = W.data() + p * NN;
      double* o0 = out.data() + (p * 2 + 0) * bs;
      double* o1 = out.data() + (p * 2 + 1) * bs;
      for (int j = 0; j < static_cast<int>(N); ++j)
        for (int i = 0; i < n; ++i)
          o0[i + static_cast<std::size_t>(n) * j] = ih * (w[g.node_index(i + 1, j)] - w[g.node_index(i, j)]);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < static_cast<int>(N); ++i)
          o1[i + N * static_cast<std::size_t>(j)] = ih * (w[g.node_index(i, j + 1)] - w[g.node_index(i, j)]);
    }
  }
  return out;
}

/// Exact adjoint A^T: <A w, v> = <w, A^T v> for all w, v.
inline std::vector<double> forward_difference_adjoint(const GridSpec& g, const std::vector<double>& V) {
  if (V.size() != diff_total_size(g))
    throw std::invalid_argument("forward_difference_adjoint: input size mismatch");
  std::size_t N = g.nodes_per_axis(), NN = g.node_count(), bs = diff_block_size(g);
  std::vector<double> out(g.dof_count(), 0.0);
  double ih = 1.0 / g.h;
  int n = g.n;
  if (g.dim == 3) {
    for (int p = 0; p < 3; ++p) {
      double* o = out.data() + p * NN;
      const double* v0 = V.data() + (p * 3 + 0) * bs;
      const double* v1 = V.data() + (p * 3 + 1) * bs;
      const double* v2 = V.data() + (p * 3 + 2) * bs;
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < n; ++i) {
            double s = ih * v0[i + n * (j + N * k)];
            o[g.node_index(i + 1, j, k)] += s;
            o[g.node_index(i, j, k)] -= s;
          }
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < static_cast<int>(N); ++i) {
            double s = ih * v1[i + N * (j + static_cast<std::size_t>(n) * k)];
            o[g.node_index(i, j + 1, k)] += s;
            o[g.node_index(i, j, k)] -= s;
          }
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < static_cast<int>(N); ++i) {
            double s = ih * v2[i + N * (j + N * static_cast<std::size_t>(k))];
            o[g.node_index(i, j, k + 1)] += s;
            o[g.node_index(i, j, k)] -= s;
          }
    }
  } else {
    for (int p = 0; p < 2; ++p) {
      double* o = out.data() + p * NN;
      const double* v0 = V.data() + (p * 2 + 0) * bs;
      const double* v1 = V.data() + (p * 2 + 1) * bs;
      for (int j = 0; j < static_cast<int>(N); ++j)
        for (int i = 0; i < n; ++i) {
          double s = ih * v0[i + static_cast<std::size_t>(n) * j];
          o[g.node_index(i + 1, j)] += s;
          o[g.node_index(i, j)] -= s;
        }
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < static_cast<int>(N); ++i) {
          double s = ih * v1[i + N * static_cast<std::size_t>(j)];
          o[g.node_index(i, j + 1)] += s;
          o[g.node_index(i, j)] -= s;
        }
    }
  }
  return out;
}

/// Per-node boundary mask (1 on the boundary of [0,1]^dim, 0 inside).
inline std::vector<unsigned char> boundary_node_mask(const GridSpec& g) {
  std::size_t N = g.nodes_per_axis();
  std::vector<unsigned char> mask(g.node_count(), 0);
  if (g.dim == 3) {
    for (int k = 0; k < static_cast<int>(N); ++k)
      for (int j = 0; j < static_cast<int>(N); ++j)
        for (int i = 0; i < static_cast<int>(N); ++i)
          mask[g.node_index(i, j, k)] = g.is_boundary_node(i, j, k) ? 1 : 0;
  } else {
    for (int j = 0; j < static_cast<int>(N); ++j)
      for (int i = 0; i < static_cast<int>(N); ++i)
        mask[g.node_index(i, j)] = g.is_boundary_node(i, j) ? 1 : 0;
  }
  return mask;
}

}  // namespace topreg
