#pragma once

// Independent test oracles: dense operator assembly straight from the
// Kronecker formulas, per-element 4x4 interpolation solves, and central
// finite differences.  These never share code with the operators they check.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include "topreg/grid.hpp"
#include "topreg/hyperelastic.hpp"
#include "topreg/tets.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix identity(std::size_t n) {
  Matrix I(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) I[i][i] = 1.0;
  return I;
}

inline Matrix kron(const Matrix& A, const Matrix& B) {
  std::size_t ar = A.size(), ac = A[0].size(), br = B.size(), bc = B[0].size();
  Matrix C(ar * br, std::vector<double>(ac * bc, 0.0));
  for (std::size_t i = 0; i < ar; ++i)
    for (std::size_t j = 0; j < ac; ++j)
      for (std::size_t k = 0; k < br; ++k)
        for (std::size_t l = 0; l < bc; ++l) C[i * br + k][j * bc + l] = A[i][j] * B[k][l];
  return C;
}

// 1D forward difference (1/h) [[-1 1][..]] of shape n x (n+1).
inline Matrix diff1d(int n, double h) {
  Matrix D(n, std::vector<double>(n + 1, 0.0));
  for (int i = 0; i < n; ++i) {
    D[i][i] = -1.0 / h;
    D[i][i + 1] = 1.0 / h;
  }
  return D;
}

inline Matrix vstack(const std::vector<Matrix>& blocks) {
  std::size_t cols = blocks[0][0].size(), rows = 0;
  for (const auto& b : blocks) rows += b.size();
  Matrix C;
  C.reserve(rows);
  for (const auto& b : blocks)
    for (const auto& r : b) C.push_back(r);
  (void)cols;
  return C;
}

inline Matrix blockdiag(const Matrix& B, int copies) {
  std::size_t r = B.size(), c = B[0].size();
  Matrix C(r * copies, std::vector<double>(c * copies, 0.0));
  for (int k = 0; k < copies; ++k)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) C[k * r + i][k * c + j] = B[i][j];
  return C;
}

// Dense A = I_dim (x) (A_1^T .. A_dim^T)^T from the Kronecker formula.
inline Matrix dense_forward_difference(const topreg::GridSpec& g) {
  int n = g.n;
  Matrix I_N = identity(g.nodes_per_axis());
  Matrix D = diff1d(n, g.h);
  std::vector<Matrix> axes;
  if (g.dim == 3) {
    axes.push_back(kron(I_N, kron(I_N, D)));
    axes.push_back(kron(I_N, kron(D, I_N)));
    axes.push_back(kron(D, kron(I_N, I_N)));
  } else {
    axes.push_back(kron(I_N, D));
    axes.push_back(kron(D, I_N));
  }
  return blockdiag(vstack(axes), g.dim);
}

inline std::vector<double> matvec(const Matrix& A, const std::vector<double>& x) {
  std::vector<double> y(A.size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += A[i][j] * x[j];
  return y;
}

inline std::vector<double> mattvec(const Matrix& A, const std::vector<double>& y) {
  std::vector<double> x(A[0].size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += A[i][j] * y[i];
  return x;
}

// Gaussian elimination with partial pivoting, for the small oracle systems.
inline std::vector<double> solve_dense(Matrix A, std::vector<double> b) {
  std::size_t n = A.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
    std::swap(A[piv], A[col]);
    std::swap(b[piv], b[col]);
    if (A[col][col] == 0.0) throw std::runtime_error("solve_dense: singular");
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = A[r][col] / A[col][col];
      for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t r = n; r-- > 0;) {
    double s = b[r];
    for (std::size_t c = r + 1; c < n; ++c) s -= A[r][c] * x[c];
    x[r] = s / A[r][r];
  }
  return x;
}

// Per-element interpolation-system oracle: solve the (dim+1)x(dim+1) vertex
// system for the linear interpolant of one component and return its
// gradient coefficients.
inline std::vector<double> element_jacobian_row(const topreg::GridSpec& g, int ci, int cj, int ck,
                                                int type, const std::vector<double>& Y, int comp) {
  std::size_t NN = g.node_count();
  int nv = g.dim + 1;
  std::size_t nodes[4];
  topreg::element_nodes(g, ci, cj, ck, type, nodes);
  Matrix A(nv, std::vector<double>(nv, 1.0));
  std::vector<double> b(nv);
  for (int m = 0; m < nv; ++m) {
    // vertex coordinates from the node index
    std::size_t idx = nodes[m];
    int N = g.n + 1;
    int vi = static_cast<int>(idx % N);
    int vj = static_cast<int>((idx / N) % N);
    int vk = g.dim == 3 ? static_cast<int>(idx / (static_cast<std::size_t>(N) * N)) : 0;
    A[m][0] = vi * g.h;
    A[m][1] = vj * g.h;
    if (g.dim == 3) A[m][2] = vk * g.h;
    b[m] = Y[comp * NN + idx];
  }
  std::vector<double> coeff = solve_dense(A, b);  // (a_1..a_dim, b)
  coeff.resize(g.dim);
  return coeff;
}

// Central finite differences of a scalar functional.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double eps) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double orig = x[i];
    x[i] = orig + eps;
    double fp = f(x);
    x[i] = orig - eps;
    double fm = f(x);
    x[i] = orig;
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double rel_error_normwise(const std::vector<double>& approx, const std::vector<double>& ref) {
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    diff = std::max(diff, std::abs(approx[i] - ref[i]));
    scale = std::max(scale, std::abs(ref[i]));
  }
  return diff / (scale > 0 ? scale : 1.0);
}

// Smooth deterministic random fields: X plus a few low-frequency modes,
// scaled until every element determinant stays positive.
inline std::vector<double> random_feasible_field(const topreg::GridSpec& g, unsigned seed,
                                                 double amplitude = 0.05) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> X = topreg::nodal_coordinates(g);
  std::size_t NN = g.node_count();
  const double pi = 3.14159265358979323846;
  struct Mode {
    double c;
    int f[3];
    double phase[3];
  };
  std::vector<std::vector<Mode>> modes(g.dim);
  for (int p = 0; p < g.dim; ++p)
    for (int mcount = 0; mcount < 3; ++mcount) {
      Mode m;
      m.c = unif(rng);
      for (int q = 0; q < 3; ++q) {
        m.f[q] = 1 + (rng() % 2);
        m.phase[q] = unif(rng) * pi;
      }
      modes[p].push_back(m);
    }
  for (double amp = amplitude; amp > 1e-6; amp *= 0.5) {
    std::vector<double> Y = X;
    for (int p = 0; p < g.dim; ++p)
      for (std::size_t i = 0; i < NN; ++i) {
        double x[3] = {X[i], X[NN + i], g.dim == 3 ? X[2 * NN + i] : 0.0};
        double val = 0;
        for (const auto& m : modes[p]) {
          double t = m.c;
          for (int q = 0; q < g.dim; ++q) t *= std::sin(pi * m.f[q] * x[q] + m.phase[q]);
          val += t;
        }
        Y[p * NN + i] += amp * val;
      }
    std::vector<double> v = topreg::determinant_field(g, Y);
    double mn = v[0];
    for (double d : v) mn = std::min(mn, d);
    if (mn > 0.05) return Y;
  }
  throw std::runtime_error("random_feasible_field: could not reach feasibility");
}

// Same construction but vanishing on the domain boundary (Dirichlet-friendly,
// and it keeps deformed points away from the image-model clamp kinks).
inline std::vector<double> random_feasible_field_dirichlet(const topreg::GridSpec& g, unsigned seed,
                                                           double amplitude = 0.05) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> X = topreg::nodal_coordinates(g);
  std::size_t NN = g.node_count();
  const double pi = 3.14159265358979323846;
  for (double amp = amplitude; amp > 1e-7; amp *= 0.5) {
    std::mt19937 r2 = rng;
    std::vector<double> Y = X;
    for (int p = 0; p < g.dim; ++p) {
      double c1 = unif(r2), c2 = unif(r2);
      int f1 = 1 + (r2() % 2), f2 = 1 + (r2() % 2);
      for (std::size_t i = 0; i < NN; ++i) {
        double x[3] = {X[i], X[NN + i], g.dim == 3 ? X[2 * NN + i] : 0.0};
        double bump = 1.0;
        for (int q = 0; q < g.dim; ++q) bump *= std::sin(pi * x[q]);
        double val = c1 * std::sin(pi * f1 * x[0]) * std::cos(pi * f2 * x[1]) + c2;
        Y[p * NN + i] += amp * bump * val;
      }
    }
    std::vector<double> v = topreg::determinant_field(g, Y);
    double mn = v[0];
    for (double d : v) mn = std::min(mn, d);
    if (mn > 0.05) return Y;
  }
  throw std::runtime_error("random_feasible_field_dirichlet: could not reach feasibility");
}

}  // namespace oracle
