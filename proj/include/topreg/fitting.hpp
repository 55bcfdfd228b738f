#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "topreg/grid.hpp"

namespace topreg {

/// Region intensities c_1..c_m (jointly optimized with the transformation).
using IntensityConstants = std::vector<double>;

/// Cell-centered label map defining the prior partition Omega_1..Omega_m.
/// Labels are 1..m with no gaps and every region nonempty, which makes the
/// selection matrix M full row rank and M^T M = diag(counts).
struct PriorPartition {
  GridSpec grid;
  int m = 0;
  std::vector<int> labels;          // one label per cell, 1..m
  std::vector<std::int64_t> counts; // per-region cell counts
};

inline PriorPartition build_prior(const GridSpec& g, const std::vector<int>& labels) {
  if (labels.empty() || labels.size() != g.cell_count())
    throw std::invalid_argument("build_prior: label count mismatch");
  int m = 0;
  for (int l : labels) {
    if (l < 1) throw std::invalid_argument("build_prior: labels must be >= 1");
    m = std::max(m, l);
  }
  std::vector<std::int64_t> counts(m, 0);
  for (int l : labels) counts[l - 1]++;
  for (int l = 0; l < m; ++l)
    if (counts[l] == 0)
      throw std::invalid_argument("build_prior: empty region (gap at label " + std::to_string(l + 1) + ")");
  PriorPartition p;
  p.grid = g;
  p.m = m;
  p.labels = labels;
  p.counts = std::move(counts);
  return p;
}

inline void require_constants(const PriorPartition& prior, const IntensityConstants& C,
                              const char* what) {
  if (static_cast<int>(C.size()) != prior.m)
    throw std::invalid_argument(std::string(what) + ": intensity constants size mismatch");
  for (double c : C)
    if (!std::isfinite(c)) throw std::invalid_argument(std::string(what) + ": non-finite constant");
}

/// (h^dim/2) sum_cells (warped_c - c_label)^2.
inline double fit_energy(const GridSpec& g, const std::vector<double>& warped,
                         const PriorPartition& prior, const IntensityConstants& C) {
  if (warped.size() != g.cell_count()) throw std::invalid_argument("fit_energy: warped size mismatch");
  require_constants(prior, C, "fit_energy");
  double sum = 0;
  for (std::size_t c = 0; c < warped.size(); ++c) {
    double r = warped[c] - C[prior.labels[c] - 1];
    sum += r * r;
  }
  return 0.5 * g.cell_measure() * sum;
}

/// Exact gradient of fit_energy w.r.t. (Y, C):
///   grad_Y = h^dim P^T I_PY^T (I(PY) - MC),  grad_C = -h^dim M^T (I(PY) - MC).
/// warped_grad is the component-major image gradient at the deformed cell
/// points (the block rows of I_PY).  Contributions are added to the outputs.
inline void fit_gradient_add(const GridSpec& g, const std::vector<double>& warped,
                             const std::vector<double>& warped_grad, const PriorPartition& prior,
                             const IntensityConstants& C, std::vector<double>& grad_Y,
                             std::vector<double>& grad_C) {
  std::size_t NC = g.cell_count(), NN = g.node_count();
  if (warped.size() != NC || warped_grad.size() != static_cast<std::size_t>(g.dim) * NC)
    throw std::invalid_argument("fit_gradient_add: size mismatch");
  require_nodal(g, grad_Y, "fit_gradient_add");
  require_constants(prior, C, "fit_gradient_add");
  if (grad_C.size() != static_cast<std::size_t>(prior.m))
    throw std::invalid_argument("fit_gradient_add: grad_C size mismatch");
  double hd = g.cell_measure();
  double w = g.dim == 3 ? 0.125 : 0.25;
  int n = g.n;
  if (g.dim == 3) {
    std::size_t c = 0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i, ++c) {
          double r = warped[c] - C[prior.labels[c] - 1];
          grad_C[prior.labels[c] - 1] -= hd * r;
          for (int p = 0; p < 3; ++p) {
            double s = hd * w * warped_grad[p * NC + c] * r;
            if (s == 0.0) continue;
            double* o = grad_Y.data() + p * NN;
            for (int v = 0; v < 8; ++v)
              o[g.node_index(i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1))] += s;
          }
        }
  } else {
    std::size_t c = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++c) {
        double r = warped[c] - C[prior.labels[c] - 1];
        grad_C[prior.labels[c] - 1] -= hd * r;
        for (int p = 0; p < 2; ++p) {
          double s = hd * w * warped_grad[p * NC + c] * r;
          if (s == 0.0) continue;
          double* o = grad_Y.data() + p * NN;
          o[g.node_index(i, j)] += s;
          o[g.node_index(i + 1, j)] += s;
          o[g.node_index(i, j + 1)] += s;
          o[g.node_index(i + 1, j + 1)] += s;
        }
      }
  }
}

/// Applies the 2x2-block Gauss-Newton operator of the fitting term,
///   h^dim [ P^T I_PY^T I_PY P   -P^T I_PY^T M ]
///         [ -M^T I_PY P          M^T M        ],
/// to (w_Y, w_C), matrix-free; results are added to (out_Y, out_C).
inline void fit_gn_apply_add(const GridSpec& g, const std::vector<double>& warped_grad,
                             const PriorPartition& prior, const std::vector<double>& w_Y,
                             const std::vector<double>& w_C, std::vector<double>& out_Y,
                             std::vector<double>& out_C) {
  std::size_t NC = g.cell_count(), NN = g.node_count();
  if (warped_grad.size() != static_cast<std::size_t>(g.dim) * NC)
    throw std::invalid_argument("fit_gn_apply_add: gradient rows size mismatch");
  require_nodal(g, w_Y, "fit_gn_apply_add");
  require_nodal(g, out_Y, "fit_gn_apply_add");
  if (w_C.size() != static_cast<std::size_t>(prior.m) || out_C.size() != w_C.size())
    throw std::invalid_argument("fit_gn_apply_add: C block size mismatch");
  double hd = g.cell_measure();
  double w = g.dim == 3 ? 0.125 : 0.25;
  int n = g.n;
  if (g.dim == 3) {
    std::size_t c = 0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i, ++c) {
          // t = (I_PY P w_Y)_c - (M w_C)_c
          double t = -w_C[prior.labels[c] - 1];
          for (int p = 0; p < 3; ++p) {
            double gp = warped_grad[p * NC + c];
            if (gp == 0.0) continue;
            const double* wp = w_Y.data() + p * NN;
            double mean = 0;
            for (int v = 0; v < 8; ++v)
              mean += wp[g.node_index(i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1))];
            t += gp * w * mean;
          }
          out_C[prior.labels[c] - 1] -= hd * t;
          for (int p = 0; p < 3; ++p) {
            double s = hd * w * warped_grad[p * NC + c] * t;
            if (s == 0.0) continue;
            double* o = out_Y.data() + p * NN;
            for (int v = 0; v < 8; ++v)
              o[g.node_index(i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1))] += s;
          }
        }
  } else {
    std::size_t c = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++c) {
        double t = -w_C[prior.labels[c] - 1];
        for (int p = 0; p < 2; ++p) {
          double gp = warped_grad[p * NC + c];
          if (gp == 0.0) continue;
          const double* wp = w_Y.data() + p * NN;
          t += gp * w *
               (wp[g.node_index(i, j)] + wp[g.node_index(i + 1, j)] + wp[g.node_index(i, j + 1)] +
                wp[g.node_index(i + 1, j + 1)]);
        }
        out_C[prior.labels[c] - 1] -= hd * t;
        for (int p = 0; p < 2; ++p) {
          double s = hd * w * warped_grad[p * NC + c] * t;
          if (s == 0.0) continue;
          double* o = out_Y.data() + p * NN;
          o[g.node_index(i, j)] += s;
          o[g.node_index(i + 1, j)] += s;
          o[g.node_index(i, j + 1)] += s;
          o[g.node_index(i + 1, j + 1)] += s;
        }
      }
  }
}

/// Per-region mean of the warped intensities; the exact minimizer of
/// fit_energy in C for fixed Y.
inline IntensityConstants initial_constants(const std::vector<double>& warped,
                                            const PriorPartition& prior) {
  if (warped.size() != prior.labels.size())
    throw std::invalid_argument("initial_constants: warped size mismatch");
  IntensityConstants C(prior.m, 0.0);
  for (std::size_t c = 0; c < warped.size(); ++c) C[prior.labels[c] - 1] += warped[c];
  for (int l = 0; l < prior.m; ++l) {
    if (prior.counts[l] == 0) throw std::invalid_argument("initial_constants: empty region");
    C[l] /= static_cast<double>(prior.counts[l]);
  }
  return C;
}

/// Diagonal/superdiagonal of the fit Gauss-Newton Y-block, h^dim P^T G^T G P,
/// restricted to same-component couplings (for the band preconditioner).
inline void fit_tridiag_add(const GridSpec& g, const std::vector<double>& warped_grad,
                            std::vector<double>& diag, std::vector<double>& super) {
  std::size_t NC = g.cell_count(), NN = g.node_count();
  double hd = g.cell_measure();
  double w = g.dim == 3 ? 0.125 : 0.25;
  double wsq = w * w;
  int n = g.n;
  if (g.dim == 3) {
    std::size_t c = 0;
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i, ++c)
          for (int p = 0; p < 3; ++p) {
            double gp = warped_grad[p * NC + c];
            if (gp == 0.0) continue;
            double s = hd * wsq * gp * gp;
            double* dg = diag.data() + p * NN;
            double* sp = super.data() + p * NN;
            for (int v = 0; v < 8; ++v)
              dg[g.node_index(i + (v & 1), j + ((v >> 1) & 1), k + ((v >> 2) & 1))] += s;
            // the four axis-1 edges of the cell couple flat indices (a, a+1)
            for (int vj = 0; vj < 2; ++vj)
              for (int vk = 0; vk < 2; ++vk) sp[g.node_index(i, j + vj, k + vk)] += s;
          }
  } else {
    std::size_t c = 0;
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i, ++c)
        for (int p = 0; p < 2; ++p) {
          double gp = warped_grad[p * NC + c];
          if (gp == 0.0) continue;
          double s = hd * wsq * gp * gp;
          double* dg = diag.data() + p * NN;
          double* sp = super.data() + p * NN;
          dg[g.node_index(i, j)] += s;
          dg[g.node_index(i + 1, j)] += s;
          dg[g.node_index(i, j + 1)] += s;
          dg[g.node_index(i + 1, j + 1)] += s;
          sp[g.node_index(i, j)] += s;
          sp[g.node_index(i, j + 1)] += s;
        }
  }
}

}  // namespace topreg
