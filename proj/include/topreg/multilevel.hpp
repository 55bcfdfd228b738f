#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "topreg/fitting.hpp"
#include "topreg/grid.hpp"
#include "topreg/image_model.hpp"
#include "topreg/optimizer.hpp"
#include "topreg/tets.hpp"

namespace topreg {

struct PyramidLevel {
  GridSpec grid;
  std::vector<double> image;  // cell-centered samples
  std::vector<int> labels;    // cell-centered prior labels
};

/// Coarse-to-fine hierarchy, finest first / coarsest last.
struct Pyramid {
  std::vector<PyramidLevel> levels;
  int L = 0;
};

namespace detail {
// Majority vote over the 2^dim children with deterministic lowest-id tie-break.
inline std::vector<int> restrict_labels(const GridSpec& fine, const std::vector<int>& labels, int m) {
  int nc = fine.n / 2;
  GridSpec coarse(fine.dim, nc, fine.bc);
  std::vector<int> out(coarse.cell_count());
  std::vector<int> votes(m + 1);
  if (fine.dim == 3) {
    for (int k = 0; k < nc; ++k)
      for (int j = 0; j < nc; ++j)
        for (int i = 0; i < nc; ++i) {
          std::fill(votes.begin(), votes.end(), 0);
          for (int c = 0; c < 8; ++c)
            votes[labels[fine.cell_index(2 * i + (c & 1), 2 * j + ((c >> 1) & 1),
                                         2 * k + ((c >> 2) & 1))]]++;
          int best = 1;
          for (int l = 2; l <= m; ++l)
            if (votes[l] > votes[best]) best = l;
          out[coarse.cell_index(i, j, k)] = best;
        }
  } else {
    for (int j = 0; j < nc; ++j)
      for (int i = 0; i < nc; ++i) {
        std::fill(votes.begin(), votes.end(), 0);
        votes[labels[fine.cell_index(2 * i, 2 * j)]]++;
        votes[labels[fine.cell_index(2 * i + 1, 2 * j)]]++;
        votes[labels[fine.cell_index(2 * i, 2 * j + 1)]]++;
        votes[labels[fine.cell_index(2 * i + 1, 2 * j + 1)]]++;
        int best = 1;
        for (int l = 2; l <= m; ++l)
          if (votes[l] > votes[best]) best = l;
        out[coarse.cell_index(i, j)] = best;
      }
  }
  return out;
}

inline bool all_regions_present(const std::vector<int>& labels, int m) {
  std::vector<char> seen(m + 1, 0);
  for (int l : labels) seen[l] = 1;
  for (int l = 1; l <= m; ++l)
    if (!seen[l]) return false;
  return true;
}
}  // namespace detail

/// Builds the image/label pyramid: block-averaged images, majority-voted
/// labels.  Coarser levels that lose a region are skipped with a warning.
inline Pyramid build_pyramid(const GridSpec& g, const std::vector<double>& image,
                             const std::vector<int>& labels, int L,
                             const std::function<void(const std::string&)>& warn = {}) {
  if (L < 1) throw std::invalid_argument("build_pyramid: L must be >= 1");
  if (image.size() != g.cell_count() || labels.size() != g.cell_count())
    throw std::invalid_argument("build_pyramid: data size mismatch");
  int div = 1 << (L - 1);
  if (g.n % div != 0) throw std::invalid_argument("build_pyramid: n not divisible by 2^(L-1)");
  if (L > 1 && g.n / div < 4) throw std::invalid_argument("build_pyramid: coarsest level below n=4");
  int m = 0;
  for (int l : labels) m = std::max(m, l);

  Pyramid pyr;
  pyr.levels.push_back({g, image, labels});
  GridSpec cur = g;
  std::vector<double> img = image;
  std::vector<int> lab = labels;
  for (int lev = 1; lev < L; ++lev) {
    GridSpec coarse(cur.dim, cur.n / 2, cur.bc);
    std::vector<std::vector<double>> two = restrict_image(cur, img, 2);
    img = std::move(two[1]);
    lab = detail::restrict_labels(cur, lab, m);
    cur = coarse;
    if (!detail::all_regions_present(lab, m)) {
      if (warn) warn("pyramid: level n=" + std::to_string(coarse.n) + " loses a region, skipped");
      continue;
    }
    pyr.levels.push_back({coarse, img, lab});
  }
  pyr.L = static_cast<int>(pyr.levels.size());
  return pyr;
}

/// Nodal interpolation from a coarse grid to its factor-2 refinement: each
/// fine node takes the value of the coarse piecewise-linear (Kuhn-element)
/// interpolant at its position.  Because factor-2 Kuhn splits nest, every
/// fine element inherits the constant Jacobian of its containing coarse
/// element, so per-element determinants transfer exactly and positivity is
/// preserved.
inline std::vector<double> prolong(const GridSpec& coarse, const std::vector<double>& Yc,
                                   const GridSpec& fine) {
  if (fine.n != 2 * coarse.n || fine.dim != coarse.dim)
    throw std::invalid_argument("prolong: fine grid must be the factor-2 refinement");
  require_nodal(coarse, Yc, "prolong");
  std::size_t NNf = fine.node_count(), NNc = coarse.node_count();
  std::vector<double> Yf(fine.dof_count());
  int N = fine.n + 1;
  double x[3], val[3];
  if (fine.dim == 3) {
    for (int k = 0; k < N; ++k)
      for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
          std::size_t fidx = fine.node_index(i, j, k);
          if (i % 2 == 0 && j % 2 == 0 && k % 2 == 0) {
            std::size_t cidx = coarse.node_index(i / 2, j / 2, k / 2);
            for (int p = 0; p < 3; ++p) Yf[p * NNf + fidx] = Yc[p * NNc + cidx];
            continue;
          }
          x[0] = i * fine.h;
          x[1] = j * fine.h;
          x[2] = k * fine.h;
          eval_piecewise_linear(coarse, Yc, x, val);
          for (int p = 0; p < 3; ++p) Yf[p * NNf + fidx] = val[p];
        }
  } else {
    for (int j = 0; j < N; ++j)
      for (int i = 0; i < N; ++i) {
        std::size_t fidx = fine.node_index(i, j);
        if (i % 2 == 0 && j % 2 == 0) {
          std::size_t cidx = coarse.node_index(i / 2, j / 2);
          for (int p = 0; p < 2; ++p) Yf[p * NNf + fidx] = Yc[p * NNc + cidx];
          continue;
        }
        x[0] = i * fine.h;
        x[1] = j * fine.h;
        eval_piecewise_linear(coarse, Yc, x, val);
        for (int p = 0; p < 2; ++p) Yf[p * NNf + fidx] = val[p];
      }
  }
  return Yf;
}

struct MultilevelResult {
  SolveResult final;                     // finest level
  std::vector<IterationRecord> records;  // every level, coarsest first
  int levels_solved = 0;
};

/// Coarse-to-fine driver: solve the coarsest level from Y = X with per-region
/// means as C, prolong the transformation, recompute C, repeat to the finest
/// level.
inline MultilevelResult run_multilevel(const GridSpec& g, const std::vector<double>& image,
                                       const std::vector<int>& labels,
                                       const RegularizerParams& params, const SolverConfig& cfg,
                                       int L, const IntensityConstants* fixed_C = nullptr) {
  Pyramid pyr = build_pyramid(g, image, labels, L, cfg.warn);
  MultilevelResult out;
  std::vector<double> Y;
  GridSpec prev_grid;
  for (std::size_t li = pyr.levels.size(); li-- > 0;) {
    const PyramidLevel& lev = pyr.levels[li];
    Problem prob(lev.grid, fit_image(lev.grid, lev.image), build_prior(lev.grid, lev.labels), params);
    if (Y.empty()) {
      Y = prob.X;
    } else {
      // Prolong through any skipped intermediate sizes, factor 2 at a time.
      while (prev_grid.n < lev.grid.n) {
        GridSpec next(prev_grid.dim, prev_grid.n * 2, prev_grid.bc);
        Y = prolong(prev_grid, Y, next);
        prev_grid = next;
      }
      std::vector<double> v = determinant_field(lev.grid, Y);
      double mn = *std::min_element(v.begin(), v.end());
      if (!(mn > 0))
        throw std::runtime_error("run_multilevel: prolonged field infeasible (internal error)");
    }
    IntensityConstants C;
    if (fixed_C) {
      C = *fixed_C;
    } else {
      std::vector<double> cellpts = average_to_cells(lev.grid, Y);
      std::vector<double> warped;
      eval_with_gradient(prob.model, cellpts, warped, nullptr);
      C = initial_constants(warped, prob.prior);
    }
    SolveResult r = ggn_solve(prob, cfg, std::move(Y), std::move(C), lev.grid.n);
    out.records.insert(out.records.end(), r.trajectory.begin(), r.trajectory.end());
    Y = r.state.Y;
    prev_grid = lev.grid;
    out.levels_solved++;
    if (li == 0) out.final = std::move(r);
  }
  return out;
}

}  // namespace topreg
