#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "topreg/grid.hpp"
#include "topreg/tets.hpp"

namespace topreg {

/// Infeasible-energy sentinel: compared against, never used in arithmetic.
inline constexpr double kInfeasibleEnergy = std::numeric_limits<double>::infinity();

enum class SurfaceMode { DoubleWell, ConvexEnvelope };

struct RegularizerParams {
  double alpha_l = 0.0;
  double alpha_s = 0.0;
  double alpha_v = 1.0;
  SurfaceMode surface_mode = SurfaceMode::DoubleWell;

  void validate(int dim) const {
    if (alpha_l < 0 || alpha_s < 0) throw std::invalid_argument("RegularizerParams: negative weight");
    if (!(alpha_v > 0)) throw std::invalid_argument("RegularizerParams: alpha_v must be > 0");
    if (dim == 2 && alpha_s != 0) throw std::invalid_argument("RegularizerParams: alpha_s must be 0 in 2D");
  }
};

/// Volume penalty ((x-1)^2/x)^2: a barrier at 0 with phi_v(x) = phi_v(1/x),
/// so shrinkage and growth have the same price.
inline double phi_v(double x) {
  double q = (x - 1.0) * (x - 1.0) / x;
  return q * q;
}
inline double phi_v_d1(double x) {
  double d = x - 1.0;
  return 2.0 * d * d * d * (x + 1.0) / (x * x * x);
}
inline double phi_v_d2(double x) {
  double d = x - 1.0;
  return 2.0 * d * d * (x * x + 2.0 * x + 3.0) / (x * x * x * x);
}

inline double phi_w(double S) { return 0.5 * (S - 3.0) * (S - 3.0); }
inline double phi_c(double S) {
  double t = std::max(S - 3.0, 0.0);
  return 0.5 * t * t;
}
inline double surface_phi(double S, SurfaceMode mode) {
  return mode == SurfaceMode::DoubleWell ? phi_w(S) : phi_c(S);
}
inline double surface_phi_d1(double S, SurfaceMode mode) {
  return mode == SurfaceMode::DoubleWell ? (S - 3.0) : std::max(S - 3.0, 0.0);
}
inline double surface_phi_d2(double S, SurfaceMode mode) {
  return mode == SurfaceMode::DoubleWell ? 1.0 : (S > 3.0 ? 1.0 : 0.0);
}

namespace detail {

// phi_v''(1) = 0 exactly; the Gauss-Newton curvature keeps a small positive
// floor so the volume block stays positive definite in floating point.
inline constexpr double kPhiVD2Floor = 1e-12;

inline void load_a3(const TetDerivatives& td, std::size_t e, double* a) {
  for (int l = 0; l < 9; ++l) a[l] = td.d[l][e];
}
inline void load_a2(const TetDerivatives& td, std::size_t e, double* a) {
  for (int l = 0; l < 4; ++l) a[l] = td.d[l][e];
}

// Cofactor matrix entries of the 3x3 Jacobian [a0 a1 a2; a3 a4 a5; a6 a7 a8],
// stored row-major like a.
inline void cof3(const double* a, double* s) {
  s[0] = a[4] * a[8] - a[5] * a[7];
  s[1] = a[5] * a[6] - a[3] * a[8];
  s[2] = a[3] * a[7] - a[4] * a[6];
  s[3] = a[2] * a[7] - a[1] * a[8];
  s[4] = a[0] * a[8] - a[2] * a[6];
  s[5] = a[1] * a[6] - a[0] * a[7];
  s[6] = a[1] * a[5] - a[2] * a[4];
  s[7] = a[2] * a[3] - a[0] * a[5];
  s[8] = a[0] * a[4] - a[1] * a[3];
}

inline double det3(const double* a, const double* s) {
  return a[0] * s[0] + a[1] * s[1] + a[2] * s[2];
}

// d(sum_i s_i^2)/da_q, expanded through the cofactor products.
inline void dS_da3(const double* a, const double* s, double* dS) {
  dS[0] = 2.0 * (s[4] * a[8] - s[5] * a[7] - s[7] * a[5] + s[8] * a[4]);
  dS[1] = 2.0 * (-s[3] * a[8] + s[5] * a[6] + s[6] * a[5] - s[8] * a[3]);
  dS[2] = 2.0 * (s[3] * a[7] - s[4] * a[6] - s[6] * a[4] + s[7] * a[3]);
  dS[3] = 2.0 * (-s[1] * a[8] + s[2] * a[7] + s[7] * a[2] - s[8] * a[1]);
  dS[4] = 2.0 * (s[0] * a[8] - s[2] * a[6] - s[6] * a[2] + s[8] * a[0]);
  dS[5] = 2.0 * (-s[0] * a[7] + s[1] * a[6] + s[6] * a[1] - s[7] * a[0]);
  dS[6] = 2.0 * (s[1] * a[5] - s[2] * a[4] - s[4] * a[2] + s[5] * a[1]);
  dS[7] = 2.0 * (-s[0] * a[5] + s[2] * a[3] + s[3] * a[2] - s[5] * a[0]);
  dS[8] = 2.0 * (s[0] * a[4] - s[1] * a[3] - s[3] * a[1] + s[4] * a[0]);
}

inline double det2(const double* a) { return a[0] * a[3] - a[1] * a[2]; }

// dv/da in 2D.
inline void dv_da2(const double* a, double* dv) {
  dv[0] = a[3];
  dv[1] = -a[2];
  dv[2] = -a[1];
  dv[3] = a[0];
}

}  // namespace detail

/// The nine Hadamard-product cofactor combinations s_1..s_9, per tetrahedron.
inline std::array<std::vector<double>, 9> cofactor_field(const TetDerivatives& td) {
  if (td.grid.dim != 3) throw std::invalid_argument("cofactor_field: 3D only");
  std::size_t NE = td.elem_count();
  std::array<std::vector<double>, 9> s;
  for (auto& si : s) si.assign(NE, 0.0);
  double a[9], sl[9];
  for (std::size_t e = 0; e < NE; ++e) {
    detail::load_a3(td, e, a);
    detail::cof3(a, sl);
    for (int i = 0; i < 9; ++i) s[i][e] = sl[i];
  }
  return s;
}

inline std::array<std::vector<double>, 9> cofactor_field(const GridSpec& g, const std::vector<double>& Y) {
  return cofactor_field(tet_derivatives(g, Y));
}

/// Per-element Jacobian determinant of the piecewise-linear map.
inline std::vector<double> determinant_field(const TetDerivatives& td) {
  std::size_t NE = td.elem_count();
  std::vector<double> v(NE);
  if (td.grid.dim == 3) {
    double a[9], sl[9];
    for (std::size_t e = 0; e < NE; ++e) {
      detail::load_a3(td, e, a);
      detail::cof3(a, sl);
      v[e] = detail::det3(a, sl);
    }
  } else {
    double a[4];
    for (std::size_t e = 0; e < NE; ++e) {
      detail::load_a2(td, e, a);
      v[e] = detail::det2(a);
    }
  }
  return v;
}

inline std::vector<double> determinant_field(const GridSpec& g, const std::vector<double>& Y) {
  return determinant_field(tet_derivatives(g, Y));
}

/// (alpha_l h^dim / 2) (Y-X)^T A^T A (Y-X), matrix-free.
inline double length_energy(const GridSpec& g, const std::vector<double>& Y,
                            const std::vector<double>& X, double alpha_l) {
  require_nodal(g, Y, "length_energy");
  require_nodal(g, X, "length_energy");
  if (alpha_l == 0.0) return 0.0;
  std::vector<double> D(Y.size());
  for (std::size_t i = 0; i < Y.size(); ++i) D[i] = Y[i] - X[i];
  std::vector<double> AD = forward_difference(g, D);
  double ss = 0;
  for (double d : AD) ss += d * d;
  return 0.5 * alpha_l * g.cell_measure() * ss;
}

/// out += scale * A^T A w, fused difference/scatter (no intermediate vector).
inline void scaled_AtA_apply_add(const GridSpec& g, const std::vector<double>& w, double scale,
                                 std::vector<double>& out) {
  require_nodal(g, w, "scaled_AtA_apply_add");
  require_nodal(g, out, "scaled_AtA_apply_add");
  std::size_t N = g.nodes_per_axis(), NN = g.node_count();
  double c = scale / (g.h * g.h);
  int n = g.n;
  for (int p = 0; p < g.dim; ++p) {
    const double* wp = w.data() + p * NN;
    double* o = out.data() + p * NN;
    if (g.dim == 3) {
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < n; ++i) {
            std::size_t a = g.node_index(i, j, k), b = g.node_index(i + 1, j, k);
            double s = c * (wp[b] - wp[a]);
            o[b] += s;
            o[a] -= s;
          }
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < static_cast<int>(N); ++i) {
            std::size_t a = g.node_index(i, j, k), b = g.node_index(i, j + 1, k);
            double s = c * (wp[b] - wp[a]);
            o[b] += s;
            o[a] -= s;
          }
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < static_cast<int>(N); ++i) {
            std::size_t a = g.node_index(i, j, k), b = g.node_index(i, j, k + 1);
            double s = c * (wp[b] - wp[a]);
            o[b] += s;
            o[a] -= s;
          }
    } else {
      for (int j = 0; j < static_cast<int>(N); ++j)
        for (int i = 0; i < n; ++i) {
          std::size_t a = g.node_index(i, j), b = g.node_index(i + 1, j);
          double s = c * (wp[b] - wp[a]);
          o[b] += s;
          o[a] -= s;
        }
      for (int j = 0; j < n; ++j)
        for (int i = 0; i < static_cast<int>(N); ++i) {
          std::size_t a = g.node_index(i, j), b = g.node_index(i, j + 1);
          double s = c * (wp[b] - wp[a]);
          o[b] += s;
          o[a] -= s;
        }
    }
  }
}

/// out += alpha_l h^dim A^T A (Y - X), the length-term gradient.
inline void length_gradient_add(const GridSpec& g, const std::vector<double>& Y,
                                const std::vector<double>& X, double alpha_l,
                                std::vector<double>& out) {
  if (alpha_l == 0.0) return;
  std::vector<double> D(Y.size());
  for (std::size_t i = 0; i < Y.size(); ++i) D[i] = Y[i] - X[i];
  scaled_AtA_apply_add(g, D, alpha_l * g.cell_measure(), out);
}

/// Surface energy (h^3/6) alpha_s sum_t phi(S_t) with S_t = sum_i s_i(t)^2.
inline double surface_energy(const GridSpec& g, const std::array<std::vector<double>, 9>& s,
                             double alpha_s, SurfaceMode mode) {
  if (g.dim != 3 || alpha_s == 0.0) return 0.0;
  std::size_t NE = g.elem_count();
  double sum = 0;
  for (std::size_t e = 0; e < NE; ++e) {
    double S = 0;
    for (int i = 0; i < 9; ++i) S += s[i][e] * s[i][e];
    sum += surface_phi(S, mode);
  }
  return g.elem_measure() * alpha_s * sum;
}

/// Volume energy; returns the +inf sentinel when any element determinant is
/// non-positive (signals an infeasible step to the line search).
inline double volume_energy(const GridSpec& g, const std::vector<double>& v, double alpha_v) {
  double sum = 0;
  for (double vi : v) {
    if (!(vi > 0.0)) return kInfeasibleEnergy;
    sum += phi_v(vi);
  }
  return g.elem_measure() * alpha_v * sum;
}

/// Energy breakdown plus the cofactor and determinant fields at Y.
struct HyperelasticEval {
  double energy_length = 0;
  double energy_surface = 0;
  double energy_volume = 0;
  std::array<std::vector<double>, 9> s;  // 3D only
  std::vector<double> v;
  double min_det = 0;
  double max_det = 0;
  bool feasible = false;

  double total() const {
    return feasible ? energy_length + energy_surface + energy_volume : kInfeasibleEnergy;
  }
};

inline HyperelasticEval hyperelastic_eval(const GridSpec& g, const std::vector<double>& Y,
                                          const std::vector<double>& X,
                                          const RegularizerParams& params) {
  params.validate(g.dim);
  HyperelasticEval ev;
  TetDerivatives td = tet_derivatives(g, Y);
  ev.v = determinant_field(td);
  auto [mn, mx] = std::minmax_element(ev.v.begin(), ev.v.end());
  ev.min_det = *mn;
  ev.max_det = *mx;
  ev.feasible = ev.min_det > 0.0;
  ev.energy_length = length_energy(g, Y, X, params.alpha_l);
  if (g.dim == 3) {
    ev.s = cofactor_field(td);
    ev.energy_surface = surface_energy(g, ev.s, params.alpha_s, params.surface_mode);
  }
  ev.energy_volume = volume_energy(g, ev.v, params.alpha_v);
  return ev;
}

/// out += gradient of the surface+volume part at the state described by td.
/// v must be the (positive) determinant field of td.
inline void sv_gradient_add(const GridSpec& g, const TetDerivatives& td,
                            const std::vector<double>& v, const RegularizerParams& params,
                            std::vector<double>& out) {
  std::size_t NN = g.node_count();
  double wE = g.elem_measure();
  double ih = 1.0 / g.h;
  int n = g.n;
  if (g.dim == 3) {
    double a[9], s[9], dS[9], gq[9];
    std::size_t nodes[4];
    std::size_t e = 0;
    for (int ck = 0; ck < n; ++ck)
      for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci)
          for (int t = 0; t < 6; ++t, ++e) {
            detail::load_a3(td, e, a);
            detail::cof3(a, s);
            double phiv1 = params.alpha_v * phi_v_d1(v[e]);
            double phis1 = 0;
            if (params.alpha_s != 0.0) {
              double S = 0;
              for (int i = 0; i < 9; ++i) S += s[i] * s[i];
              phis1 = params.alpha_s * surface_phi_d1(S, params.surface_mode);
              detail::dS_da3(a, s, dS);
            }
            for (int q = 0; q < 9; ++q)
              gq[q] = wE * (phiv1 * s[q] + (params.alpha_s != 0.0 ? phis1 * dS[q] : 0.0));
            element_nodes(g, ci, cj, ck, t, nodes);
            for (int p = 0; p < 3; ++p) {
              double* o = out.data() + p * NN;
              for (int m = 0; m < 3; ++m) {
                double sc = ih * gq[p * 3 + kTetPerm3[t][m]];
                o[nodes[m + 1]] += sc;
                o[nodes[m]] -= sc;
              }
            }
          }
  } else {
    double a[4], dv[4];
    std::size_t nodes[3];
    std::size_t e = 0;
    for (int cj = 0; cj < n; ++cj)
      for (int ci = 0; ci < n; ++ci)
        for (int t = 0; t < 2; ++t, ++e) {
          detail::load_a2(td, e, a);
          detail::dv_da2(a, dv);
          double phiv1 = params.alpha_v * phi_v_d1(v[e]);
          element_nodes(g, ci, cj, 0, t, nodes);
          for (int p = 0; p < 2; ++p) {
            double* o = out.data() + p * NN;
            for (int m = 0; m < 2; ++m) {
              double sc = ih * wE * phiv1 * dv[p * 2 + kTriPerm2[t][m]];
              o[nodes[m + 1]] += sc;
              o[nodes[m]] -= sc;
            }
          }
        }
  }
}

/// Exact gradient of the full regularizer (length + surface + volume).
inline std::vector<double> reg_gradient(const GridSpec& g, const std::vector<double>& Y,
                                        const std::vector<double>& X,
                                        const RegularizerParams& params) {
  params.validate(g.dim);
  TetDerivatives td = tet_derivatives(g, Y);
  std::vector<double> v = determinant_field(td);
  for (double vi : v)
    if (!(vi > 0.0)) throw std::invalid_argument("reg_gradient: infeasible Y (non-positive determinant)");
  std::vector<double> out(g.dof_count(), 0.0);
  length_gradient_add(g, Y, X, params.alpha_l, out);
  sv_gradient_add(g, td, v, params, out);
  return out;
}

/// out += (h^dim/dim!) (alpha_s dS^T phi_s'' dS + alpha_v dv^T phi_v'' dv) w,
/// the Gauss-Newton curvature of the surface+volume terms applied matrix-free.
inline void sv_curvature_apply_add(const GridSpec& g, const TetDerivatives& td,
                                   const std::vector<double>& v, const RegularizerParams& params,
                                   const std::vector<double>& w, std::vector<double>& out) {
  std::size_t NN = g.node_count();
  double wE = g.elem_measure();
  double ih = 1.0 / g.h;
  int n = g.n;
  if (g.dim == 3) {
    double a[9], s[9], dS[9], dw[9], gq[9];
    std::size_t nodes[4];
    std::size_t e = 0;
    for (int ck = 0; ck < n; ++ck)
      for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci)
          for (int t = 0; t < 6; ++t, ++e) {
            detail::load_a3(td, e, a);
            detail::cof3(a, s);
            element_nodes(g, ci, cj, ck, t, nodes);
            // per-element derivatives of the direction w
            for (int p = 0; p < 3; ++p) {
              const double* wp = w.data() + p * NN;
              for (int m = 0; m < 3; ++m)
                dw[p * 3 + kTetPerm3[t][m]] = ih * (wp[nodes[m + 1]] - wp[nodes[m]]);
            }
            double cv = params.alpha_v * std::max(phi_v_d2(v[e]), detail::kPhiVD2Floor);
            double dv_w = 0;
            for (int q = 0; q < 9; ++q) dv_w += s[q] * dw[q];
            double cs = 0, dS_w = 0;
            if (params.alpha_s != 0.0) {
              double S = 0;
              for (int i = 0; i < 9; ++i) S += s[i] * s[i];
              cs = params.alpha_s * surface_phi_d2(S, params.surface_mode);
              detail::dS_da3(a, s, dS);
              for (int q = 0; q < 9; ++q) dS_w += dS[q] * dw[q];
            }
            for (int q = 0; q < 9; ++q)
              gq[q] = wE * (cv * dv_w * s[q] + (params.alpha_s != 0.0 ? cs * dS_w * dS[q] : 0.0));
            for (int p = 0; p < 3; ++p) {
              double* o = out.data() + p * NN;
              for (int m = 0; m < 3; ++m) {
                double sc = ih * gq[p * 3 + kTetPerm3[t][m]];
                o[nodes[m + 1]] += sc;
                o[nodes[m]] -= sc;
              }
            }
          }
  } else {
    double a[4], dv[4], dw[4];
    std::size_t nodes[3];
    std::size_t e = 0;
    for (int cj = 0; cj < n; ++cj)
      for (int ci = 0; ci < n; ++ci)
        for (int t = 0; t < 2; ++t, ++e) {
          detail::load_a2(td, e, a);
          detail::dv_da2(a, dv);
          element_nodes(g, ci, cj, 0, t, nodes);
          for (int p = 0; p < 2; ++p) {
            const double* wp = w.data() + p * NN;
            for (int m = 0; m < 2; ++m)
              dw[p * 2 + kTriPerm2[t][m]] = ih * (wp[nodes[m + 1]] - wp[nodes[m]]);
          }
          double cv = params.alpha_v * std::max(phi_v_d2(v[e]), detail::kPhiVD2Floor);
          double dv_w = 0;
          for (int q = 0; q < 4; ++q) dv_w += dv[q] * dw[q];
          for (int p = 0; p < 2; ++p) {
            double* o = out.data() + p * NN;
            for (int m = 0; m < 2; ++m) {
              double sc = ih * wE * cv * dv_w * dv[p * 2 + kTriPerm2[t][m]];
              o[nodes[m + 1]] += sc;
              o[nodes[m]] -= sc;
            }
          }
        }
  }
}

/// Gauss-Newton curvature of the whole regularizer applied to w:
/// alpha_l h^dim A^T A w + (h^dim/dim!)(alpha_s dS^T phi_s'' dS
/// + alpha_v dv^T phi_v'' dv) w.
inline std::vector<double> reg_gn_curvature_apply(const GridSpec& g, const std::vector<double>& Y,
                                                  const RegularizerParams& params,
                                                  const std::vector<double>& w) {
  params.validate(g.dim);
  require_nodal(g, w, "reg_gn_curvature_apply");
  TetDerivatives td = tet_derivatives(g, Y);
  std::vector<double> v = determinant_field(td);
  for (double vi : v)
    if (!(vi > 0.0))
      throw std::invalid_argument("reg_gn_curvature_apply: infeasible Y (non-positive determinant)");
  std::vector<double> out(g.dof_count(), 0.0);
  scaled_AtA_apply_add(g, w, params.alpha_l * g.cell_measure(), out);
  sv_curvature_apply_add(g, td, v, params, w, out);
  return out;
}

/// Main diagonal and first superdiagonal contributions of the surface+volume
/// curvature block, for the band preconditioner.  Within one element exactly
/// one vertex pair differs by +1 in the flat node index (the axis-1 path
/// step), so each element adds one superdiagonal entry per component.
inline void sv_tridiag_add(const GridSpec& g, const TetDerivatives& td, const std::vector<double>& v,
                           const RegularizerParams& params, std::vector<double>& diag,
                           std::vector<double>& super) {
  std::size_t NN = g.node_count();
  double wE = g.elem_measure();
  double ih = 1.0 / g.h;
  int n = g.n;
  int nv = g.dim + 1;
  if (g.dim == 3) {
    double a[9], s[9], dS[9];
    std::size_t nodes[4];
    double uv[3][4], us[3][4];
    std::size_t e = 0;
    for (int ck = 0; ck < n; ++ck)
      for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci)
          for (int t = 0; t < 6; ++t, ++e) {
            detail::load_a3(td, e, a);
            detail::cof3(a, s);
            element_nodes(g, ci, cj, ck, t, nodes);
            double cv = params.alpha_v * std::max(phi_v_d2(v[e]), detail::kPhiVD2Floor);
            double cs = 0;
            if (params.alpha_s != 0.0) {
              double S = 0;
              for (int i = 0; i < 9; ++i) S += s[i] * s[i];
              cs = params.alpha_s * surface_phi_d2(S, params.surface_mode);
              detail::dS_da3(a, s, dS);
            }
            // dv and dS rows restricted to this element, per component.
            for (int p = 0; p < 3; ++p)
              for (int m = 0; m < 4; ++m) uv[p][m] = us[p][m] = 0.0;
            for (int p = 0; p < 3; ++p)
              for (int m = 0; m < 3; ++m) {
                int q = p * 3 + kTetPerm3[t][m];
                uv[p][m + 1] += ih * s[q];
                uv[p][m] -= ih * s[q];
                if (params.alpha_s != 0.0) {
                  us[p][m + 1] += ih * dS[q];
                  us[p][m] -= ih * dS[q];
                }
              }
            int step1 = -1;  // path step along axis 1 (flat index +1)
            for (int m = 0; m < 3; ++m)
              if (kTetPerm3[t][m] == 0) step1 = m;
            for (int p = 0; p < 3; ++p) {
              for (int m = 0; m < nv; ++m) {
                double add = wE * (cv * uv[p][m] * uv[p][m] + cs * us[p][m] * us[p][m]);
                diag[p * NN + nodes[m]] += add;
              }
              double adds = wE * (cv * uv[p][step1] * uv[p][step1 + 1] +
                                  cs * us[p][step1] * us[p][step1 + 1]);
              super[p * NN + nodes[step1]] += adds;
            }
          }
  } else {
    double a[4], dv[4];
    std::size_t nodes[3];
    double uv[2][3];
    std::size_t e = 0;
    for (int cj = 0; cj < n; ++cj)
      for (int ci = 0; ci < n; ++ci)
        for (int t = 0; t < 2; ++t, ++e) {
          detail::load_a2(td, e, a);
          detail::dv_da2(a, dv);
          element_nodes(g, ci, cj, 0, t, nodes);
          double cv = params.alpha_v * std::max(phi_v_d2(v[e]), detail::kPhiVD2Floor);
          for (int p = 0; p < 2; ++p)
            for (int m = 0; m < 3; ++m) uv[p][m] = 0.0;
          for (int p = 0; p < 2; ++p)
            for (int m = 0; m < 2; ++m) {
              int q = p * 2 + kTriPerm2[t][m];
              uv[p][m + 1] += ih * dv[q];
              uv[p][m] -= ih * dv[q];
            }
          int step1 = (kTriPerm2[t][0] == 0) ? 0 : 1;
          for (int p = 0; p < 2; ++p) {
            for (int m = 0; m < nv; ++m)
              diag[p * NN + nodes[m]] += wE * cv * uv[p][m] * uv[p][m];
            super[p * NN + nodes[step1]] += wE * cv * uv[p][step1] * uv[p][step1 + 1];
          }
        }
  }
}

/// Diagonal and superdiagonal of alpha_l h^dim A^T A (per component; the
/// superdiagonal couples axis-1 neighbours only).
inline void length_tridiag_add(const GridSpec& g, double alpha_l, std::vector<double>& diag,
                               std::vector<double>& super) {
  if (alpha_l == 0.0) return;
  std::size_t N = g.nodes_per_axis(), NN = g.node_count();
  double c = alpha_l * g.cell_measure() / (g.h * g.h);
  int n = g.n;
  auto add_axis = [&](int axis) {
    if (g.dim == 3) {
      for (int k = 0; k < static_cast<int>(N); ++k)
        for (int j = 0; j < static_cast<int>(N); ++j)
          for (int i = 0; i < static_cast<int>(N); ++i) {
            int idx[3] = {i, j, k};
            if (idx[axis] >= n) continue;
            std::size_t a = g.node_index(i, j, k);
            int ii = i + (axis == 0), jj = j + (axis == 1), kk = k + (axis == 2);
            std::size_t b = g.node_index(ii, jj, kk);
            for (int p = 0; p < 3; ++p) {
              diag[p * NN + a] += c;
              diag[p * NN + b] += c;
              if (axis == 0) super[p * NN + a] -= c;
            }
          }
    } else {
      for (int j = 0; j < static_cast<int>(N); ++j)
        for (int i = 0; i < static_cast<int>(N); ++i) {
          int idx[2] = {i, j};
          if (idx[axis] >= n) continue;
          std::size_t a = g.node_index(i, j);
          std::size_t b = g.node_index(i + (axis == 0), j + (axis == 1));
          for (int p = 0; p < 2; ++p) {
            diag[p * NN + a] += c;
            diag[p * NN + b] += c;
            if (axis == 0) super[p * NN + a] -= c;
          }
        }
    }
  };
  for (int axis = 0; axis < g.dim; ++axis) add_axis(axis);
}

}  // namespace topreg
