#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "topreg/fitting.hpp"
#include "topreg/grid.hpp"
#include "topreg/hyperelastic.hpp"
#include "topreg/image_model.hpp"
#include "topreg/krylov.hpp"
#include "topreg/tets.hpp"

namespace topreg {

enum class KrylovMethod { MinRes, CG };
enum class SolveStatus { Converged, MaxIterations, LineSearchStalled };

struct SolverConfig {
  double gamma = -1.0;  // Hessian shift; < 0 resolves to 0 (Dirichlet) or h^dim (natural)
  double minres_tol = 0.1;
  int minres_max_iter = 100;
  double ls_delta = 1e-4;
  int ls_max_backtracks = 20;
  double stop_tol_F = 1e-3;
  double stop_tol_Y = 1e-2;
  double stop_tol_G = 1e-2;
  int max_outer_iter = 50;
  KrylovMethod krylov = KrylovMethod::MinRes;
  bool fix_constants = false;  // debugging: freeze C at its initial value
  std::function<void(const std::string&)> warn;

  double resolved_gamma(const GridSpec& g) const {
    if (gamma >= 0) return gamma;
    return g.bc == BoundaryCondition::Dirichlet ? 0.0 : g.cell_measure();
  }
  void emit_warning(const std::string& msg) const {
    if (warn) warn(msg);
  }
};

struct EnergyBreakdown {
  double fit = 0, length = 0, surface = 0, volume = 0;
  double total() const { return fit + length + surface + volume; }
};

/// One segmentation/registration problem on a fixed grid.
struct Problem {
  GridSpec grid;
  ImageModel model;
  PriorPartition prior;
  RegularizerParams params;
  std::vector<double> X;                  // nodal coordinates
  std::vector<unsigned char> bmask;       // per-node boundary mask

  Problem(const GridSpec& g, ImageModel model_, PriorPartition prior_, RegularizerParams params_)
      : grid(g), model(std::move(model_)), prior(std::move(prior_)), params(params_) {
    params.validate(g.dim);
    if (model.grid.n != g.n || model.grid.dim != g.dim)
      throw std::invalid_argument("Problem: image model grid mismatch");
    if (prior.grid.n != g.n || prior.grid.dim != g.dim)
      throw std::invalid_argument("Problem: prior grid mismatch");
    X = nodal_coordinates(g);
    bmask = boundary_node_mask(g);
  }

  bool dirichlet() const { return grid.bc == BoundaryCondition::Dirichlet; }
};

/// Joint state (Y, C) with cached element data, energies and (optionally)
/// the stacked gradient.
struct StateEval {
  std::vector<double> Y;
  IntensityConstants C;
  TetDerivatives td;
  std::vector<double> v;            // per-element determinants
  std::vector<double> cellpts;      // P*Y, component-major
  std::vector<double> warped;       // I(P Y)
  std::vector<double> warped_grad;  // rows of I_PY (component-major), gradient pass only
  EnergyBreakdown breakdown;
  double F = kInfeasibleEnergy;
  bool feasible = false;
  double min_det = 0, max_det = 0;
  std::vector<double> grad;  // [Y block | C block], gradient pass only
  double grad_norm = 0;
  int iteration = 0;

  bool has_gradient() const { return !grad.empty(); }
};

namespace detail {
inline void zero_boundary_rows(const Problem& prob, std::vector<double>& nodal) {
  std::size_t NN = prob.grid.node_count();
  for (int p = 0; p < prob.grid.dim; ++p) {
    double* y = nodal.data() + p * NN;
    for (std::size_t i = 0; i < NN; ++i)
      if (prob.bmask[i]) y[i] = 0.0;
  }
}
}  // namespace detail

/// Energies only (the line-search path): no image gradient, no assembly.
inline StateEval evaluate_energy(const Problem& prob, std::vector<double> Y, IntensityConstants C) {
  const GridSpec& g = prob.grid;
  require_nodal(g, Y, "evaluate_energy");
  require_constants(prob.prior, C, "evaluate_energy");
  StateEval st;
  st.Y = std::move(Y);
  st.C = std::move(C);
  st.td = tet_derivatives(g, st.Y);
  st.v = determinant_field(st.td);
  auto [mn, mx] = std::minmax_element(st.v.begin(), st.v.end());
  st.min_det = *mn;
  st.max_det = *mx;
  st.feasible = st.min_det > 0.0;
  if (!st.feasible) return st;  // F stays at the sentinel
  st.cellpts = average_to_cells(g, st.Y);
  eval_with_gradient(prob.model, st.cellpts, st.warped, nullptr);
  st.breakdown.fit = fit_energy(g, st.warped, prob.prior, st.C);
  st.breakdown.length = length_energy(g, st.Y, prob.X, prob.params.alpha_l);
  if (g.dim == 3 && prob.params.alpha_s != 0.0) {
    double sum = 0;
    double a[9], s[9];
    for (std::size_t e = 0; e < g.elem_count(); ++e) {
      detail::load_a3(st.td, e, a);
      detail::cof3(a, s);
      double S = 0;
      for (int i = 0; i < 9; ++i) S += s[i] * s[i];
      sum += surface_phi(S, prob.params.surface_mode);
    }
    st.breakdown.surface = g.elem_measure() * prob.params.alpha_s * sum;
  }
  st.breakdown.volume = volume_energy(g, st.v, prob.params.alpha_v);
  st.F = st.breakdown.total();
  return st;
}

/// Adds the gradient fields to a feasible energy evaluation.
inline void evaluate_gradient_into(const Problem& prob, const SolverConfig& cfg, StateEval& st) {
  const GridSpec& g = prob.grid;
  if (!st.feasible) throw std::invalid_argument("evaluate_gradient_into: infeasible state");
  eval_with_gradient(prob.model, st.cellpts, st.warped, &st.warped_grad);
  std::vector<double> gY(g.dof_count(), 0.0), gC(prob.prior.m, 0.0);
  fit_gradient_add(g, st.warped, st.warped_grad, prob.prior, st.C, gY, gC);
  length_gradient_add(g, st.Y, prob.X, prob.params.alpha_l, gY);
  sv_gradient_add(g, st.td, st.v, prob.params, gY);
  if (prob.dirichlet()) detail::zero_boundary_rows(prob, gY);
  if (cfg.fix_constants) std::fill(gC.begin(), gC.end(), 0.0);
  st.grad.resize(gY.size() + gC.size());
  std::copy(gY.begin(), gY.end(), st.grad.begin());
  std::copy(gC.begin(), gC.end(), st.grad.begin() + gY.size());
  double ss = 0;
  for (double d : st.grad) ss += d * d;
  st.grad_norm = std::sqrt(ss);
}

inline StateEval evaluate_state(const Problem& prob, const SolverConfig& cfg, std::vector<double> Y,
                                IntensityConstants C) {
  StateEval st = evaluate_energy(prob, std::move(Y), std::move(C));
  if (st.feasible) evaluate_gradient_into(prob, cfg, st);
  return st;
}

/// Total energy and stacked gradient d = (dF/dY, dF/dC); errors on infeasible Y.
inline std::pair<double, std::vector<double>> total_energy_and_gradient(const Problem& prob,
                                                                        const SolverConfig& cfg,
                                                                        const std::vector<double>& Y,
                                                                        const IntensityConstants& C) {
  StateEval st = evaluate_state(prob, cfg, Y, C);
  if (!st.feasible)
    throw std::invalid_argument("total_energy_and_gradient: infeasible Y (non-positive determinant)");
  return {st.F, std::move(st.grad)};
}

/// Matrix-free application of the approximated Hessian at a feasible state.
/// Under Dirichlet boundary conditions the boundary rows/columns act as the
/// identity (the boundary unknowns are eliminated); gamma shifts the Y block
/// only.
struct HessianOperator {
  const Problem* prob = nullptr;
  const StateEval* state = nullptr;
  double gamma = 0;
  bool fix_constants = false;

  // scratch buffers, reused across applications
  mutable std::vector<double> wY, outY, wC, outC;

  void apply(const std::vector<double>& w, std::vector<double>& out) const {
    const GridSpec& g = prob->grid;
    std::size_t nY = g.dof_count();
    std::size_t m = static_cast<std::size_t>(prob->prior.m);
    if (w.size() != nY + m) throw std::invalid_argument("HessianOperator: vector size mismatch");
    wY.assign(w.begin(), w.begin() + nY);
    wC.assign(w.begin() + nY, w.end());
    if (prob->dirichlet()) detail::zero_boundary_rows(*prob, wY);
    if (fix_constants) std::fill(wC.begin(), wC.end(), 0.0);
    outY.assign(nY, 0.0);
    outC.assign(m, 0.0);
    fit_gn_apply_add(g, state->warped_grad, prob->prior, wY, wC, outY, outC);
    scaled_AtA_apply_add(g, wY, prob->params.alpha_l * g.cell_measure(), outY);
    sv_curvature_apply_add(g, state->td, state->v, prob->params, wY, outY);
    if (gamma != 0.0)
      for (std::size_t i = 0; i < nY; ++i) outY[i] += gamma * wY[i];
    if (prob->dirichlet()) {
      detail::zero_boundary_rows(*prob, outY);
      std::size_t NN = g.node_count();
      for (int p = 0; p < g.dim; ++p)
        for (std::size_t i = 0; i < NN; ++i)
          if (prob->bmask[i]) outY[p * NN + i] = w[p * NN + i];
    }
    if (fix_constants)
      for (std::size_t l = 0; l < m; ++l) outC[l] = w[nY + l];
    out.resize(nY + m);
    std::copy(outY.begin(), outY.end(), out.begin());
    std::copy(outC.begin(), outC.end(), out.begin() + nY);
  }
};

inline std::vector<double> hessian_apply(const Problem& prob, const StateEval& state, double gamma,
                                         const std::vector<double>& w) {
  if (!state.feasible) throw std::invalid_argument("hessian_apply: infeasible state");
  HessianOperator op{&prob, &state, gamma, false, {}, {}, {}, {}};
  std::vector<double> out;
  op.apply(w, out);
  return out;
}

/// Band preconditioner Q = blockdiag(T, h^dim M^T M): T is the tridiagonal
/// extraction (main and +-1 diagonals) of the Y block, factored as L D L^T;
/// application costs O(unknowns).  Falls back to the plain diagonal when the
/// tridiagonal extraction is not positive definite.
struct BlockTridiagPreconditioner {
  std::size_t nY = 0;
  std::vector<double> diag, super;  // assembled bands
  std::vector<double> ld, ll;       // LDL^T factors (ld pivots, ll multipliers)
  std::vector<double> cdiag;        // h^dim * counts
  bool diagonal_fallback = false;

  void solve(const std::vector<double>& r, std::vector<double>& out) const {
    out.resize(r.size());
    if (diagonal_fallback) {
      for (std::size_t i = 0; i < nY; ++i) out[i] = r[i] / diag[i];
    } else {
      out[0] = r[0];
      for (std::size_t i = 1; i < nY; ++i) out[i] = r[i] - ll[i] * out[i - 1];
      for (std::size_t i = 0; i < nY; ++i) out[i] /= ld[i];
      for (std::size_t i = nY - 1; i-- > 0;) out[i] -= ll[i + 1] * out[i + 1];
    }
    for (std::size_t l = 0; l < cdiag.size(); ++l) out[nY + l] = r[nY + l] / cdiag[l];
  }

  void multiply(const std::vector<double>& w, std::vector<double>& out) const {
    out.resize(w.size());
    for (std::size_t i = 0; i < nY; ++i) {
      double s = diag[i] * w[i];
      if (!diagonal_fallback) {
        if (i + 1 < nY) s += super[i] * w[i + 1];
        if (i > 0) s += super[i - 1] * w[i - 1];
      }
      out[i] = s;
    }
    for (std::size_t l = 0; l < cdiag.size(); ++l) out[nY + l] = cdiag[l] * w[nY + l];
  }
};

inline BlockTridiagPreconditioner build_preconditioner(const Problem& prob, const StateEval& state,
                                                       const SolverConfig& cfg) {
  const GridSpec& g = prob.grid;
  BlockTridiagPreconditioner Q;
  Q.nY = g.dof_count();
  Q.diag.assign(Q.nY, 0.0);
  Q.super.assign(Q.nY, 0.0);
  fit_tridiag_add(g, state.warped_grad, Q.diag, Q.super);
  length_tridiag_add(g, prob.params.alpha_l, Q.diag, Q.super);
  sv_tridiag_add(g, state.td, state.v, prob.params, Q.diag, Q.super);
  double gamma = cfg.resolved_gamma(g);
  if (gamma != 0.0)
    for (std::size_t i = 0; i < Q.nY; ++i) Q.diag[i] += gamma;
  if (prob.dirichlet()) {
    std::size_t NN = g.node_count();
    for (int p = 0; p < g.dim; ++p)
      for (std::size_t i = 0; i < NN; ++i)
        if (prob.bmask[i]) {
          std::size_t idx = p * NN + i;
          Q.diag[idx] = 1.0;
          Q.super[idx] = 0.0;
          if (idx > 0) Q.super[idx - 1] = 0.0;
        }
  }
  // LDL^T of the tridiagonal; bail out to the diagonal if a pivot fails.
  Q.ld.assign(Q.nY, 0.0);
  Q.ll.assign(Q.nY, 0.0);
  Q.ld[0] = Q.diag[0];
  bool spd = Q.ld[0] > 0;
  for (std::size_t i = 1; spd && i < Q.nY; ++i) {
    Q.ll[i] = Q.super[i - 1] / Q.ld[i - 1];
    Q.ld[i] = Q.diag[i] - Q.ll[i] * Q.super[i - 1];
    if (!(Q.ld[i] > 0)) spd = false;
  }
  if (!spd) {
    Q.diagonal_fallback = true;
    double dmax = 0;
    for (double d : Q.diag) dmax = std::max(dmax, std::abs(d));
    double floor = std::max(1e-14 * dmax, 1e-300);
    for (double& d : Q.diag) d = std::max(d, floor);
    cfg.emit_warning("preconditioner: tridiagonal extraction not SPD, using diagonal");
  }
  Q.cdiag.assign(prob.prior.counts.size(), 0.0);
  for (std::size_t l = 0; l < Q.cdiag.size(); ++l)
    Q.cdiag[l] = cfg.fix_constants ? 1.0 : g.cell_measure() * static_cast<double>(prob.prior.counts[l]);
  return Q;
}

struct LineSearchResult {
  double eta = 0;
  int backtracks = 0;
  bool success = false;
  double F_new = kInfeasibleEnergy;
};

/// Backtracking with the positivity guard: the smallest i >= 0 with
/// eta = 0.5^i satisfying both F(new) <= F + eta*delta*d'p and v(Y_new) > 0.
/// trial(eta) must return {F, feasible}.
template <class TrialFn>
LineSearchResult backtracking_line_search(TrialFn&& trial, double F0, double dtp, double delta,
                                          int max_backtracks) {
  LineSearchResult r;
  double eta = 1.0;
  for (int i = 0; i <= max_backtracks; ++i, eta *= 0.5) {
    auto [F, feasible] = trial(eta);
    if (feasible && F <= F0 + eta * delta * dtp) {
      r.eta = eta;
      r.backtracks = i;
      r.success = true;
      r.F_new = F;
      return r;
    }
  }
  return r;
}

struct IterationRecord {
  int level = 0;
  int iteration = 0;
  double F = 0, fit = 0, length = 0, surface = 0, volume = 0;
  double grad_norm = 0;
  double eta = 0;
  int minres_iters = 0;
  double minres_relres = 0;
  bool minres_converged = true;
  double dtp = 0;
  double min_det = 0, max_det = 0;
};

struct SolveResult {
  StateEval state;
  SolveStatus status = SolveStatus::MaxIterations;
  std::vector<IterationRecord> trajectory;
};

inline IterationRecord make_record(int level, int iter, const StateEval& st) {
  IterationRecord r;
  r.level = level;
  r.iteration = iter;
  r.F = st.F;
  r.fit = st.breakdown.fit;
  r.length = st.breakdown.length;
  r.surface = st.breakdown.surface;
  r.volume = st.breakdown.volume;
  r.grad_norm = st.grad_norm;
  r.min_det = st.min_det;
  r.max_det = st.max_det;
  return r;
}

/// Generalized Gauss-Newton loop: assemble gradient and matrix-free Hessian,
/// solve with preconditioned MINRES (or CG), backtrack with the positivity
/// guard, stop on the FAIR-style triple criterion.
inline SolveResult ggn_solve(const Problem& prob, const SolverConfig& cfg, std::vector<double> Y0,
                             IntensityConstants C0, int level_id = 0) {
  const GridSpec& g = prob.grid;
  SolveResult result;
  StateEval cur = evaluate_state(prob, cfg, std::move(Y0), std::move(C0));
  if (!cur.feasible) throw std::invalid_argument("ggn_solve: infeasible initial transformation");

  const double F0 = cur.F;
  double y0_norm = 0;
  for (std::size_t i = 0; i < g.dof_count(); ++i) y0_norm += cur.Y[i] * cur.Y[i];
  y0_norm = std::sqrt(y0_norm);

  result.trajectory.push_back(make_record(level_id, 0, cur));
  result.status = SolveStatus::MaxIterations;

  const double tolF = cfg.stop_tol_F * (1.0 + std::abs(F0));
  const double tolY = cfg.stop_tol_Y * (1.0 + y0_norm);
  const double tolG = cfg.stop_tol_G * (1.0 + std::abs(F0));
  std::size_t nY = g.dof_count();
  std::size_t m = static_cast<std::size_t>(prob.prior.m);

  for (int it = 1; it <= cfg.max_outer_iter; ++it) {
    if (cur.grad_norm <= tolG) {
      result.status = SolveStatus::Converged;
      break;
    }
    double gamma = cfg.resolved_gamma(g);
    HessianOperator H{&prob, &cur, gamma, cfg.fix_constants, {}, {}, {}, {}};
    BlockTridiagPreconditioner Q = build_preconditioner(prob, cur, cfg);

    std::vector<double> rhs(nY + m);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -cur.grad[i];
    std::vector<double> p;
    auto apply_h = [&](const std::vector<double>& w, std::vector<double>& out) { H.apply(w, out); };
    auto apply_q = [&](const std::vector<double>& r, std::vector<double>& out) { Q.solve(r, out); };
    KrylovResult kr = cfg.krylov == KrylovMethod::MinRes
                          ? minres(apply_h, apply_q, rhs, p, cfg.minres_tol, cfg.minres_max_iter)
                          : pcg(apply_h, apply_q, rhs, p, cfg.minres_tol, cfg.minres_max_iter);
    if (kr.breakdown) {
      cfg.emit_warning("krylov solver breakdown, using steepest descent direction");
      p = rhs;
    }
    double dtp = 0;
    for (std::size_t i = 0; i < p.size(); ++i) dtp += cur.grad[i] * p[i];
    if (!(dtp < 0)) {
      cfg.emit_warning("non-descent direction from solver, using steepest descent");
      p = rhs;
      dtp = -cur.grad_norm * cur.grad_norm;
    }

    StateEval trial_state;
    auto trial = [&](double eta) {
      std::vector<double> Yt(nY);
      IntensityConstants Ct(m);
      for (std::size_t i = 0; i < nY; ++i) Yt[i] = cur.Y[i] + eta * p[i];
      for (std::size_t l = 0; l < m; ++l) Ct[l] = cur.C[l] + eta * p[nY + l];
      trial_state = evaluate_energy(prob, std::move(Yt), std::move(Ct));
      return std::pair<double, bool>(trial_state.F, trial_state.feasible);
    };
    LineSearchResult ls =
        backtracking_line_search(trial, cur.F, dtp, cfg.ls_delta, cfg.ls_max_backtracks);
    if (!ls.success) {
      result.status = SolveStatus::LineSearchStalled;
      cfg.emit_warning("line search stalled after " + std::to_string(cfg.ls_max_backtracks) +
                       " backtracks");
      break;
    }
    // Re-evaluate the accepted trial so the cached state matches ls.eta
    // (trial_state holds the last probe, which is the accepted one).
    double step_norm = 0;
    for (double pi : p) step_norm += pi * pi;
    step_norm = ls.eta * std::sqrt(step_norm);

    cur = std::move(trial_state);
    evaluate_gradient_into(prob, cfg, cur);
    cur.iteration = it;

    IterationRecord rec = make_record(level_id, it, cur);
    rec.eta = ls.eta;
    rec.minres_iters = kr.iterations;
    rec.minres_relres = kr.relres;
    rec.minres_converged = kr.converged;
    rec.dtp = dtp;
    double F_prev = result.trajectory.back().F;
    result.trajectory.push_back(rec);

    if (F_prev - cur.F <= tolF && step_norm <= tolY && cur.grad_norm <= tolG) {
      result.status = SolveStatus::Converged;
      break;
    }
  }
  result.state = std::move(cur);
  return result;
}

}  // namespace topreg
