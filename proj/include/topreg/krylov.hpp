#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace topreg {

struct KrylovResult {
  int iterations = 0;
  double relres = 0.0;   // preconditioned relative residual estimate
  bool converged = false;
  bool breakdown = false;
};

namespace detail {
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
}  // namespace detail

/// Preconditioned MINRES for symmetric systems A x = b with SPD
/// preconditioner M (applied as M^{-1}).  Follows the classic
/// Paige-Saunders recurrence; the tracked residual is ||r||_{M^{-1}}
/// relative to ||b||_{M^{-1}}.  x is overwritten with the solution.
template <class ApplyA, class ApplyMinv>
KrylovResult minres(ApplyA&& apply_a, ApplyMinv&& apply_minv, const std::vector<double>& b,
                    std::vector<double>& x, double tol, int max_iter) {
  const std::size_t N = b.size();
  KrylovResult res;
  x.assign(N, 0.0);

  std::vector<double> r1 = b, r2 = b, y(N), v(N), w(N, 0.0), w1(N, 0.0), w2(N, 0.0);
  apply_minv(r1, y);
  double beta1 = detail::dot(r1, y);
  if (beta1 < 0) {
    res.breakdown = true;  // preconditioner not positive definite
    return res;
  }
  if (beta1 == 0) {
    res.converged = true;
    return res;
  }
  beta1 = std::sqrt(beta1);

  double oldb = 0, beta = beta1, dbar = 0, epsln = 0, phibar = beta1;
  double cs = -1, sn = 0;
  res.relres = 1.0;

  for (int itn = 1; itn <= max_iter; ++itn) {
    double s = 1.0 / beta;
    for (std::size_t i = 0; i < N; ++i) v[i] = s * y[i];
    apply_a(v, y);
    if (itn >= 2) {
      double c = beta / oldb;
      for (std::size_t i = 0; i < N; ++i) y[i] -= c * r1[i];
    }
    double alfa = detail::dot(v, y);
    {
      double c = alfa / beta;
      for (std::size_t i = 0; i < N; ++i) y[i] -= c * r2[i];
    }
    r1.swap(r2);
    r2.swap(y);
    apply_minv(r2, y);
    oldb = beta;
    double betasq = detail::dot(r2, y);
    if (betasq < 0 || !std::isfinite(betasq)) {
      res.breakdown = true;
      res.iterations = itn;
      return res;
    }
    beta = std::sqrt(betasq);

    double oldeps = epsln;
    double delta = cs * dbar + sn * alfa;
    double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::sqrt(gbar * gbar + beta * beta);
    gamma = std::max(gamma, std::numeric_limits<double>::epsilon());
    cs = gbar / gamma;
    sn = beta / gamma;
    double phi = cs * phibar;
    phibar = sn * phibar;

    double denom = 1.0 / gamma;
    w1.swap(w2);
    w2.swap(w);
    for (std::size_t i = 0; i < N; ++i) w[i] = denom * (v[i] - oldeps * w1[i] - delta * w2[i]);
    for (std::size_t i = 0; i < N; ++i) x[i] += phi * w[i];

    res.iterations = itn;
    res.relres = phibar / beta1;
    if (res.relres <= tol) {
      res.converged = true;
      return res;
    }
  }
  return res;
}

/// Preconditioned conjugate gradients (for SPD A), same residual contract as
/// minres: ||r||_{M^{-1}} / ||b||_{M^{-1}} <= tol.
template <class ApplyA, class ApplyMinv>
KrylovResult pcg(ApplyA&& apply_a, ApplyMinv&& apply_minv, const std::vector<double>& b,
                 std::vector<double>& x, double tol, int max_iter) {
  const std::size_t N = b.size();
  KrylovResult res;
  x.assign(N, 0.0);
  std::vector<double> r = b, z(N), p(N), q(N);
  apply_minv(r, z);
  double rz = detail::dot(r, z);
  if (rz < 0) {
    res.breakdown = true;
    return res;
  }
  if (rz == 0) {
    res.converged = true;
    return res;
  }
  double norm0 = std::sqrt(rz);
  p = z;
  res.relres = 1.0;
  for (int itn = 1; itn <= max_iter; ++itn) {
    apply_a(p, q);
    double pq = detail::dot(p, q);
    if (!(pq > 0) || !std::isfinite(pq)) {
      res.breakdown = true;
      res.iterations = itn;
      return res;
    }
    double alpha = rz / pq;
    for (std::size_t i = 0; i < N; ++i) x[i] += alpha * p[i];
    for (std::size_t i = 0; i < N; ++i) r[i] -= alpha * q[i];
    apply_minv(r, z);
    double rznew = detail::dot(r, z);
    if (rznew < 0 || !std::isfinite(rznew)) {
      res.breakdown = true;
      res.iterations = itn;
      return res;
    }
    res.iterations = itn;
    res.relres = std::sqrt(rznew) / norm0;
    if (res.relres <= tol) {
      res.converged = true;
      return res;
    }
    double betak = rznew / rz;
    rz = rznew;
    for (std::size_t i = 0; i < N; ++i) p[i] = z[i] + betak * p[i];
  }
  return res;
}

}  // namespace topreg
