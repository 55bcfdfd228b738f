#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "topreg/grid.hpp"

namespace topreg {

namespace detail {

// Interpolating cubic B-spline coefficients along one axis with natural
// (second-derivative-zero) end conditions.  Samples y_0..y_{m-1} sit at
// integer positions; the returned array has m+2 entries, the two ghost
// coefficients implied by the end conditions at both ends.
inline void spline_filter_line(const double* y, std::size_t stride_in, std::size_t m,
                               double* out, std::size_t stride_out,
                               std::vector<double>& scratch) {
  // Interpolation rows: c_i + 4 c_{i+1} + c_{i+2} = 6 y_i.  Eliminating the
  // ghosts via c_0 = 2c_1 - c_2 and c_{m+1} = 2c_m - c_{m-1} makes the first
  // and last rows c_1 = y_0 and c_m = y_{m-1}; the rest stays tridiagonal.
  scratch.resize(2 * m);
  double* u = scratch.data();       // solution c_1..c_m
  double* cp = scratch.data() + m;  // forward-sweep factors
  u[0] = y[0];
  cp[0] = 0.0;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    // row: u_{i-1} + 4 u_i + u_{i+1} = 6 y_i
    double denom = 4.0 - cp[i - 1];
    cp[i] = 1.0 / denom;
    u[i] = (6.0 * y[i * stride_in] - u[i - 1]) / denom;
  }
  if (m >= 2) {
    u[m - 1] = y[(m - 1) * stride_in];
    for (std::size_t i = m - 1; i-- > 1;) u[i] -= cp[i] * u[i + 1];
  }
  out[0] = 2.0 * u[0] - u[1];
  for (std::size_t i = 0; i < m; ++i) out[(i + 1) * stride_out] = u[i];
  out[(m + 1) * stride_out] = 2.0 * u[m - 1] - u[m - 2];
}

inline void bspline_weights(double t, double* w, double* dw) {
  double t2 = t * t, t3 = t2 * t;
  double omt = 1.0 - t;
  w[0] = omt * omt * omt / 6.0;
  w[1] = (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0;
  w[2] = (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0;
  w[3] = t3 / 6.0;
  if (dw) {
    dw[0] = -0.5 * omt * omt;
    dw[1] = 1.5 * t2 - 2.0 * t;
    dw[2] = -1.5 * t2 + t + 0.5;
    dw[3] = 0.5 * t2;
  }
}

}  // namespace detail

/// Continuous image: an interpolating cubic spline over the cell-centered
/// samples of a GridSpec, with analytic gradients.  Evaluation outside the
/// unit domain returns exactly 0 (value and gradient); inside the domain but
/// beyond the outermost cell centers, the query is clamped to the sample
/// hull, which makes the clamped direction's gradient 0 there.
struct ImageModel {
  GridSpec grid;
  std::vector<double> coef;  // (n+2)^dim tensor-product coefficients
  double intensity_min = 0.0;
  double intensity_max = 0.0;
};

inline ImageModel fit_image(const GridSpec& g, const std::vector<double>& samples) {
  if (g.n < 2) throw std::invalid_argument("fit_image: need at least 2 cells per axis");
  std::size_t nc = g.cell_count();
  if (samples.size() != nc) throw std::invalid_argument("fit_image: sample count mismatch");
  for (double s : samples)
    if (!std::isfinite(s)) throw std::invalid_argument("fit_image: non-finite sample");

  ImageModel model;
  model.grid = g;
  auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  model.intensity_min = *mn;
  model.intensity_max = *mx;

  // Filter axis by axis; the filtered axis grows from m to m+2.
  std::size_t m = static_cast<std::size_t>(g.n);
  std::vector<std::size_t> dims(g.dim, m);
  std::vector<double> cur = samples;
  std::vector<double> scratch, line_in, line_out;
  for (int axis = 0; axis < g.dim; ++axis) {
    std::vector<std::size_t> odims = dims;
    odims[axis] = dims[axis] + 2;
    std::size_t total_out = 1, total_in = 1;
    for (int a = 0; a < g.dim; ++a) {
      total_out *= odims[a];
      total_in *= dims[a];
    }
    std::vector<double> next(total_out);
    std::size_t stride_in = 1, stride_out = 1;
    for (int a = 0; a < axis; ++a) {
      stride_in *= dims[a];
      stride_out *= odims[a];
    }
    std::size_t lines = total_in / dims[axis];
    line_in.resize(dims[axis]);
    line_out.resize(odims[axis]);
    for (std::size_t ln = 0; ln < lines; ++ln) {
      // Decompose the line id into the non-axis indices to find base offsets.
      std::size_t rem = ln, base_in = 0, base_out = 0, f_in = 1, f_out = 1;
      for (int a = 0; a < g.dim; ++a) {
        if (a == axis) {
          f_in *= dims[a];
          f_out *= odims[a];
          continue;
        }
        std::size_t idx = rem % dims[a];
        rem /= dims[a];
        base_in += idx * f_in;
        base_out += idx * f_out;
        f_in *= dims[a];
        f_out *= odims[a];
      }
      detail::spline_filter_line(cur.data() + base_in, stride_in, dims[axis],
                                 next.data() + base_out, stride_out, scratch);
    }
    cur.swap(next);
    dims = odims;
  }
  model.coef = std::move(cur);
  return model;
}

/// Value and spatial gradient of the model at one point.
inline void eval_image(const ImageModel& model, const double* x, double* value, double* grad) {
  const GridSpec& g = model.grid;
  for (int p = 0; p < g.dim; ++p) {
    if (x[p] < 0.0 || x[p] > 1.0) {
      *value = 0.0;
      if (grad)
        for (int q = 0; q < g.dim; ++q) grad[q] = 0.0;
      return;
    }
  }
  std::size_t m = static_cast<std::size_t>(g.n);
  std::size_t width = m + 2;
  int kidx[3] = {0, 0, 0};
  double w[3][4], dw[3][4];
  bool clamped[3] = {false, false, false};
  for (int p = 0; p < g.dim; ++p) {
    double u = (x[p] - 0.5 * g.h) / g.h;
    if (u < 0.0) {
      u = 0.0;
      clamped[p] = true;
    }
    double umax = static_cast<double>(m - 1);
    if (u > umax) {
      u = umax;
      clamped[p] = true;
    }
    int k = static_cast<int>(std::floor(u));
    if (k > static_cast<int>(m) - 2) k = static_cast<int>(m) - 2;
    double t = u - k;
    kidx[p] = k;
    detail::bspline_weights(t, w[p], dw[p]);
  }
  const double* c = model.coef.data();
  double ih = 1.0 / g.h;
  if (g.dim == 3) {
    double val = 0, gx = 0, gy = 0, gz = 0;
    for (int kk = 0; kk < 4; ++kk) {
      std::size_t zoff = static_cast<std::size_t>(kidx[2] + kk) * width * width;
      for (int jj = 0; jj < 4; ++jj) {
        std::size_t yoff = zoff + static_cast<std::size_t>(kidx[1] + jj) * width;
        double wyz = w[1][jj] * w[2][kk];
        double dyz = dw[1][jj] * w[2][kk];
        double ydz = w[1][jj] * dw[2][kk];
        const double* row = c + yoff + kidx[0];
        for (int ii = 0; ii < 4; ++ii) {
          double cv = row[ii];
          val += cv * w[0][ii] * wyz;
          gx += cv * dw[0][ii] * wyz;
          gy += cv * w[0][ii] * dyz;
          gz += cv * w[0][ii] * ydz;
        }
      }
    }
    *value = val;
    if (grad) {
      grad[0] = clamped[0] ? 0.0 : gx * ih;
      grad[1] = clamped[1] ? 0.0 : gy * ih;
      grad[2] = clamped[2] ? 0.0 : gz * ih;
    }
  } else {
    double val = 0, gx = 0, gy = 0;
    for (int jj = 0; jj < 4; ++jj) {
      const double* row = c + static_cast<std::size_t>(kidx[1] + jj) * width + kidx[0];
      for (int ii = 0; ii < 4; ++ii) {
        double cv = row[ii];
        val += cv * w[0][ii] * w[1][jj];
        gx += cv * dw[0][ii] * w[1][jj];
        gy += cv * w[0][ii] * dw[1][jj];
      }
    }
    *value = val;
    if (grad) {
      grad[0] = clamped[0] ? 0.0 : gx * ih;
      grad[1] = clamped[1] ? 0.0 : gy * ih;
    }
  }
}

/// Batch evaluation at a component-major point list (all x_1, then x_2, ...).
/// values gets one intensity per point; grads (optional) the block-row-sparse
/// Jacobian, stored component-major like the points.
inline void eval_with_gradient(const ImageModel& model, const std::vector<double>& points,
                               std::vector<double>& values, std::vector<double>* grads) {
  int dim = model.grid.dim;
  if (points.size() % dim != 0) throw std::invalid_argument("eval_with_gradient: point list size");
  std::size_t npts = points.size() / dim;
  values.assign(npts, 0.0);
  if (grads) grads->assign(points.size(), 0.0);
  double x[3], gbuf[3];
  for (std::size_t c = 0; c < npts; ++c) {
    for (int p = 0; p < dim; ++p) x[p] = points[p * npts + c];
    eval_image(model, x, &values[c], grads ? gbuf : nullptr);
    if (grads)
      for (int p = 0; p < dim; ++p) (*grads)[p * npts + c] = gbuf[p];
  }
}

/// Cell-centered pyramid, finest first: each coarser level is the 2^dim-cell
/// block average of the finer one.  levels = total level count (levels == 1
/// returns just the input).
inline std::vector<std::vector<double>> restrict_image(const GridSpec& g,
                                                       const std::vector<double>& samples,
                                                       int levels) {
  if (levels < 1) throw std::invalid_argument("restrict_image: levels must be >= 1");
  if (samples.size() != g.cell_count()) throw std::invalid_argument("restrict_image: sample size");
  int div = 1 << (levels - 1);
  if (g.n % div != 0) throw std::invalid_argument("restrict_image: n not divisible by 2^(levels-1)");
  std::vector<std::vector<double>> pyr;
  pyr.push_back(samples);
  int n = g.n;
  for (int l = 1; l < levels; ++l) {
    int nc = n / 2;
    const std::vector<double>& fine = pyr.back();
    std::vector<double> coarse(g.dim == 3 ? static_cast<std::size_t>(nc) * nc * nc
                                          : static_cast<std::size_t>(nc) * nc);
    if (g.dim == 3) {
      for (int k = 0; k < nc; ++k)
        for (int j = 0; j < nc; ++j)
          for (int i = 0; i < nc; ++i) {
            double s = 0;
            for (int c = 0; c < 8; ++c) {
              int fi = 2 * i + (c & 1), fj = 2 * j + ((c >> 1) & 1), fk = 2 * k + ((c >> 2) & 1);
              s += fine[static_cast<std::size_t>(fi) + static_cast<std::size_t>(n) * (fj + static_cast<std::size_t>(n) * fk)];
            }
            coarse[static_cast<std::size_t>(i) + static_cast<std::size_t>(nc) * (j + static_cast<std::size_t>(nc) * k)] = 0.125 * s;
          }
    } else {
      for (int j = 0; j < nc; ++j)
        for (int i = 0; i < nc; ++i) {
          double s = fine[static_cast<std::size_t>(2 * i) + static_cast<std::size_t>(n) * (2 * j)] +
                     fine[static_cast<std::size_t>(2 * i + 1) + static_cast<std::size_t>(n) * (2 * j)] +
                     fine[static_cast<std::size_t>(2 * i) + static_cast<std::size_t>(n) * (2 * j + 1)] +
                     fine[static_cast<std::size_t>(2 * i + 1) + static_cast<std::size_t>(n) * (2 * j + 1)];
          coarse[static_cast<std::size_t>(i) + static_cast<std::size_t>(nc) * j] = 0.25 * s;
        }
    }
    pyr.push_back(std::move(coarse));
    n = nc;
  }
  return pyr;
}

}  // namespace topreg
