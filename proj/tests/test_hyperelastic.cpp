#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "topreg/hyperelastic.hpp"

using namespace topreg;

namespace {
std::vector<double> scaled_coordinates(const GridSpec& g, double factor) {
  auto X = nodal_coordinates(g);
  for (double& x : X) x *= factor;
  return X;
}

double reg_total_energy(const GridSpec& g, const std::vector<double>& Y,
                        const std::vector<double>& X, const RegularizerParams& p) {
  HyperelasticEval ev = hyperelastic_eval(g, Y, X, p);
  return ev.total();
}
}  // namespace

TEST_CASE("phi_v properties") {
  SECTION("frozen values") {
    CHECK(phi_v(1.0) == 0.0);
    CHECK(phi_v(2.0) == Catch::Approx(0.25).margin(1e-15));
    CHECK(phi_v(0.5) == Catch::Approx(0.25).margin(1e-15));
    CHECK(phi_v(8.0) == Catch::Approx(37.515625).margin(1e-12));
  }
  SECTION("reciprocal symmetry on a log-spaced lattice") {
    for (int i = -40; i <= 40; ++i) {
      double x = std::pow(10.0, i * 0.05);
      CHECK(phi_v(x) == Catch::Approx(phi_v(1.0 / x)).epsilon(1e-12));
    }
  }
  SECTION("derivatives against central differences") {
    for (double x : {0.1, 0.37, 0.9, 1.0, 1.5, 3.0, 8.0}) {
      double eps = 1e-6 * std::max(x, 1.0);
      double fd1 = (phi_v(x + eps) - phi_v(x - eps)) / (2 * eps);
      double fd2 = (phi_v_d1(x + eps) - phi_v_d1(x - eps)) / (2 * eps);
      CHECK(phi_v_d1(x) == Catch::Approx(fd1).margin(1e-5 * std::max(1.0, std::abs(fd1))));
      CHECK(phi_v_d2(x) == Catch::Approx(fd2).margin(1e-5 * std::max(1.0, std::abs(fd2))));
    }
  }
  SECTION("second derivative positive away from 1, zero exactly at 1") {
    CHECK(phi_v_d2(1.0) == 0.0);
    for (int i = -40; i <= 40; ++i) {
      double x = std::pow(10.0, i * 0.05);
      if (x != 1.0) CHECK(phi_v_d2(x) > 0.0);
    }
  }
  SECTION("barrier: blows up toward zero volume") {
    CHECK(phi_v(1e-4) > 1e7);
  }
}

TEST_CASE("regularizer parameter validation") {
  RegularizerParams p;
  p.alpha_v = 0.0;
  CHECK_THROWS_AS(p.validate(3), std::invalid_argument);
  p.alpha_v = 1.0;
  p.alpha_s = 1.0;
  CHECK_THROWS_AS(p.validate(2), std::invalid_argument);
  CHECK_NOTHROW(p.validate(3));
}

TEST_CASE("length energy") {
  GridSpec g(3, 2);
  auto X = nodal_coordinates(g);
  SECTION("identity and translations cost nothing") {
    CHECK(length_energy(g, X, X, 10.0) == 0.0);
    auto Y = X;
    std::size_t NN = g.node_count();
    for (std::size_t i = 0; i < NN; ++i) {
      Y[i] += 0.2;
      Y[NN + i] -= 0.1;
    }
    CHECK(length_energy(g, Y, X, 10.0) == Catch::Approx(0.0).margin(1e-16));
  }
  SECTION("Y = 2X against the dense quadratic-form oracle") {
    auto Y = scaled_coordinates(g, 2.0);
    double alpha_l = 3.0;
    auto dense = oracle::dense_forward_difference(g);
    std::vector<double> D(Y.size());
    for (std::size_t i = 0; i < Y.size(); ++i) D[i] = Y[i] - X[i];
    auto AD = oracle::matvec(dense, D);
    double ref = 0;
    for (double v : AD) ref += v * v;
    ref *= 0.5 * alpha_l * g.cell_measure();
    CHECK(length_energy(g, Y, X, alpha_l) == Catch::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("cofactor field") {
  GridSpec g(3, 2);
  SECTION("identity: cof(I) = I, so S = 3 per tet") {
    auto s = cofactor_field(g, nodal_coordinates(g));
    for (std::size_t e = 0; e < g.elem_count(); ++e) {
      double S = 0;
      for (int i = 0; i < 9; ++i) S += s[i][e] * s[i][e];
      CHECK(S == Catch::Approx(3.0).margin(1e-12));
    }
  }
  SECTION("uniform scaling: cof(2I) = 4I and S = 48") {
    auto s = cofactor_field(g, scaled_coordinates(g, 2.0));
    for (std::size_t e = 0; e < g.elem_count(); ++e) {
      for (int i : {0, 4, 8}) CHECK(s[i][e] == Catch::Approx(4.0).margin(1e-12));
      for (int i : {1, 2, 3, 5, 6, 7}) CHECK(s[i][e] == Catch::Approx(0.0).margin(1e-12));
      double S = 0;
      for (int i = 0; i < 9; ++i) S += s[i][e] * s[i][e];
      CHECK(S == Catch::Approx(48.0).margin(1e-11));
    }
  }
  SECTION("random field against the classic 3x3 cofactor oracle") {
    auto Y = oracle::random_feasible_field(g, 101);
    auto s = cofactor_field(g, Y);
    for (int ck = 0; ck < g.n; ++ck)
      for (int cj = 0; cj < g.n; ++cj)
        for (int ci = 0; ci < g.n; ++ci)
          for (int t = 0; t < 6; ++t) {
            std::size_t e = g.cell_index(ci, cj, ck) * 6 + t;
            double J[3][3];
            for (int p = 0; p < 3; ++p) {
              auto row = oracle::element_jacobian_row(g, ci, cj, ck, t, Y, p);
              for (int q = 0; q < 3; ++q) J[p][q] = row[q];
            }
            // cofactor via 2x2 minors with sign
            for (int p = 0; p < 3; ++p)
              for (int q = 0; q < 3; ++q) {
                int r1 = (p + 1) % 3, r2 = (p + 2) % 3, c1 = (q + 1) % 3, c2 = (q + 2) % 3;
                double cof = J[r1][c1] * J[r2][c2] - J[r1][c2] * J[r2][c1];
                CHECK(s[p * 3 + q][e] == Catch::Approx(cof).margin(1e-12));
              }
          }
  }
}

TEST_CASE("determinant field") {
  SECTION("identity and scaling, 3D") {
    GridSpec g(3, 2);
    auto v1 = determinant_field(g, nodal_coordinates(g));
    for (double v : v1) CHECK(v == Catch::Approx(1.0).margin(1e-13));
    auto v8 = determinant_field(g, scaled_coordinates(g, 2.0));
    for (double v : v8) CHECK(v == Catch::Approx(8.0).margin(1e-12));
  }
  SECTION("identity and scaling, 2D") {
    GridSpec g(2, 3);
    auto v1 = determinant_field(g, nodal_coordinates(g));
    for (double v : v1) CHECK(v == Catch::Approx(1.0).margin(1e-13));
    auto v4 = determinant_field(g, scaled_coordinates(g, 2.0));
    for (double v : v4) CHECK(v == Catch::Approx(4.0).margin(1e-13));
  }
  SECTION("random field against the 3x3 determinant oracle") {
    GridSpec g(3, 2);
    auto Y = oracle::random_feasible_field(g, 102);
    auto v = determinant_field(g, Y);
    for (int ck = 0; ck < g.n; ++ck)
      for (int cj = 0; cj < g.n; ++cj)
        for (int ci = 0; ci < g.n; ++ci)
          for (int t = 0; t < 6; ++t) {
            std::size_t e = g.cell_index(ci, cj, ck) * 6 + t;
            double J[3][3];
            for (int p = 0; p < 3; ++p) {
              auto row = oracle::element_jacobian_row(g, ci, cj, ck, t, Y, p);
              for (int q = 0; q < 3; ++q) J[p][q] = row[q];
            }
            double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                         J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                         J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
            CHECK(v[e] == Catch::Approx(det).margin(1e-12));
          }
  }
}

TEST_CASE("surface and volume energies") {
  GridSpec g(3, 2);
  RegularizerParams p;
  p.alpha_l = 0;
  p.alpha_s = 2.0;
  p.alpha_v = 5.0;
  SECTION("identity costs nothing") {
    auto ev = hyperelastic_eval(g, nodal_coordinates(g), nodal_coordinates(g), p);
    CHECK(ev.energy_surface == Catch::Approx(0.0).margin(1e-20));
    CHECK(ev.energy_volume == Catch::Approx(0.0).margin(1e-20));
    CHECK(ev.min_det == Catch::Approx(1.0));
    CHECK(ev.feasible);
  }
  SECTION("Y = 2X: closed-form volume energy") {
    auto ev = hyperelastic_eval(g, scaled_coordinates(g, 2.0), nodal_coordinates(g), p);
    // (h^3/6) alpha_v phi_v(8) per tet, 6 n^3 tets: alpha_v * 37.515625
    CHECK(ev.energy_volume == Catch::Approx(p.alpha_v * 37.515625).epsilon(1e-12));
    // per tet phi_w(48) = (45)^2/2; total = (h^3/6) alpha_s (45^2/2) 6 n^3
    CHECK(ev.energy_surface == Catch::Approx(p.alpha_s * 0.5 * 45.0 * 45.0).epsilon(1e-12));
  }
  SECTION("non-positive determinant yields the sentinel") {
    std::vector<double> v = {1.0, 0.5, -0.1};
    CHECK(volume_energy(g, v, 1.0) == kInfeasibleEnergy);
    std::vector<double> v0 = {1.0, 0.0};
    CHECK(volume_energy(g, v0, 1.0) == kInfeasibleEnergy);
    // a folded field is flagged infeasible, energy stays the sentinel
    auto Y = nodal_coordinates(g);
    Y[g.node_index(1, 1, 1)] += 1.5;
    auto ev = hyperelastic_eval(g, Y, nodal_coordinates(g), p);
    CHECK_FALSE(ev.feasible);
    CHECK(ev.total() == kInfeasibleEnergy);
  }
  SECTION("convex envelope mode ignores shrinkage") {
    CHECK(surface_phi(2.0, SurfaceMode::ConvexEnvelope) == 0.0);
    CHECK(surface_phi(2.0, SurfaceMode::DoubleWell) == 0.5);
    CHECK(surface_phi(5.0, SurfaceMode::ConvexEnvelope) == 2.0);
  }
}

TEST_CASE("regularizer gradient") {
  SECTION("vanishes at the identity") {
    for (GridSpec g : {GridSpec(2, 3), GridSpec(3, 2)}) {
      RegularizerParams p;
      p.alpha_l = 2.0;
      p.alpha_s = g.dim == 3 ? 1.0 : 0.0;
      p.alpha_v = 3.0;
      auto X = nodal_coordinates(g);
      auto grad = reg_gradient(g, X, X, p);
      for (double v : grad) CHECK(v == Catch::Approx(0.0).margin(1e-13));
    }
  }
  SECTION("matches central finite differences, 3D n=2 and n=3") {
    for (int n : {2, 3}) {
      GridSpec g(3, n);
      RegularizerParams p;
      p.alpha_l = 2.0;
      p.alpha_s = 1.5;
      p.alpha_v = 3.0;
      auto X = nodal_coordinates(g);
      auto Y = oracle::random_feasible_field(g, 200 + n);
      auto grad = reg_gradient(g, Y, X, p);
      auto f = [&](const std::vector<double>& Z) { return reg_total_energy(g, Z, X, p); };
      auto fd = oracle::fd_gradient(f, Y, 1e-6);
      CHECK(oracle::rel_error_normwise(grad, fd) < 1e-6);
    }
  }
  SECTION("matches central finite differences, 2D n=4") {
    GridSpec g(2, 4);
    RegularizerParams p;
    p.alpha_l = 2.0;
    p.alpha_s = 0.0;
    p.alpha_v = 3.0;
    auto X = nodal_coordinates(g);
    auto Y = oracle::random_feasible_field(g, 205);
    auto grad = reg_gradient(g, Y, X, p);
    auto f = [&](const std::vector<double>& Z) { return reg_total_energy(g, Z, X, p); };
    auto fd = oracle::fd_gradient(f, Y, 1e-6);
    CHECK(oracle::rel_error_normwise(grad, fd) < 1e-6);
  }
  SECTION("length term alone matches the dense oracle") {
    GridSpec g(3, 2);
    RegularizerParams p;
    p.alpha_l = 4.0;
    p.alpha_s = 0.0;
    p.alpha_v = 1.0;
    auto X = nodal_coordinates(g);
    auto Y = oracle::random_feasible_field(g, 206);
    std::vector<double> grad(g.dof_count(), 0.0);
    length_gradient_add(g, Y, X, p.alpha_l, grad);
    auto dense = oracle::dense_forward_difference(g);
    std::vector<double> D(Y.size());
    for (std::size_t i = 0; i < Y.size(); ++i) D[i] = Y[i] - X[i];
    auto ref = oracle::mattvec(dense, oracle::matvec(dense, D));
    for (double& r : ref) r *= p.alpha_l * g.cell_measure();
    CHECK(oracle::rel_error_normwise(grad, ref) < 1e-10);
  }
  SECTION("infeasible field rejected") {
    GridSpec g(3, 2);
    auto X = nodal_coordinates(g);
    auto Y = X;
    Y[g.node_index(1, 1, 1)] += 1.5;
    RegularizerParams p;
    CHECK_THROWS_AS(reg_gradient(g, Y, X, p), std::invalid_argument);
  }
}

TEST_CASE("regularizer Gauss-Newton curvature") {
  GridSpec g(3, 2);
  RegularizerParams p;
  p.alpha_l = 2.0;
  p.alpha_s = 1.0;
  p.alpha_v = 3.0;
  auto X = nodal_coordinates(g);
  SECTION("linear: zero maps to zero") {
    auto Y = oracle::random_feasible_field(g, 301);
    std::vector<double> w(g.dof_count(), 0.0);
    auto out = reg_gn_curvature_apply(g, Y, p, w);
    for (double v : out) CHECK(v == 0.0);
  }
  SECTION("symmetry on random pairs") {
    auto Y = oracle::random_feasible_field(g, 302);
    std::mt19937 rng(303);
    std::uniform_real_distribution<double> unif(-1, 1);
    for (int t = 0; t < 10; ++t) {
      std::vector<double> u(g.dof_count()), w(g.dof_count());
      for (double& x : u) x = unif(rng);
      for (double& x : w) x = unif(rng);
      auto Hu = reg_gn_curvature_apply(g, Y, p, u);
      auto Hw = reg_gn_curvature_apply(g, Y, p, w);
      double a = 0, b = 0, nu = 0, nw = 0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        a += Hu[i] * w[i];
        b += u[i] * Hw[i];
        nu += u[i] * u[i];
        nw += w[i] * w[i];
      }
      CHECK(std::abs(a - b) <= 1e-10 * std::sqrt(nu) * std::sqrt(nw) + 1e-12);
    }
  }
  SECTION("positive semidefinite at the identity and at random feasible fields") {
    std::mt19937 rng(304);
    std::uniform_real_distribution<double> unif(-1, 1);
    for (const auto& Y : {nodal_coordinates(g), oracle::random_feasible_field(g, 305)}) {
      for (int t = 0; t < 100; ++t) {
        std::vector<double> w(g.dof_count());
        for (double& x : w) x = unif(rng);
        auto Hw = reg_gn_curvature_apply(g, Y, p, w);
        double q = 0;
        for (std::size_t i = 0; i < w.size(); ++i) q += w[i] * Hw[i];
        CHECK(q >= -1e-12);
      }
    }
  }
}
