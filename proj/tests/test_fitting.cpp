#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/oracles.hpp"
#include "support/phantoms.hpp"
#include "topreg/fitting.hpp"
#include "topreg/image_model.hpp"
#include "topreg/tets.hpp"

using namespace topreg;

TEST_CASE("build_prior validation") {
  GridSpec g(2, 2);
  SECTION("single region") {
    PriorPartition p = build_prior(g, {1, 1, 1, 1});
    CHECK(p.m == 1);
    CHECK(p.counts == std::vector<std::int64_t>{4});
  }
  SECTION("counts are the diagonal of M^T M") {
    PriorPartition p = build_prior(g, {1, 1, 2, 2});
    CHECK(p.m == 2);
    CHECK(p.counts == std::vector<std::int64_t>{2, 2});
  }
  SECTION("gaps rejected") {
    CHECK_THROWS_AS(build_prior(g, {1, 3, 1, 3}), std::invalid_argument);
    CHECK_THROWS_AS(build_prior(g, {0, 1, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(build_prior(g, std::vector<int>{}), std::invalid_argument);
  }
}

TEST_CASE("fit energy") {
  SECTION("exact fit costs nothing") {
    GridSpec g(2, 2);
    PriorPartition p = build_prior(g, {1, 2, 1, 2});
    std::vector<double> warped = {5.0, 9.0, 5.0, 9.0};
    CHECK(fit_energy(g, warped, p, {5.0, 9.0}) == 0.0);
  }
  SECTION("single cell, h = 1") {
    GridSpec g(2, 1);
    PriorPartition p = build_prior(g, {1});
    CHECK(fit_energy(g, {5.0}, p, {3.0}) == Catch::Approx(2.0));
  }
  SECTION("random data against the direct summation oracle") {
    GridSpec g(2, 2);
    PriorPartition p = build_prior(g, {2, 1, 2, 1});
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> unif(0, 10);
    std::vector<double> warped(4);
    for (double& w : warped) w = unif(rng);
    IntensityConstants C = {unif(rng), unif(rng)};
    double ref = 0;
    for (int c = 0; c < 4; ++c) {
      double r = warped[c] - C[p.labels[c] - 1];
      ref += r * r;
    }
    ref *= 0.5 * g.cell_measure();
    CHECK(fit_energy(g, warped, p, C) == Catch::Approx(ref).margin(1e-12));
  }
}

TEST_CASE("fit gradient") {
  SECTION("zero residual: both gradients vanish") {
    GridSpec g(2, 2);
    PriorPartition p = build_prior(g, {1, 2, 1, 2});
    std::vector<double> warped = {4.0, 6.0, 4.0, 6.0};
    std::vector<double> warped_grad(2 * 4, 0.7);
    std::vector<double> gY(g.dof_count(), 0.0), gC(2, 0.0);
    fit_gradient_add(g, warped, warped_grad, p, {4.0, 6.0}, gY, gC);
    for (double v : gY) CHECK(v == 0.0);
    for (double v : gC) CHECK(v == 0.0);
  }
  SECTION("gradient in C matches finite differences") {
    GridSpec g(2, 2);
    PriorPartition p = build_prior(g, {2, 1, 2, 2});
    std::vector<double> warped = {3.0, 1.0, 4.0, 1.5};
    std::vector<double> warped_grad(8, 0.0);
    IntensityConstants C = {2.0, 0.5};
    std::vector<double> gY(g.dof_count(), 0.0), gC(2, 0.0);
    fit_gradient_add(g, warped, warped_grad, p, C, gY, gC);
    auto f = [&](const std::vector<double>& CC) { return fit_energy(g, warped, p, CC); };
    // quadratic in C, so central differences are exact for any step
    auto fd = oracle::fd_gradient(f, C, 1e-3);
    CHECK(oracle::rel_error_normwise(gC, fd) < 1e-10);
  }
  SECTION("gradient in Y matches finite differences through the image model, 3D n=2") {
    GridSpec g(3, 2);
    GridSpec gimg(3, 8);  // smooth model on a finer sample lattice
    ImageModel model = fit_image(gimg, phantom::smooth_image(gimg));
    std::vector<int> labels(g.cell_count());
    for (std::size_t c = 0; c < labels.size(); ++c) labels[c] = 1 + (c % 2);
    PriorPartition p = build_prior(g, labels);
    IntensityConstants C = {100.0, 150.0};
    auto Y = oracle::random_feasible_field_dirichlet(g, 21, 0.03);
    auto energy = [&](const std::vector<double>& Z) {
      auto pts = average_to_cells(g, Z);
      std::vector<double> warped;
      eval_with_gradient(model, pts, warped, nullptr);
      return fit_energy(g, warped, p, C);
    };
    auto pts = average_to_cells(g, Y);
    std::vector<double> warped, wgrad;
    eval_with_gradient(model, pts, warped, &wgrad);
    std::vector<double> gY(g.dof_count(), 0.0), gC(2, 0.0);
    fit_gradient_add(g, warped, wgrad, p, C, gY, gC);
    auto fd = oracle::fd_gradient(energy, Y, 1e-6);
    CHECK(oracle::rel_error_normwise(gY, fd) < 1e-6);
  }
}

TEST_CASE("fit Gauss-Newton blocks") {
  GridSpec g(2, 2);
  PriorPartition p = build_prior(g, {1, 2, 2, 1});
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> unif(-1, 1);
  std::vector<double> warped_grad(2 * g.cell_count());
  for (double& v : warped_grad) v = unif(rng);

  auto apply = [&](const std::vector<double>& wY, const std::vector<double>& wC) {
    std::vector<double> oY(g.dof_count(), 0.0), oC(p.m, 0.0);
    fit_gn_apply_add(g, warped_grad, p, wY, wC, oY, oC);
    return std::pair(oY, oC);
  };

  SECTION("zero maps to zero") {
    auto [oY, oC] = apply(std::vector<double>(g.dof_count(), 0.0), std::vector<double>(p.m, 0.0));
    for (double v : oY) CHECK(v == 0.0);
    for (double v : oC) CHECK(v == 0.0);
  }
  SECTION("block symmetry under the joint inner product") {
    for (int t = 0; t < 20; ++t) {
      std::vector<double> uY(g.dof_count()), wY(g.dof_count()), uC(p.m), wC(p.m);
      for (double& x : uY) x = unif(rng);
      for (double& x : wY) x = unif(rng);
      for (double& x : uC) x = unif(rng);
      for (double& x : wC) x = unif(rng);
      auto [Au_Y, Au_C] = apply(uY, uC);
      auto [Aw_Y, Aw_C] = apply(wY, wC);
      double a = 0, b = 0;
      for (std::size_t i = 0; i < uY.size(); ++i) a += Au_Y[i] * wY[i];
      for (int l = 0; l < p.m; ++l) a += Au_C[l] * wC[l];
      for (std::size_t i = 0; i < uY.size(); ++i) b += uY[i] * Aw_Y[i];
      for (int l = 0; l < p.m; ++l) b += uC[l] * Aw_C[l];
      CHECK(a == Catch::Approx(b).epsilon(1e-10).margin(1e-12));
    }
  }
  SECTION("flat image: only M^T M survives") {
    std::vector<double> zero_grad(2 * g.cell_count(), 0.0);
    std::vector<double> wY(g.dof_count(), 0.3), wC = {2.0, -1.0};
    std::vector<double> oY(g.dof_count(), 0.0), oC(p.m, 0.0);
    fit_gn_apply_add(g, zero_grad, p, wY, wC, oY, oC);
    for (double v : oY) CHECK(v == 0.0);
    for (int l = 0; l < p.m; ++l)
      CHECK(oC[l] == Catch::Approx(g.cell_measure() * p.counts[l] * wC[l]).margin(1e-14));
  }
}

TEST_CASE("initial constants") {
  GridSpec g(2, 2);
  SECTION("mean of constants") {
    PriorPartition p = build_prior(g, {1, 1, 1, 1});
    auto C = initial_constants({3.0, 3.0, 3.0, 3.0}, p);
    CHECK(C == IntensityConstants{3.0});
  }
  SECTION("arithmetic mean per region") {
    PriorPartition p = build_prior(g, {1, 2, 2, 1});
    auto C = initial_constants({0.0, 2.0, 4.0, 6.0}, p);
    CHECK(C[0] == Catch::Approx(3.0));
    CHECK(C[1] == Catch::Approx(3.0));
  }
  SECTION("attains the minimum of fit_energy over C") {
    GridSpec g4(2, 4);
    std::vector<int> labels(g4.cell_count());
    for (std::size_t c = 0; c < labels.size(); ++c) labels[c] = 1 + (c % 3);
    PriorPartition p = build_prior(g4, labels);
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> unif(0, 255);
    std::vector<double> warped(g4.cell_count());
    for (double& w : warped) w = unif(rng);
    auto C = initial_constants(warped, p);
    double best = fit_energy(g4, warped, p, C);
    std::uniform_real_distribution<double> cdist(-50, 300);
    for (int t = 0; t < 100; ++t) {
      IntensityConstants Cr = {cdist(rng), cdist(rng), cdist(rng)};
      CHECK(best <= fit_energy(g4, warped, p, Cr) + 1e-12);
    }
  }
}
