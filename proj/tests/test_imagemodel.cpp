#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support/oracles.hpp"
#include "support/phantoms.hpp"
#include "topreg/image_model.hpp"

using namespace topreg;

TEST_CASE("fit_image basics") {
  SECTION("constant image reproduced everywhere inside") {
    GridSpec g(3, 4);
    std::vector<double> samples(g.cell_count(), 7.0);
    ImageModel model = fit_image(g, samples);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(0.01, 0.99);
    for (int t = 0; t < 100; ++t) {
      double x[3] = {unif(rng), unif(rng), unif(rng)};
      double v, grad[3];
      eval_image(model, x, &v, grad);
      CHECK(v == Catch::Approx(7.0).margin(1e-10));
      for (int p = 0; p < 3; ++p) CHECK(grad[p] == Catch::Approx(0.0).margin(1e-10));
    }
  }
  SECTION("interpolates its own samples") {
    for (GridSpec g : {GridSpec(2, 8), GridSpec(3, 4)}) {
      std::mt19937 rng(17);
      std::uniform_real_distribution<double> unif(0.0, 255.0);
      std::vector<double> samples(g.cell_count());
      for (double& s : samples) s = unif(rng);
      ImageModel model = fit_image(g, samples);
      std::size_t c = 0;
      if (g.dim == 2) {
        for (int j = 0; j < g.n; ++j)
          for (int i = 0; i < g.n; ++i, ++c) {
            double x[2] = {(i + 0.5) * g.h, (j + 0.5) * g.h};
            double v;
            eval_image(model, x, &v, nullptr);
            CHECK(v == Catch::Approx(samples[c]).margin(1e-10));
          }
      } else {
        for (int k = 0; k < g.n; ++k)
          for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i, ++c) {
              double x[3] = {(i + 0.5) * g.h, (j + 0.5) * g.h, (k + 0.5) * g.h};
              double v;
              eval_image(model, x, &v, nullptr);
              CHECK(v == Catch::Approx(samples[c]).margin(1e-10));
            }
      }
    }
  }
  SECTION("linear ramp reproduced in the interior") {
    GridSpec g(2, 16);
    std::vector<double> samples(g.cell_count());
    std::size_t c = 0;
    for (int j = 0; j < g.n; ++j)
      for (int i = 0; i < g.n; ++i, ++c) samples[c] = (i + 0.5) * g.h;
    ImageModel model = fit_image(g, samples);
    std::mt19937 rng(27);
    std::uniform_real_distribution<double> unif(0.1, 0.9);
    for (int t = 0; t < 100; ++t) {
      double x[2] = {unif(rng), unif(rng)};
      double v;
      eval_image(model, x, &v, nullptr);
      CHECK(v == Catch::Approx(x[0]).margin(1e-8));
    }
  }
  SECTION("errors") {
    GridSpec g(2, 4);
    std::vector<double> bad(g.cell_count() + 1, 0.0);
    CHECK_THROWS_AS(fit_image(g, bad), std::invalid_argument);
    std::vector<double> nonfinite(g.cell_count(), 0.0);
    nonfinite[3] = std::nan("");
    CHECK_THROWS_AS(fit_image(g, nonfinite), std::invalid_argument);
  }
}

TEST_CASE("eval_with_gradient") {
  SECTION("outside the domain: value and gradient exactly zero") {
    GridSpec g(3, 4);
    ImageModel model = fit_image(g, phantom::smooth_image(g));
    double v, grad[3];
    double x0[3] = {-0.5, -0.5, -0.5};
    eval_image(model, x0, &v, grad);
    CHECK(v == 0.0);
    for (int p = 0; p < 3; ++p) CHECK(grad[p] == 0.0);
    double x1[3] = {0.5, 1.0001, 0.5};
    eval_image(model, x1, &v, grad);
    CHECK(v == 0.0);
    for (int p = 0; p < 3; ++p) CHECK(grad[p] == 0.0);
  }
  SECTION("analytic gradient vs central differences") {
    for (GridSpec g : {GridSpec(2, 16), GridSpec(3, 8)}) {
      ImageModel model = fit_image(g, phantom::smooth_image(g));
      std::mt19937 rng(37);
      // stay clear of the clamp ring by one cell
      std::uniform_real_distribution<double> unif(1.6 * g.h, 1.0 - 1.6 * g.h);
      const double step = 1e-5;
      for (int t = 0; t < 120; ++t) {
        double x[3] = {unif(rng), unif(rng), unif(rng)};
        double v, grad[3];
        eval_image(model, x, &v, grad);
        double gmax = 0, dmax = 0;
        for (int p = 0; p < g.dim; ++p) {
          double xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
          xp[p] += step;
          xm[p] -= step;
          double vp, vm;
          eval_image(model, xp, &vp, nullptr);
          eval_image(model, xm, &vm, nullptr);
          double fd = (vp - vm) / (2 * step);
          dmax = std::max(dmax, std::abs(fd - grad[p]));
          gmax = std::max(gmax, std::abs(fd));
        }
        CHECK(dmax / std::max(gmax, 1.0) < 1e-6);
      }
    }
  }
  SECTION("batch layout matches pointwise evaluation") {
    GridSpec g(2, 8);
    ImageModel model = fit_image(g, phantom::smooth_image(g));
    std::vector<double> pts = {0.3, 0.7, -0.2, /* y: */ 0.4, 0.9, 0.5};
    std::vector<double> vals, grads;
    eval_with_gradient(model, pts, vals, &grads);
    REQUIRE(vals.size() == 3);
    CHECK(vals[2] == 0.0);  // outside
    double v, gr[2], x[2] = {0.3, 0.4};
    eval_image(model, x, &v, gr);
    CHECK(vals[0] == v);
    CHECK(grads[0] == gr[0]);
    CHECK(grads[3] == gr[1]);
  }
}

TEST_CASE("restrict_image") {
  SECTION("constant at every level") {
    GridSpec g(3, 8);
    std::vector<double> samples(g.cell_count(), 3.5);
    auto pyr = restrict_image(g, samples, 3);
    REQUIRE(pyr.size() == 3);
    for (const auto& level : pyr)
      for (double v : level) CHECK(v == Catch::Approx(3.5).margin(1e-14));
  }
  SECTION("2D checkerboard averages to one half") {
    GridSpec g(2, 4);
    std::vector<double> samples(g.cell_count());
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < 4; ++i) samples[g.cell_index(i, j)] = (i + j) % 2 ? 1.0 : 0.0;
    auto pyr = restrict_image(g, samples, 2);
    REQUIRE(pyr[1].size() == 4);
    for (double v : pyr[1]) CHECK(v == Catch::Approx(0.5));
  }
  SECTION("random volume: coarse voxel equals the mean of its children") {
    GridSpec g(3, 8);
    std::mt19937 rng(47);
    std::uniform_real_distribution<double> unif(0, 255);
    std::vector<double> samples(g.cell_count());
    for (double& s : samples) s = unif(rng);
    auto pyr = restrict_image(g, samples, 2);
    GridSpec gc(3, 4);
    for (int k = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i) {
          double mean = 0;
          for (int c = 0; c < 8; ++c)
            mean += samples[g.cell_index(2 * i + (c & 1), 2 * j + ((c >> 1) & 1),
                                         2 * k + ((c >> 2) & 1))];
          mean /= 8.0;
          CHECK(pyr[1][gc.cell_index(i, j, k)] == Catch::Approx(mean).margin(1e-12));
        }
  }
  SECTION("mass preservation across levels") {
    GridSpec g(2, 16);
    auto img = phantom::smooth_image(g);
    auto pyr = restrict_image(g, img, 3);
    double mean0 = 0;
    for (double v : pyr[0]) mean0 += v;
    mean0 /= pyr[0].size();
    for (const auto& level : pyr) {
      double mean = 0;
      for (double v : level) mean += v;
      mean /= level.size();
      CHECK(mean == Catch::Approx(mean0).margin(1e-12));
    }
  }
  SECTION("divisibility enforced") {
    GridSpec g(2, 6);
    std::vector<double> samples(g.cell_count(), 0.0);
    CHECK_THROWS_AS(restrict_image(g, samples, 3), std::invalid_argument);
    CHECK_NOTHROW(restrict_image(g, samples, 2));
  }
}
