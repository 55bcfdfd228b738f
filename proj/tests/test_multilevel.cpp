#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/oracles.hpp"
#include "support/phantoms.hpp"
#include "topreg/multilevel.hpp"

using namespace topreg;

TEST_CASE("build_pyramid") {
  SECTION("L = 1 is the input") {
    GridSpec g(2, 8);
    auto img = phantom::smooth_image(g);
    auto lab = phantom::disk_labels(g, 0.5, 0.5, 0.3);
    Pyramid pyr = build_pyramid(g, img, lab, 1);
    REQUIRE(pyr.L == 1);
    CHECK(pyr.levels[0].image == img);
    CHECK(pyr.levels[0].labels == lab);
  }
  SECTION("constant image stays constant on every level") {
    GridSpec g(3, 16);
    std::vector<double> img(g.cell_count(), 9.0);
    std::vector<int> lab(g.cell_count(), 1);
    // region 2 fills exactly one coarse block (fine cells {6,7}^3)
    for (int k = 6; k <= 7; ++k)
      for (int j = 6; j <= 7; ++j)
        for (int i = 6; i <= 7; ++i) lab[g.cell_index(i, j, k)] = 2;
    Pyramid pyr = build_pyramid(g, img, lab, 2);
    REQUIRE(pyr.L == 2);
    for (const auto& lev : pyr.levels)
      for (double v : lev.image) CHECK(v == 9.0);
    // the 2x2x2 block of region 2 survives majority voting into one coarse cell
    GridSpec gc(3, 8);
    CHECK(pyr.levels[1].labels[gc.cell_index(3, 3, 3)] == 2);
    for (int l = 1; l <= 2; ++l)
      CHECK(detail::all_regions_present(pyr.levels[1].labels, 2));
  }
  SECTION("tie votes take the lowest region id") {
    GridSpec g(2, 8);
    std::vector<double> img(g.cell_count(), 0.0);
    std::vector<int> lab(g.cell_count(), 2);
    // block (0,0): fine cells {1,2,1,2} -> tie -> 1
    lab[g.cell_index(0, 0)] = 1;
    lab[g.cell_index(0, 1)] = 1;
    // keep region 1 alive elsewhere so no level is skipped
    for (int j = 4; j < 8; ++j)
      for (int i = 4; i < 8; ++i) lab[g.cell_index(i, j)] = 1;
    Pyramid pyr = build_pyramid(g, img, lab, 2, {});
    REQUIRE(pyr.L == 2);
    GridSpec gc(2, 4);
    CHECK(pyr.levels[1].labels[gc.cell_index(0, 0)] == 1);  // the tie block
    CHECK(pyr.levels[1].labels[gc.cell_index(1, 0)] == 2);
    CHECK(pyr.levels[1].labels[gc.cell_index(3, 3)] == 1);
  }
  SECTION("vanishing region skips the level with a warning") {
    GridSpec g(2, 8);
    std::vector<double> img(g.cell_count(), 0.0);
    std::vector<int> lab(g.cell_count(), 1);
    lab[g.cell_index(3, 3)] = 2;  // single cell, lost under majority vote
    int warnings = 0;
    Pyramid pyr = build_pyramid(g, img, lab, 2, [&](const std::string&) { warnings++; });
    CHECK(pyr.L == 1);
    CHECK(warnings == 1);
  }
  SECTION("divisibility and coarseness validated") {
    GridSpec g(2, 12);
    std::vector<double> img(g.cell_count(), 0.0);
    std::vector<int> lab(g.cell_count(), 1);
    CHECK_THROWS_AS(build_pyramid(g, img, lab, 3), std::invalid_argument);  // 12/4 not integer... 12/4=3 <4
    CHECK_NOTHROW(build_pyramid(g, img, lab, 2));
  }
}

TEST_CASE("prolong") {
  SECTION("identity is reproduced") {
    for (int dim : {2, 3}) {
      GridSpec gc(dim, 4), gf(dim, 8);
      auto Xf = nodal_coordinates(gf);
      auto Yf = prolong(gc, nodal_coordinates(gc), gf);
      for (std::size_t i = 0; i < Xf.size(); ++i)
        CHECK(Yf[i] == Catch::Approx(Xf[i]).margin(1e-14));
    }
  }
  SECTION("affine maps are reproduced exactly") {
    GridSpec gc(3, 2), gf(3, 4);
    double B[3][3] = {{1.1, 0.2, -0.1}, {0.05, 0.9, 0.1}, {-0.2, 0.0, 1.05}};
    double t[3] = {0.1, -0.05, 0.2};
    auto make_affine = [&](const GridSpec& g) {
      auto X = nodal_coordinates(g);
      std::size_t NN = g.node_count();
      std::vector<double> Y(g.dof_count());
      for (std::size_t i = 0; i < NN; ++i)
        for (int p = 0; p < 3; ++p)
          Y[p * NN + i] = B[p][0] * X[i] + B[p][1] * X[NN + i] + B[p][2] * X[2 * NN + i] + t[p];
      return Y;
    };
    auto Yf = prolong(gc, make_affine(gc), gf);
    auto ref = make_affine(gf);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(Yf[i] == Catch::Approx(ref[i]).margin(1e-13));
  }
  SECTION("nested elements inherit the coarse determinant exactly") {
    for (int dim : {2, 3}) {
      GridSpec gc(dim, dim == 3 ? 2 : 4);
      GridSpec gf(dim, 2 * gc.n);
      for (unsigned seed : {7u, 8u, 9u}) {
        auto Yc = oracle::random_feasible_field(gc, seed);
        auto Yf = prolong(gc, Yc, gf);
        auto vc = determinant_field(gc, Yc);
        auto vf = determinant_field(gf, Yf);
        // locate each fine element's reference barycenter in the coarse mesh
        std::size_t nodes[4];
        int nv = dim + 1;
        auto Xf = nodal_coordinates(gf);
        std::size_t NNf = gf.node_count();
        std::size_t e = 0;
        int n = gf.n;
        int kmax = dim == 3 ? n : 1;
        for (int ck = 0; ck < kmax; ++ck)
          for (int cj = 0; cj < n; ++cj)
            for (int ci = 0; ci < n; ++ci)
              for (int t = 0; t < static_cast<int>(gf.elems_per_cell()); ++t, ++e) {
                element_nodes(gf, ci, cj, ck, t, nodes);
                double bary[3] = {0, 0, 0};
                for (int m = 0; m < nv; ++m)
                  for (int p = 0; p < dim; ++p) bary[p] += Xf[p * NNf + nodes[m]] / nv;
                LocatedPoint lp = locate_point(gc, bary);
                CHECK(vf[e] == Catch::Approx(vc[lp.elem]).margin(1e-12));
              }
        double mn = *std::min_element(vf.begin(), vf.end());
        CHECK(mn > 0);  // positivity transported
      }
    }
  }
  SECTION("non-factor-2 refinement rejected") {
    GridSpec gc(2, 4), gbad(2, 12);
    auto Yc = nodal_coordinates(gc);
    CHECK_THROWS_AS(prolong(gc, Yc, gbad), std::invalid_argument);
  }
}

TEST_CASE("run_multilevel") {
  GridSpec g(2, 32, BoundaryCondition::Dirichlet);
  auto prior_labels = phantom::disk_labels(g, 0.5, 0.5, 0.22);
  auto image_labels = phantom::disk_labels(g, 0.58, 0.5, 0.24);
  auto img = phantom::labels_to_image(image_labels, 20.0, 220.0);
  RegularizerParams params;
  params.alpha_l = 100.0;
  params.alpha_s = 0.0;
  params.alpha_v = 100.0;
  SolverConfig cfg;

  SECTION("L = 1 reduces exactly to ggn_solve") {
    MultilevelResult ml = run_multilevel(g, img, prior_labels, params, cfg, 1);
    Problem prob(g, fit_image(g, img), build_prior(g, prior_labels), params);
    std::vector<double> pts = average_to_cells(g, prob.X);
    std::vector<double> warped;
    eval_with_gradient(prob.model, pts, warped, nullptr);
    SolveResult direct = ggn_solve(prob, cfg, prob.X, initial_constants(warped, prob.prior), g.n);
    REQUIRE(ml.records.size() == direct.trajectory.size());
    for (std::size_t i = 0; i < ml.records.size(); ++i) {
      CHECK(ml.records[i].F == direct.trajectory[i].F);
      CHECK(ml.records[i].eta == direct.trajectory[i].eta);
    }
    CHECK(ml.final.state.F == direct.state.F);
  }
  SECTION("multilevel final energy close to single-level, feasibility at every level start") {
    MultilevelResult ml = run_multilevel(g, img, prior_labels, params, cfg, 3);
    CHECK(ml.levels_solved == 3);
    // every level begins feasible and keeps positivity
    for (const auto& rec : ml.records) CHECK(rec.min_det > 0.0);
    // per-level monotone decrease
    for (std::size_t i = 1; i < ml.records.size(); ++i)
      if (ml.records[i].level == ml.records[i - 1].level)
        CHECK(ml.records[i].F < ml.records[i - 1].F);
    MultilevelResult sl = run_multilevel(g, img, prior_labels, params, cfg, 1);
    CHECK(ml.final.state.F <= 1.05 * sl.final.state.F);
    CHECK(ml.final.state.min_det > 0.0);
  }
}
