// Batch front-end: load an image and a prior label map, run single-level or
// multilevel topology-preserving registration-based segmentation, and write
// the artifacts (mask, transformation, boundary geometry, energy log,
// summary).
//
// Exit codes: 0 success, 1 gradient-check failure, 2 configuration error,
// 3 I/O error, 4 line-search stall, 5 topology violation.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "topreg/topreg.hpp"

namespace fs = std::filesystem;
using namespace topreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGradCheck = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitStall = 4;
constexpr int kExitTopology = 5;

struct Options {
  std::string image_path, labels_path, out_dir = "out", ground_truth_path;
  double alpha_l = -1, alpha_s = -1, alpha_v = -1;
  int levels = 0;  // 0 = automatic (coarsest level near n=8)
  std::string bc = "dirichlet";
  double gamma = -1;
  std::string surface = "well";
  double tol_f = 1e-3, tol_y = 1e-2, tol_g = 1e-2;
  int max_iter = 50;
  double minres_tol = 0.1;
  int minres_max_iter = 100;
  int ls_max_backtracks = 20;
  std::string krylov = "minres";
  std::string fix_c;
  int synth_dim = 0, synth_n = 0;  // check-gradient without input files
};

struct LoadedInput {
  GridSpec grid;
  std::vector<double> image;  // rescaled to [0,255]
  std::vector<int> labels;
  std::string label_format;  // "pgm" | "mha"
};

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

std::vector<double> rescale_255(std::vector<double> v) {
  double mn = v[0], mx = v[0];
  for (double x : v) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  if (mx > mn) {
    double s = 255.0 / (mx - mn);
    for (double& x : v) x = (x - mn) * s;
  } else {
    for (double& x : v) x = 0.0;
  }
  return v;
}

std::vector<int> labels_from_pgm(const PgmImage& img, const GridSpec& g) {
  std::vector<int> labels(g.cell_count());
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c)
      labels[g.cell_index(c, r)] = static_cast<int>(img.data[static_cast<std::size_t>(r) * img.width + c]);
  return labels;
}

LoadedInput load_input(const Options& opt, BoundaryCondition bc) {
  LoadedInput in;
  if (has_suffix(opt.image_path, ".pgm")) {
    PgmImage img = read_pgm(opt.image_path);
    if (img.width != img.height) throw IoError("image must be square");
    in.grid = GridSpec(2, img.width, bc);
    std::vector<double> raw(in.grid.cell_count());
    for (int r = 0; r < img.height; ++r)
      for (int c = 0; c < img.width; ++c)
        raw[in.grid.cell_index(c, r)] = img.data[static_cast<std::size_t>(r) * img.width + c];
    in.image = rescale_255(std::move(raw));
    PgmImage lab = read_pgm(opt.labels_path);
    if (lab.width != img.width || lab.height != img.height)
      throw IoError("dimension mismatch between image and labels");
    in.labels = labels_from_pgm(lab, in.grid);
    in.label_format = "pgm";
  } else if (has_suffix(opt.image_path, ".mha") || has_suffix(opt.image_path, ".mhd")) {
    MhaVolume vol = read_mha(opt.image_path);
    if (vol.nx != vol.ny || vol.ny != vol.nz) throw IoError("volume must be cubic");
    in.grid = GridSpec(3, vol.nx, bc);
    in.image = rescale_255(std::move(vol.data));
    MhaVolume lab = read_mha(opt.labels_path);
    if (lab.nx != vol.nx || lab.ny != vol.ny || lab.nz != vol.nz)
      throw IoError("dimension mismatch between image and labels");
    in.labels.resize(lab.data.size());
    for (std::size_t i = 0; i < lab.data.size(); ++i) in.labels[i] = static_cast<int>(lab.data[i]);
    in.label_format = "mha";
  } else {
    throw IoError("unsupported image format (expect .pgm or .mha): " + opt.image_path);
  }
  return in;
}

std::vector<int> load_mask_like(const std::string& path, const GridSpec& g) {
  if (g.dim == 2) {
    PgmImage img = read_pgm(path);
    if (img.width != g.n || img.height != g.n) throw IoError("ground-truth dimension mismatch");
    return labels_from_pgm(img, g);
  }
  MhaVolume vol = read_mha(path);
  if (vol.nx != g.n || vol.ny != g.n || vol.nz != g.n)
    throw IoError("ground-truth dimension mismatch");
  std::vector<int> labels(vol.data.size());
  for (std::size_t i = 0; i < vol.data.size(); ++i) labels[i] = static_cast<int>(vol.data[i]);
  return labels;
}

void write_mask(const std::string& path, const GridSpec& g, const std::vector<int>& mask,
                const std::string& format) {
  if (format == "pgm") {
    std::vector<std::uint8_t> bytes(mask.size());
    for (int r = 0; r < g.n; ++r)
      for (int c = 0; c < g.n; ++c)
        bytes[static_cast<std::size_t>(r) * g.n + c] = static_cast<std::uint8_t>(mask[g.cell_index(c, r)]);
    write_pgm(path, g.n, g.n, bytes);
  } else {
    std::vector<std::uint8_t> bytes(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) bytes[i] = static_cast<std::uint8_t>(mask[i]);
    write_mha_uchar(path, g.n, bytes);
  }
}

int auto_levels(int n) {
  int L = 1;
  while (n % 2 == 0 && n / 2 >= 8 && L < 8) {
    n /= 2;
    L++;
  }
  return L;
}

RegularizerParams make_params(const Options& opt, int dim) {
  RegularizerParams p;
  if (dim == 2) {
    p.alpha_l = opt.alpha_l >= 0 ? opt.alpha_l : 100.0;
    p.alpha_s = opt.alpha_s >= 0 ? opt.alpha_s : 0.0;
    p.alpha_v = opt.alpha_v >= 0 ? opt.alpha_v : 100.0;
  } else {
    p.alpha_l = opt.alpha_l >= 0 ? opt.alpha_l : 10.0;
    p.alpha_s = opt.alpha_s >= 0 ? opt.alpha_s : 1.0;
    p.alpha_v = opt.alpha_v >= 0 ? opt.alpha_v : 1.0;
  }
  p.surface_mode = opt.surface == "convex" ? SurfaceMode::ConvexEnvelope : SurfaceMode::DoubleWell;
  return p;
}

SolverConfig make_solver_config(const Options& opt) {
  SolverConfig cfg;
  cfg.gamma = opt.gamma;
  cfg.minres_tol = opt.minres_tol;
  cfg.minres_max_iter = opt.minres_max_iter;
  cfg.ls_max_backtracks = opt.ls_max_backtracks;
  cfg.stop_tol_F = opt.tol_f;
  cfg.stop_tol_Y = opt.tol_y;
  cfg.stop_tol_G = opt.tol_g;
  cfg.max_outer_iter = opt.max_iter;
  cfg.krylov = opt.krylov == "cg" ? KrylovMethod::CG : KrylovMethod::MinRes;
  cfg.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };
  return cfg;
}

std::optional<IntensityConstants> parse_fixed_c(const std::string& s) {
  if (s.empty()) return std::nullopt;
  IntensityConstants C;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) C.push_back(std::stod(tok));
  return C;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::LineSearchStalled: return "line-search-stalled";
  }
  return "unknown";
}

int run_pipeline(const Options& opt, bool segment_mode) {
  auto t0 = std::chrono::steady_clock::now();
  BoundaryCondition bc =
      opt.bc == "natural" ? BoundaryCondition::Natural : BoundaryCondition::Dirichlet;

  LoadedInput in;
  std::optional<std::vector<int>> ground_truth;
  try {
    in = load_input(opt, bc);
    if (!opt.ground_truth_path.empty())
      ground_truth = load_mask_like(opt.ground_truth_path, in.grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  RegularizerParams params = make_params(opt, in.grid.dim);
  SolverConfig cfg = make_solver_config(opt);
  std::optional<IntensityConstants> fixed_C;
  int levels = opt.levels > 0 ? opt.levels : auto_levels(in.grid.n);
  MultilevelResult result;
  try {
    params.validate(in.grid.dim);
    fixed_C = parse_fixed_c(opt.fix_c);
    cfg.fix_constants = fixed_C.has_value();
    result = run_multilevel(in.grid, in.image, in.labels, params, cfg, levels,
                            fixed_C ? &*fixed_C : nullptr);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const StateEval& final_state = result.final.state;
  bool topology_ok = final_state.min_det > 0.0;

  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) {
    std::cerr << "error: cannot create output directory " << opt.out_dir << "\n";
    return kExitIo;
  }
  auto path = [&](const char* name) { return (fs::path(opt.out_dir) / name).string(); };

  try {
    write_field(path("transform.field"), in.grid, final_state.Y);
    write_energy_log(path("energy.csv"), result.records);

    std::optional<SegmentationResult> seg;
    PriorPartition prior = build_prior(in.grid, in.labels);
    if (segment_mode && topology_ok) {
      seg = make_segmentation_result(in.grid, final_state.Y, prior, final_state.min_det,
                                     final_state.max_det,
                                     ground_truth ? &*ground_truth : nullptr);
      write_mask(path(in.label_format == "pgm" ? "mask.pgm" : "mask.mha"), in.grid, seg->mask,
                 in.label_format);
      write_geometry(path("boundary.obj"), seg->boundaries, seg->boundary_regions);
    }

    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream sum(path("summary.txt"));
    sum.precision(17);
    sum << "mode: " << (segment_mode ? "segment" : "register") << "\n";
    sum << "dim: " << in.grid.dim << "\n";
    sum << "n: " << in.grid.n << "\n";
    sum << "levels: " << result.levels_solved << "\n";
    sum << "bc: " << opt.bc << "\n";
    sum << "alpha_l: " << params.alpha_l << "\n";
    sum << "alpha_s: " << params.alpha_s << "\n";
    sum << "alpha_v: " << params.alpha_v << "\n";
    sum << "status: " << status_name(result.final.status) << "\n";
    sum << "final_F: " << final_state.F << "\n";
    sum << "fit: " << final_state.breakdown.fit << "\n";
    sum << "length: " << final_state.breakdown.length << "\n";
    sum << "surface: " << final_state.breakdown.surface << "\n";
    sum << "volume: " << final_state.breakdown.volume << "\n";
    sum << "grad_norm: " << final_state.grad_norm << "\n";
    sum << "det_min: " << final_state.min_det << "\n";
    sum << "det_max: " << final_state.max_det << "\n";
    if (seg) {
      for (int l = 1; l <= prior.m; ++l) {
        sum << "components_prior_" << l << ": " << seg->report.prior_components[l - 1] << "\n";
        sum << "components_mask_" << l << ": " << seg->report.mask_components[l - 1] << "\n";
      }
      sum << "components_match: " << (seg->report.components_match ? "yes" : "no") << "\n";
      if (!seg->report.dice.empty())
        for (int l = 1; l <= prior.m; ++l) sum << "dice_" << l << ": " << seg->report.dice[l - 1] << "\n";
      if (in.grid.dim == 3)
        for (std::size_t b = 0; b < seg->boundaries.size(); ++b)
          sum << "euler_region_" << seg->boundary_regions[b] << ": "
              << euler_characteristic(seg->boundaries[b]) << "\n";
    }
    sum << "wall_time_sec: " << wall << "\n";
    if (!sum) throw IoError("cannot write summary");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }

  if (!topology_ok) {
    std::cerr << "error: final transformation is not orientation-preserving (min det "
              << final_state.min_det << "), no mask written\n";
    return kExitTopology;
  }
  if (result.final.status == SolveStatus::LineSearchStalled) return kExitStall;
  return kExitOk;
}

// Deterministic feasible test field for the gradient check.  Central
// differences are only meaningful if no probed cell point sits on the
// image-model clamp surfaces (the boundary-handling kinks), so reject fields
// that park a deformed cell center within 1e-4 of them and retry with a
// detuned amplitude.
std::vector<double> check_field(const GridSpec& g) {
  std::vector<double> X = nodal_coordinates(g);
  std::size_t NN = g.node_count();
  const double pi = 3.14159265358979323846;
  double amp = 0.04;
  for (int attempt = 0; attempt < 60; ++attempt, amp *= 0.83) {
    std::vector<double> Y = X;
    for (int p = 0; p < g.dim; ++p)
      for (std::size_t i = 0; i < NN; ++i) {
        double x = X[i], y = X[NN + i], z = g.dim == 3 ? X[2 * NN + i] : 0.5;
        double bump = std::sin(pi * x) * std::sin(pi * y) * (g.dim == 3 ? std::sin(pi * z) : 1.0);
        double mode = std::sin(pi * (1.13 * x + 0.137 + 0.31 * p)) *
                          std::cos(pi * (0.91 * y - 0.083 - 0.19 * p)) +
                      0.37 * std::cos(2 * pi * (0.87 * z + 0.211) + p);
        Y[p * NN + i] += amp * bump * mode;
      }
    std::vector<double> v = determinant_field(g, Y);
    double mn = v[0];
    for (double d : v) mn = std::min(mn, d);
    if (!(mn > 0.05)) continue;
    std::vector<double> pts = average_to_cells(g, Y);
    std::size_t NC = g.cell_count();
    bool clear = true;
    for (std::size_t c = 0; c < NC * g.dim && clear; ++c) {
      double t = pts[c];
      for (double edge : {0.0, 0.5 * g.h, 1.0 - 0.5 * g.h, 1.0})
        if (std::abs(t - edge) < 1e-4) clear = false;
    }
    if (clear) return Y;
  }
  return X;
}

int run_check_gradient(const Options& opt) {
  GridSpec grid;
  std::vector<double> image;
  std::vector<int> labels;
  try {
    if (!opt.image_path.empty()) {
      Options o = opt;
      LoadedInput in = load_input(o, BoundaryCondition::Natural);
      grid = in.grid;
      image = in.image;
      labels = in.labels;
    } else {
      int dim = opt.synth_dim > 0 ? opt.synth_dim : 2;
      int n = opt.synth_n > 0 ? opt.synth_n : (dim == 2 ? 4 : 2);
      grid = GridSpec(dim, n, BoundaryCondition::Natural);
      const double pi = 3.14159265358979323846;
      image.resize(grid.cell_count());
      labels.resize(grid.cell_count());
      std::size_t c = 0;
      int kmax = dim == 3 ? n : 1;
      for (int k = 0; k < kmax; ++k)
        for (int j = 0; j < n; ++j)
          for (int i = 0; i < n; ++i, ++c) {
            double x = (i + 0.5) * grid.h, y = (j + 0.5) * grid.h, z = (k + 0.5) * grid.h;
            image[c] = 128 + 80 * std::sin(pi * x) * std::sin(pi * y) *
                                 (dim == 3 ? std::sin(pi * z) : 1.0) +
                       30 * std::cos(pi * x);
            labels[c] = i < n / 2 ? 1 : 2;
          }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  if (grid.dim == 3 && grid.n > 16) {
    std::cerr << "error: check-gradient refuses 3D grids larger than n=16\n";
    return kExitConfig;
  }
  if (grid.n < 2) {
    std::cerr << "error: check-gradient needs n >= 2\n";
    return kExitConfig;
  }

  RegularizerParams params = make_params(opt, grid.dim);
  try {
    params.validate(grid.dim);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  SolverConfig cfg = make_solver_config(opt);

  Problem prob(grid, fit_image(grid, image), build_prior(grid, labels), params);
  std::vector<double> Y = check_field(grid);
  std::vector<double> pts = average_to_cells(grid, Y);
  std::vector<double> warped0;
  eval_with_gradient(prob.model, pts, warped0, nullptr);
  IntensityConstants C = initial_constants(warped0, prob.prior);
  for (int l = 0; l < prob.prior.m; ++l) C[l] += 7.0 * (l + 1);  // move off the C optimum

  const double step = 1e-5;
  std::size_t nY = grid.dof_count();
  auto fd_max_rel = [&](const std::function<double(const std::vector<double>&)>& f,
                        const std::vector<double>& at, const std::vector<double>& analytic) {
    std::vector<double> z = at;
    double diff = 0, scale = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      double orig = z[i];
      z[i] = orig + step;
      double fp = f(z);
      z[i] = orig - step;
      double fm = f(z);
      z[i] = orig;
      double fd = (fp - fm) / (2 * step);
      diff = std::max(diff, std::abs(fd - analytic[i]));
      scale = std::max(scale, std::abs(fd));
    }
    return diff / std::max(scale, 1.0);
  };

  double worst = 0;
  auto report = [&](const char* name, double err) {
    std::printf("%-10s max-rel-error %.3e\n", name, err);
    worst = std::max(worst, err);
  };

  // fitting term (joint in Y and C)
  {
    auto f = [&](const std::vector<double>& z) {
      std::vector<double> Yz(z.begin(), z.begin() + nY);
      IntensityConstants Cz(z.begin() + nY, z.end());
      std::vector<double> p = average_to_cells(grid, Yz);
      std::vector<double> w;
      eval_with_gradient(prob.model, p, w, nullptr);
      return fit_energy(grid, w, prob.prior, Cz);
    };
    std::vector<double> z = Y;
    z.insert(z.end(), C.begin(), C.end());
    std::vector<double> warped, wgrad;
    eval_with_gradient(prob.model, pts, warped, &wgrad);
    std::vector<double> gY(nY, 0.0), gC(prob.prior.m, 0.0);
    fit_gradient_add(grid, warped, wgrad, prob.prior, C, gY, gC);
    std::vector<double> analytic = gY;
    analytic.insert(analytic.end(), gC.begin(), gC.end());
    report("fit", fd_max_rel(f, z, analytic));
  }
  // individual regularizer terms
  {
    auto f_len = [&](const std::vector<double>& Z) {
      return length_energy(grid, Z, prob.X, params.alpha_l);
    };
    std::vector<double> g_len(nY, 0.0);
    length_gradient_add(grid, Y, prob.X, params.alpha_l, g_len);
    report("length", fd_max_rel(f_len, Y, g_len));

    RegularizerParams vol_only = params;
    vol_only.alpha_l = 0;
    vol_only.alpha_s = 0;
    auto f_vol = [&](const std::vector<double>& Z) {
      return hyperelastic_eval(grid, Z, prob.X, vol_only).total();
    };
    report("volume", fd_max_rel(f_vol, Y, reg_gradient(grid, Y, prob.X, vol_only)));

    if (grid.dim == 3 && params.alpha_s > 0) {
      RegularizerParams surf = params;
      surf.alpha_l = 0;
      // keep alpha_v > 0 (required) but tiny so the surface term dominates;
      // compare against the matching analytic gradient
      surf.alpha_v = 1e-12;
      auto f_surf = [&](const std::vector<double>& Z) {
        return hyperelastic_eval(grid, Z, prob.X, surf).total();
      };
      report("surface", fd_max_rel(f_surf, Y, reg_gradient(grid, Y, prob.X, surf)));
    }
  }
  // total joint gradient
  {
    SolverConfig c2 = cfg;
    auto f = [&](const std::vector<double>& z) {
      std::vector<double> Yz(z.begin(), z.begin() + nY);
      IntensityConstants Cz(z.begin() + nY, z.end());
      return evaluate_energy(prob, std::move(Yz), std::move(Cz)).F;
    };
    std::vector<double> z = Y;
    z.insert(z.end(), C.begin(), C.end());
    auto [F, d] = total_energy_and_gradient(prob, c2, Y, C);
    (void)F;
    report("total", fd_max_rel(f, z, d));
  }

  std::printf("%-10s %s\n", "verdict", worst <= 1e-5 ? "ok" : "FAILED");
  return worst <= 1e-5 ? kExitOk : kExitGradCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"topology-preserving registration-based segmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_config_extras(false);
  app.set_config("--config", "", "configuration file (ini/toml style key=value)");

  Options opt;
  app.add_option("--image", opt.image_path, "template image (.pgm 2D, .mha 3D)");
  app.add_option("--labels", opt.labels_path, "prior label map (region ids 1..m)");
  app.add_option("--out", opt.out_dir, "output directory");
  app.add_option("--ground-truth", opt.ground_truth_path, "ground-truth mask for Dice");
  app.add_option("--alpha-l", opt.alpha_l, "length weight (default 100 in 2D, 10 in 3D)");
  app.add_option("--alpha-s", opt.alpha_s, "surface weight (must be 0 in 2D; default 1 in 3D)");
  app.add_option("--alpha-v", opt.alpha_v, "volume weight > 0 (default 100 in 2D, 1 in 3D)");
  app.add_option("--levels", opt.levels, "multilevel depth (0 = automatic)");
  app.add_option("--bc", opt.bc, "boundary condition")->check(CLI::IsMember({"dirichlet", "natural"}));
  app.add_option("--gamma", opt.gamma, "Hessian shift for natural bc (default h^dim)");
  app.add_option("--surface", opt.surface, "surface penalty")->check(CLI::IsMember({"well", "convex"}));
  app.add_option("--tol-f", opt.tol_f, "stop tolerance on the energy change");
  app.add_option("--tol-y", opt.tol_y, "stop tolerance on the update norm");
  app.add_option("--tol-g", opt.tol_g, "stop tolerance on the gradient norm");
  app.add_option("--max-iter", opt.max_iter, "outer iteration cap per level");
  app.add_option("--minres-tol", opt.minres_tol, "Krylov relative-residual target");
  app.add_option("--minres-max-iter", opt.minres_max_iter, "Krylov iteration cap");
  app.add_option("--max-backtracks", opt.ls_max_backtracks, "line-search backtrack cap");
  app.add_option("--krylov", opt.krylov, "inner solver")->check(CLI::IsMember({"minres", "cg"}));
  app.add_option("--fix-c", opt.fix_c, "freeze intensity constants (debug), e.g. 0,255");
  app.add_option("--dim", opt.synth_dim, "check-gradient: synthetic problem dimension (2 or 3)");
  app.add_option("--n", opt.synth_n, "check-gradient: synthetic problem cells per axis");

  CLI::App* cmd_segment = app.add_subcommand("segment", "deform the prior onto the image and rasterize the mask");
  CLI::App* cmd_register = app.add_subcommand("register", "run the registration only (no mask/boundary output)");
  CLI::App* cmd_check = app.add_subcommand("check-gradient", "verify analytic gradients against finite differences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  // flag-level validation shared by all modes
  if (opt.alpha_v == 0) {
    std::cerr << "error: alpha-v must be positive (the volume barrier enforces topology)\n";
    return kExitConfig;
  }
  if ((opt.alpha_l >= 0 && !std::isfinite(opt.alpha_l)) || opt.alpha_s > 1e300 ||
      opt.alpha_v > 1e300) {
    std::cerr << "error: bad weight\n";
    return kExitConfig;
  }

  if (cmd_check->parsed()) return run_check_gradient(opt);

  if (opt.image_path.empty() || opt.labels_path.empty()) {
    std::cerr << "error: --image and --labels are required\n";
    return kExitConfig;
  }
  return run_pipeline(opt, cmd_segment->parsed());
  (void)cmd_register;
}
