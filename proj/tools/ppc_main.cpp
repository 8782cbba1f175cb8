// ppc: penalized principal curves for batched data, with seriation baselines.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "ppcurve/datagen.hpp"
#include "ppcurve/fit.hpp"
#include "ppcurve/io.hpp"
#include "ppcurve/metric.hpp"
#include "ppcurve/ot.hpp"
#include "ppcurve/seriation.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ppcurve;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

struct SolverFlags {
  double beta = 0.17;
  std::size_t knots = 20;
  double h = 0.037;
  std::string kernel = "epanechnikov";
  std::string mode = "nonlocal";
  bool pin_ends = false;
  std::string ot = "sinkhorn";
  double reg = 1e-2;
  double epsilon = 1e-6;
  std::size_t max_iters = 100;
  double time_cap = 0.0;

  void add(CLI::App* app) {
    // --h would clash with the default -h help alias
    app->set_help_flag("--help", "Print this help message and exit");
    app->add_option("--beta", beta, "Length penalty");
    app->add_option("--knots", knots, "Knot count K");
    app->add_option("--h", h, "Kernel bandwidth (fraction of curve length)");
    app->add_option("--kernel", kernel, "Smoothing kernel")->check(CLI::IsMember({"epanechnikov"}));
    app->add_option("--mode", mode, "Data-fit coupling")->check(CLI::IsMember({"local", "nonlocal"}));
    app->add_flag("--pin-ends", pin_ends, "Pin first/last knot to the start/end batch");
    app->add_option("--ot", ot, "Wasserstein solver")->check(CLI::IsMember({"exact", "sinkhorn"}));
    app->add_option("--reg", reg, "Sinkhorn regularization");
    app->add_option("--epsilon", epsilon, "Objective-drop stopping threshold");
    app->add_option("--max-iters", max_iters, "Outer iteration cap");
    app->add_option("--time-cap", time_cap, "Per-fit wall-clock cap in seconds (0 = off)");
  }
};

std::unique_ptr<MetricBackend> make_backend(const datagen::Dataset& ds, const SolverFlags& f) {
  if (!ds.batches.empty() && is_euclidean(ds.batches.front()))
    return std::make_unique<EuclideanBackend>();
  WassersteinParams p;
  p.use_sinkhorn = (f.ot == "sinkhorn");
  p.sinkhorn.reg = f.reg;
  return std::make_unique<WassersteinBackend>(p);
}

fit::PPCConfig make_config(const datagen::Dataset& ds, const SolverFlags& f, std::uint64_t seed) {
  fit::PPCConfig cfg;
  cfg.beta = f.beta;
  cfg.knots = f.knots;
  cfg.h = f.h;
  cfg.mode = (f.mode == "local") ? fit::Mode::Local : fit::Mode::Nonlocal;
  cfg.epsilon = f.epsilon;
  cfg.max_outer_iters = f.max_iters;
  cfg.seed = seed;
  cfg.time_cap_seconds = f.time_cap;
  if (f.pin_ends) {
    const auto& tt = ds.eval_true_times();
    if (tt.size() != ds.size())
      throw std::runtime_error("--pin-ends needs truth.csv to identify the start and end batches");
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < tt.size(); ++i) {
      if (tt[i] < tt[lo]) lo = i;
      if (tt[i] > tt[hi]) hi = i;
    }
    cfg.pinned.emplace(0, ds.batches[lo]);
    cfg.pinned.emplace(cfg.knots - 1, ds.batches[hi]);
  }
  return cfg;
}

double error_up_to_reversal(const std::vector<double>& tau, const std::vector<double>& truth) {
  std::vector<double> rev(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) rev[i] = 1.0 - tau[i];
  return std::min(seriation::kendall_tau_error(tau, truth),
                  seriation::kendall_tau_error(rev, truth));
}

// Pairwise W2 matrix with a disk cache next to the dataset; the cache key is
// the solver tag so exact and sinkhorn matrices do not collide.
seriation::DistanceMatrix pairwise_matrix_cached(const fs::path& dataset_dir,
                                                 const datagen::Dataset& ds,
                                                 const SolverFlags& f) {
  const bool sinkhorn = (f.ot == "sinkhorn");
  std::ostringstream tag;
  tag << (sinkhorn ? "w2_sinkhorn" : "w2_exact");
  if (sinkhorn) tag << "_reg" << f.reg;
  const fs::path cache = dataset_dir / ("dist_" + tag.str() + ".csv");
  if (fs::exists(cache)) {
    auto m = io::read_matrix(cache);
    if (m.n == ds.size()) return m;
  }
  ot::SinkhornParams sp;
  sp.reg = f.reg;
  auto m = seriation::pairwise_w2_matrix(
      ds.batches, sinkhorn ? seriation::PairwiseSolver::Sinkhorn : seriation::PairwiseSolver::Exact,
      sp);
  m.metric_tag = tag.str();
  io::write_matrix(cache, m);
  return m;
}

void write_svg(const fs::path& file, const datagen::Dataset& ds, const KnotCurve& curve) {
  // flat scatter of all 2-d atoms plus the knot polyline; skip other dims
  std::vector<std::pair<double, double>> atoms, knots;
  for (const auto& b : ds.batches) {
    if (is_euclidean(b)) {
      const auto& x = std::get<EuclideanPoint>(b).x;
      if (x.size() == 2) atoms.emplace_back(x[0], x[1]);
    } else {
      for (const auto& p : std::get<ot::DiscreteMeasure>(b).support)
        if (p.size() == 2) atoms.emplace_back(p[0], p[1]);
    }
  }
  for (const auto& k : curve.knots) {
    if (is_euclidean(k)) {
      const auto& x = std::get<EuclideanPoint>(k).x;
      if (x.size() == 2) knots.emplace_back(x[0], x[1]);
    } else {
      // plot a measure knot at its Euclidean mean
      const auto& m = std::get<ot::DiscreteMeasure>(k);
      if (m.dim() == 2) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
          mx += m.weights[i] * m.support[i][0];
          my += m.weights[i] * m.support[i][1];
        }
        knots.emplace_back(mx, my);
      }
    }
  }
  if (atoms.empty()) return;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& [x, y] : atoms) {
    xmin = std::min(xmin, x), xmax = std::max(xmax, x);
    ymin = std::min(ymin, y), ymax = std::max(ymax, y);
  }
  const double pad = 0.05 * std::max(xmax - xmin, ymax - ymin) + 1e-9;
  xmin -= pad, xmax += pad, ymin -= pad, ymax += pad;
  const double W = 640, H = 640;
  auto sx = [&](double x) { return (x - xmin) / (xmax - xmin) * W; };
  auto sy = [&](double y) { return H - (y - ymin) / (ymax - ymin) * H; };
  std::ofstream out(file);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  for (const auto& [x, y] : atoms)
    out << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='1.5' fill='#777' fill-opacity='0.4'/>\n";
  out << "<polyline fill='none' stroke='#c22' stroke-width='2' points='";
  for (const auto& [x, y] : knots) out << sx(x) << "," << sy(y) << " ";
  out << "'/>\n";
  for (const auto& [x, y] : knots)
    out << "<circle cx='" << sx(x) << "' cy='" << sy(y) << "' r='3' fill='#c22'/>\n";
  out << "</svg>\n";
}

datagen::Dataset generate(const std::string& model, std::size_t n, std::size_t atoms, double sigma,
                          std::uint64_t reads, std::uint64_t seed) {
  datagen::Dataset ds;
  if (model == "dataset1")
    ds = datagen::gen_dataset1(n, atoms, sigma, seed);
  else if (model == "dataset2")
    ds = datagen::gen_dataset2(n, atoms, sigma, seed);
  else if (model == "euclidean_line")
    ds = datagen::gen_euclidean_line(n, sigma, seed);
  else
    throw CLI::ValidationError("--model", "unknown model " + model);
  if (reads > 0) ds = datagen::apply_reads(ds, reads, seed + 1, /*embed_if_needed=*/true);
  return ds;
}

struct SeriateOutcome {
  seriation::SeriationResult result;
  double objective_final = 0.0;
  bool solver_trouble = false;
};

SeriateOutcome run_method(const fs::path& dataset_dir, const datagen::Dataset& ds,
                          const std::string& method, const SolverFlags& f, double spectral_sigma,
                          std::uint64_t seed, const fs::path& out_dir) {
  SeriateOutcome o;
  if (method == "ppc") {
    auto backend = make_backend(ds, f);
    auto cfg = make_config(ds, f, seed);
    auto r = fit::fit(*backend, ds.batches, cfg);
    o.objective_final = r.trace.entries.empty() ? 0.0 : r.trace.entries.back().objective;
    o.solver_trouble = r.trace.descent_violation || !(r.trace.converged || r.trace.time_capped);
    auto pt = seriation::projection_pseudotime(*backend, ds.batches, r.curve);
    o.result.pseudotimes = pt.values;
    o.result.permutation = seriation::ranks_to_permutation(pt.values);
    o.result.method = "ppc";
    o.result.flagged = pt.degenerate;
    io::write_knots(out_dir / "knots.csv", r.curve);
    io::write_trace(out_dir / "trace.csv", r.trace);
  } else {
    seriation::DistanceMatrix W;
    if (!ds.batches.empty() && is_euclidean(ds.batches.front())) {
      EuclideanBackend b;
      W.n = ds.size();
      W.values.assign(W.n * W.n, 0.0);
      W.metric_tag = "euclid";
      for (std::size_t i = 0; i < W.n; ++i)
        for (std::size_t j = i + 1; j < W.n; ++j)
          W.at(i, j) = W.at(j, i) = b.dist(ds.batches[i], ds.batches[j]);
    } else {
      W = pairwise_matrix_cached(dataset_dir, ds, f);
    }
    o.result = (method == "tsp") ? seriation::tsp_seriation(W)
                                 : seriation::spectral_seriation(W, spectral_sigma);
  }
  return o;
}

int cmd_gen(const std::string& model, std::size_t n, std::size_t atoms, double sigma,
            std::uint64_t reads, std::uint64_t seed, const fs::path& out) {
  if (model != "euclidean_line" && n > atoms)
    throw CLI::ValidationError("--n", "more batches than total atoms");
  auto ds = generate(model, n, atoms, sigma, reads, seed);
  fs::create_directories(out);
  io::write_dataset(out, ds);
  std::cout << "wrote " << ds.size() << " batches to " << out.string() << "\n";
  return kExitOk;
}

int cmd_fit(const fs::path& dataset_dir, const SolverFlags& f, std::uint64_t seed,
            const fs::path& out, bool svg) {
  auto ds = io::read_dataset(dataset_dir);
  auto backend = make_backend(ds, f);
  auto cfg = make_config(ds, f, seed);
  auto r = fit::fit(*backend, ds.batches, cfg);
  fs::create_directories(out);
  io::write_knots(out / "knots.csv", r.curve);
  io::write_trace(out / "trace.csv", r.trace);
  auto pt = seriation::projection_pseudotime(*backend, ds.batches, r.curve);
  io::write_pseudotimes(out / "projections.csv", pt.values,
                        seriation::ranks_to_permutation(pt.values));
  if (svg) write_svg(out / "fit.svg", ds, r.curve);
  const auto& last = r.trace.entries.back();
  std::cout << "iters=" << r.trace.entries.size() << " objective=" << last.objective
            << " data_fit=" << last.data_fit << " length=" << last.length
            << (r.trace.time_capped ? " (time-capped)" : "") << "\n";
  if (r.trace.descent_violation) {
    std::cerr << "warning: objective failed to descend; reverted to last good curve\n";
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_seriate(const fs::path& dataset_dir, const std::string& method, const SolverFlags& f,
                double spectral_sigma, const std::vector<std::uint64_t>& seeds,
                const fs::path& out) {
  auto ds = io::read_dataset(dataset_dir);
  fs::create_directories(out);
  json metrics;
  metrics["method"] = method;
  metrics["dataset"] = dataset_dir.string();
  metrics["provenance"] = {
      {"atoms_hash", io::file_hash(dataset_dir / "atoms.csv")},
      {"truth_hash", fs::exists(dataset_dir / "truth.csv")
                         ? io::file_hash(dataset_dir / "truth.csv")
                         : 0},
      {"model", ds.prov.model},
      {"seed", ds.prov.seed}};
  metrics["params"] = {{"beta", f.beta},       {"knots", f.knots}, {"h", f.h},
                       {"mode", f.mode},       {"ot", f.ot},       {"reg", f.reg},
                       {"pin_ends", f.pin_ends}, {"spectral_sigma", spectral_sigma}};
  json records = json::array();
  bool any_trouble = false;
  for (std::uint64_t seed : seeds) {
    const auto t0 = std::chrono::steady_clock::now();
    auto o = run_method(dataset_dir, ds, method, f, spectral_sigma, seed, out);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    any_trouble = any_trouble || o.solver_trouble;
    json rec;
    rec["seed"] = seed;
    rec["runtime_ms"] = ms;
    rec["objective_final"] = o.objective_final;
    rec["flagged"] = o.result.flagged;
    if (!ds.eval_true_times().empty()) {
      rec["kendall_error_raw"] =
          seriation::kendall_tau_error(o.result.pseudotimes, ds.eval_true_times());
      rec["kendall_error_up_to_reversal"] =
          error_up_to_reversal(o.result.pseudotimes, ds.eval_true_times());
    }
    records.push_back(rec);
    io::write_pseudotimes(out / ("pseudotimes_seed" + std::to_string(seed) + ".csv"),
                          o.result.pseudotimes, o.result.permutation);
  }
  metrics["records"] = records;
  std::ofstream(out / "metrics.json") << metrics.dump(2) << "\n";
  std::cout << metrics.dump(2) << "\n";
  return any_trouble ? kExitSolver : kExitOk;
}

int cmd_sweep(const fs::path& dataset_dir, const std::string& method, SolverFlags f,
              double spectral_sigma, std::vector<double> h_grid, std::vector<double> beta_grid,
              std::vector<double> sigma_grid, const std::vector<std::uint64_t>& seeds,
              const fs::path& out) {
  auto ds = io::read_dataset(dataset_dir);
  fs::create_directories(out);
  std::ofstream results(out / "results.csv");
  results << "method,h,beta,spectral_sigma,seed,kendall_error_raw,kendall_error_up_to_reversal,"
             "runtime_ms,objective_final,status\n";
  std::ofstream cells(out / "cells.csv");
  cells << "method,h,beta,spectral_sigma,mean_error_up_to_reversal\n";

  struct Cell {
    double h, beta, sigma;
  };
  std::vector<Cell> grid;
  if (method == "spectral") {
    for (double s : sigma_grid) grid.push_back({0.0, 0.0, s});
  } else if (method == "tsp") {
    grid.push_back({0.0, 0.0, 0.0});
  } else {
    for (double h : h_grid)
      for (double b : beta_grid) grid.push_back({h, b, 0.0});
  }
  for (const auto& cell : grid) {
    double acc = 0.0;
    std::size_t ok = 0;
    for (std::uint64_t seed : seeds) {
      f.h = cell.h > 0 ? cell.h : f.h;
      f.beta = cell.beta > 0 ? cell.beta : f.beta;
      std::string status = "ok";
      double raw = -1.0, rev = -1.0, obj = 0.0, ms = 0.0;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        auto o = run_method(dataset_dir, ds, method, f, cell.sigma > 0 ? cell.sigma : spectral_sigma,
                            seed, out);
        ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                 .count();
        obj = o.objective_final;
        raw = seriation::kendall_tau_error(o.result.pseudotimes, ds.eval_true_times());
        rev = error_up_to_reversal(o.result.pseudotimes, ds.eval_true_times());
        acc += rev;
        ++ok;
      } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
      }
      results << method << ',' << io::format_double(cell.h) << ',' << io::format_double(cell.beta)
              << ',' << io::format_double(cell.sigma) << ',' << seed << ','
              << io::format_double(raw) << ',' << io::format_double(rev) << ','
              << io::format_double(ms) << ',' << io::format_double(obj) << ',' << status << "\n";
    }
    cells << method << ',' << io::format_double(cell.h) << ',' << io::format_double(cell.beta)
          << ',' << io::format_double(cell.sigma) << ','
          << io::format_double(ok ? acc / ok : -1.0) << "\n";
  }
  std::cout << "sweep complete: " << grid.size() << " cells x " << seeds.size() << " seeds\n";
  return kExitOk;
}

int cmd_bench(std::size_t atoms, std::size_t reps, double reg) {
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto rand_measure = [&] {
    std::vector<Point> pts(atoms, Point(2));
    for (auto& p : pts)
      for (double& x : p) x = uni(rng);
    return ot::DiscreteMeasure::uniform(std::move(pts));
  };
  double exact_ms = 0.0, sink_ms = 0.0, gap = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    auto a = rand_measure(), b = rand_measure();
    auto t0 = std::chrono::steady_clock::now();
    const double e = ot::w2_exact(a, b).value;
    auto t1 = std::chrono::steady_clock::now();
    ot::SinkhornParams sp;
    sp.reg = reg;
    const double s = ot::w2_sinkhorn(a, b, sp).value;
    auto t2 = std::chrono::steady_clock::now();
    exact_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    sink_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
    gap += std::abs(s - e);
  }
  std::printf("atoms=%zu reps=%zu exact=%.2fms sinkhorn(reg=%g)=%.2fms mean|gap|=%.3g\n", atoms,
              reps, exact_ms / reps, reg, sink_ms / reps, gap / reps);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalized principal curves and seriation for batched data"};
  app.require_subcommand(1);

  std::string model = "dataset1", method = "ppc";
  std::size_t n = 250, atoms = 10000, bench_atoms = 40, bench_reps = 20;
  double sigma = 0.1, spectral_sigma = 0.5;
  std::uint64_t reads = 0, seed = 1;
  std::vector<std::uint64_t> seeds{1};
  fs::path dataset_dir, out = "out";
  bool svg = false;
  SolverFlags flags;
  std::vector<double> h_grid, beta_grid, sigma_grid;

  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--model", model, "dataset1|dataset2|euclidean_line");
  gen->add_option("--n", n, "Number of batches");
  gen->add_option("--atoms", atoms, "Total atom budget");
  gen->add_option("--sigma", sigma, "Noise level");
  gen->add_option("--reads", reads, "Multinomial reads per atom (0 = off)");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", out, "Output directory")->required();

  auto* fitc = app.add_subcommand("fit", "Fit a penalized principal curve");
  fitc->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  fitc->add_option("--seed", seed, "RNG seed");
  fitc->add_option("--out", out, "Output directory");
  fitc->add_flag("--svg", svg, "Emit a static SVG overlay");
  flags.add(fitc);

  auto* ser = app.add_subcommand("seriate", "Order batches and score against truth");
  ser->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  ser->add_option("--method", method, "ppc|tsp|spectral")
      ->check(CLI::IsMember({"ppc", "tsp", "spectral"}));
  ser->add_option("--spectral-sigma", spectral_sigma, "Spectral similarity bandwidth");
  ser->add_option("--seeds", seeds, "Seed list");
  ser->add_option("--out", out, "Output directory");
  flags.add(ser);

  auto* sweep = app.add_subcommand("sweep", "Grid sweep over tuning parameters");
  sweep->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  sweep->add_option("--method", method, "ppc|tsp|spectral")
      ->check(CLI::IsMember({"ppc", "tsp", "spectral"}));
  sweep->add_option("--h-grid", h_grid, "Bandwidth grid");
  sweep->add_option("--beta-grid", beta_grid, "Penalty grid");
  sweep->add_option("--sigma-grid", sigma_grid, "Spectral bandwidth grid");
  sweep->add_option("--spectral-sigma", spectral_sigma, "Spectral bandwidth fallback");
  sweep->add_option("--seeds", seeds, "Seed list");
  sweep->add_option("--out", out, "Output directory");
  flags.add(sweep);

  auto* bench = app.add_subcommand("bench", "Time the transport solvers");
  bench->add_option("--atoms", bench_atoms, "Atoms per measure");
  bench->add_option("--reps", bench_reps, "Repetitions");
  bench->add_option("--reg", flags.reg, "Sinkhorn regularization");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(model, n, atoms, sigma, reads, seed, out);
    if (fitc->parsed()) return cmd_fit(dataset_dir, flags, seed, out, svg);
    if (ser->parsed()) return cmd_seriate(dataset_dir, method, flags, spectral_sigma, seeds, out);
    if (sweep->parsed())
      return cmd_sweep(dataset_dir, method, flags, spectral_sigma, h_grid, beta_grid, sigma_grid,
                       seeds, out);
    if (bench->parsed()) return cmd_bench(bench_atoms, bench_reps, flags.reg);
  } catch (const CLI::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::runtime_error& e) {
    // I/O-flavored failures (missing/corrupt files) land here from io.cpp
    std::cerr << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitSolver;
  }
  return kExitUsage;
}
