#ifndef PPCURVE_FIT_HPP
#define PPCURVE_FIT_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "ppcurve/metric.hpp"

namespace ppcurve::fit {

enum class Mode { Local, Nonlocal };

/// Smoothing kernel (1 - |t|^p)_+^q on [0,1].
struct Kernel {
  double p = 2.0;
  double q = 2.0;
  double eval(double t) const;
};

struct PPCConfig {
  double beta = 0.1;
  std::size_t knots = 20;
  double epsilon = 1e-6;          // stop when objective drop < epsilon
  std::size_t max_outer_iters = 100;
  Mode mode = Mode::Local;
  double h = 0.1;                 // scalar bandwidth, replicated per knot
  std::vector<double> bandwidths; // per-knot override; empty = use scalar h
  bool adaptive_bandwidth = false;
  Kernel kernel;
  std::map<std::size_t, MetricElement> pinned;  // index -> frozen element
  std::uint64_t seed = 0;
  double movement_tol = 1e-7;
  double neighbor_floor = 1e-8;   // floor on adjacent-knot distances in the MM step
  double time_cap_seconds = 0.0;  // 0 disables the wall-clock guard

  void validate() const;
};

struct VoronoiPartition {
  std::vector<std::vector<std::size_t>> cells;  // cells[k] = batch indices nearest to knot k
};

struct ObjectiveBreakdown {
  double total = 0.0;
  double data_fit = 0.0;
  double length = 0.0;
  bool degenerate_fallback = false;  // nonlocal objective fell back to local (zero length)
};

struct FitTrace {
  struct Entry {
    double objective;
    double data_fit;
    double length;
    double knot_movement;
  };
  std::vector<Entry> entries;
  bool converged = false;
  bool descent_violation = false;
  bool time_capped = false;
};

using Batches = std::vector<MetricElement>;

KnotCurve init_kmeanspp(const MetricBackend& backend, const Batches& data, std::size_t K,
                        std::uint64_t seed,
                        const std::map<std::size_t, MetricElement>& pinned = {});

/// Reorders the knots toward a min-length path: exact Held-Karp DP when the
/// free node count is <= 12, else nearest-neighbor + 2-opt. Never increases
/// discrete length. With fixed_ends the first and last knots stay in place.
KnotCurve tsp_order(const MetricBackend& backend, const KnotCurve& curve, bool fixed_ends);

ObjectiveBreakdown objective_ppc_k(const MetricBackend& backend, const Batches& data,
                                   const KnotCurve& curve, double beta);

ObjectiveBreakdown objective_ppc_kw(const MetricBackend& backend, const Batches& data,
                                    const KnotCurve& curve, const PPCConfig& config);

VoronoiPartition voronoi_cells(const MetricBackend& backend, const Batches& data,
                               const KnotCurve& curve);

KnotCurve update_knots(const MetricBackend& backend, const Batches& data, const KnotCurve& curve,
                       const VoronoiPartition& partition, const PPCConfig& config);

struct FitResult {
  KnotCurve curve;
  FitTrace trace;
};

/// Coupled Lloyd loop: min-length reorder, Voronoi assignment, MM knot update,
/// until the objective drop falls below epsilon.
FitResult fit(const MetricBackend& backend, const Batches& data, const PPCConfig& config);

// exposed for tests and the seriation baselines
std::vector<std::size_t> order_path(const std::vector<std::vector<double>>& dmat,
                                    std::vector<std::size_t> nodes,
                                    std::optional<std::size_t> fixed_start,
                                    std::optional<std::size_t> fixed_end);
double path_length(const std::vector<std::vector<double>>& dmat,
                   const std::vector<std::size_t>& order);

}  // namespace ppcurve::fit

#endif
