#ifndef PPCURVE_SERIATION_HPP
#define PPCURVE_SERIATION_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ppcurve/fit.hpp"
#include "ppcurve/metric.hpp"

namespace ppcurve::seriation {

/// Symmetric pairwise-distance matrix with zero diagonal.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major, n*n
  std::string metric_tag = "w2";

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  void validate() const;
  std::vector<std::vector<double>> rows() const;
};

struct SeriationResult {
  std::vector<double> pseudotimes;        // one per batch, in [0,1]
  std::vector<std::size_t> permutation;   // permutation[r] = batch at rank r
  std::string method;
  bool flagged = false;                   // degenerate input (zero-length curve,
                                          // disconnected similarity graph)
};

struct PseudotimeResult {
  std::vector<double> values;
  bool degenerate = false;  // zero-length curve; all values 0
};

/// Maps each batch to the normalized arc-length position of its nearest knot;
/// with refine, projects onto the two adjacent geodesic segments as well
/// (closed form for Euclidean, golden-section in t for measures).
PseudotimeResult projection_pseudotime(const MetricBackend& backend, const fit::Batches& data,
                                       const KnotCurve& curve, bool refine = true);

/// Fraction of discordant pairs after sorting by true time; tied pseudotime
/// pairs count half.
double kendall_tau_error(const std::vector<double>& pseudotimes,
                         const std::vector<double>& true_times);

SeriationResult tsp_seriation(const DistanceMatrix& W,
                              std::optional<std::pair<std::size_t, std::size_t>> fixed_ends = {});

SeriationResult spectral_seriation(const DistanceMatrix& W, double sigma);

enum class PairwiseSolver { Exact, Sinkhorn };

DistanceMatrix pairwise_w2_matrix(const fit::Batches& data, PairwiseSolver solver,
                                  const ot::SinkhornParams& params = {});

std::vector<std::size_t> ranks_to_permutation(const std::vector<double>& values);

}  // namespace ppcurve::seriation

#endif
