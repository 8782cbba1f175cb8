#ifndef PPCURVE_OT_HPP
#define PPCURVE_OT_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "ppcurve/common.hpp"

namespace ppcurve::ot {

/// Weighted point cloud in R^d. Weights sum to 1 (checked to 1e-9 by validate()).
struct DiscreteMeasure {
  std::vector<Point> support;
  std::vector<double> weights;

  static DiscreteMeasure dirac(Point x) {
    return DiscreteMeasure{{std::move(x)}, {1.0}};
  }
  static DiscreteMeasure uniform(std::vector<Point> pts);

  std::size_t size() const { return support.size(); }
  std::size_t dim() const { return support.empty() ? 0 : support.front().size(); }
  void validate() const;
  std::uint64_t content_hash() const;
};

struct TransportPlan {
  // coupling[i][j] moves mass from mu.support[i] to nu.support[j]
  std::vector<std::vector<double>> coupling;
  double cost = 0.0;  // total ground cost <pi, C>
};

enum class GroundCost { SquaredEuclidean, Euclidean };

struct ExactResult {
  double value = 0.0;  // W_2 or W_1 value (root already applied for p=2)
  TransportPlan plan;
};

inline constexpr std::size_t kExactSizeCap = 512;

/// Exact transportation LP; cost matrix supplied by caller.
TransportPlan solve_transport(const std::vector<std::vector<double>>& cost,
                              const std::vector<double>& a, const std::vector<double>& b);

ExactResult w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
double w1_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu);

struct SinkhornParams {
  double reg = 1e-2;
  std::size_t max_iter = 10000;
  double tol = 1e-9;        // L1 marginal violation
  bool eps_scaling = true;  // warm-started decreasing-reg schedule
};

struct SinkhornResult {
  double value = 0.0;  // W_2 value from the entropic plan's transport cost
  bool converged = true;
  std::size_t iterations = 0;
};

SinkhornResult w2_sinkhorn(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                           const SinkhornParams& params = {});

DiscreteMeasure displacement_interpolate(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                         double t);

struct BarycenterConfig {
  std::size_t max_iter = 50;
  double tol = 1e-7;  // max support-point movement
};

struct BarycenterResult {
  DiscreteMeasure measure;
  std::vector<double> objective_trace;  // sum_k lambda_k W2^2(mu_k, nu) per iteration
  bool converged = true;
};

BarycenterResult barycenter(const std::vector<const DiscreteMeasure*>& measures,
                            const std::vector<double>& lambdas,
                            const BarycenterConfig& config = {});

/// Uniform measure over measures; the atom type of the nested-W1 diagnostics.
struct NestedDataset {
  std::vector<DiscreteMeasure> measures;
};

enum class BaseMetric { W1, W2, MMD };

double nested_w1(const NestedDataset& A, const NestedDataset& B, BaseMetric base,
                 double mmd_bandwidth = 1.0);

/// Replaces every support point (a simplex point) by the empirical frequency
/// vector of R multinomial draws from it.
DiscreteMeasure multinomial_reads(const DiscreteMeasure& mu, std::uint64_t R, std::mt19937_64& rng);

double mmd_gaussian(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double bandwidth);

}  // namespace ppcurve::ot

#endif
