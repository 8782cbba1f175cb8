#ifndef PPCURVE_METRIC_HPP
#define PPCURVE_METRIC_HPP

#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <variant>
#include <vector>

#include "ppcurve/common.hpp"
#include "ppcurve/ot.hpp"

namespace ppcurve {

struct EuclideanPoint {
  Point x;
};

/// A point of the ambient metric space: a Euclidean vector or a measure.
using MetricElement = std::variant<EuclideanPoint, ot::DiscreteMeasure>;

bool is_euclidean(const MetricElement& e);
std::size_t element_dim(const MetricElement& e);
std::uint64_t element_hash(const MetricElement& e);

/// Ordered knots gamma_1..gamma_K of a discrete curve; pinned indices are
/// frozen by the solvers (0-based, sorted).
struct KnotCurve {
  std::vector<MetricElement> knots;
  std::vector<std::size_t> pinned;

  std::size_t size() const { return knots.size(); }
  bool is_pinned(std::size_t k) const;
  void validate() const;
};

struct ProjectionResult {
  std::size_t knot_index = 0;  // 0-based; lowest index on ties
  double distance = 0.0;
};

/// Metric-backend contract: distance, geodesic interpolation, barycenter.
/// All solver code is generic over this interface.
class MetricBackend {
 public:
  virtual ~MetricBackend() = default;

  virtual double dist(const MetricElement& a, const MetricElement& b) const = 0;
  virtual MetricElement geodesic_point(const MetricElement& a, const MetricElement& b,
                                       double t) const = 0;
  virtual MetricElement barycenter(const std::vector<const MetricElement*>& elems,
                                   const std::vector<double>& weights) const = 0;

  /// Content-hash keyed distance cache; deterministic values make write races
  /// benign (last-writer-wins).
  double cached_dist(const MetricElement& a, const MetricElement& b) const;
  void clear_cache() const;

  static constexpr double kEqualityTol = 1e-9;

 protected:
  void check_compatible(const MetricElement& a, const MetricElement& b) const;

 private:
  mutable std::shared_mutex cache_mutex_;
  mutable std::unordered_map<std::uint64_t, double> cache_;
};

class EuclideanBackend final : public MetricBackend {
 public:
  double dist(const MetricElement& a, const MetricElement& b) const override;
  MetricElement geodesic_point(const MetricElement& a, const MetricElement& b,
                               double t) const override;
  MetricElement barycenter(const std::vector<const MetricElement*>& elems,
                           const std::vector<double>& weights) const override;
};

struct WassersteinParams {
  bool use_sinkhorn = false;
  ot::SinkhornParams sinkhorn;
  ot::BarycenterConfig barycenter;
};

class WassersteinBackend final : public MetricBackend {
 public:
  explicit WassersteinBackend(WassersteinParams params = {}) : params_(std::move(params)) {}

  double dist(const MetricElement& a, const MetricElement& b) const override;
  MetricElement geodesic_point(const MetricElement& a, const MetricElement& b,
                               double t) const override;
  MetricElement barycenter(const std::vector<const MetricElement*>& elems,
                           const std::vector<double>& weights) const override;

  const WassersteinParams& params() const { return params_; }

 private:
  WassersteinParams params_;
};

// ---- discrete-curve geometry ----

double discrete_length(const MetricBackend& backend, const KnotCurve& curve);
ProjectionResult project(const MetricBackend& backend, const MetricElement& x,
                         const KnotCurve& curve);
double arcwise_dist(const MetricBackend& backend, const KnotCurve& curve, std::size_t j,
                    std::size_t k);

struct ResampleResult {
  KnotCurve curve;
  bool degenerate = false;  // zero-length input
};

ResampleResult constant_speed_resample(const MetricBackend& backend, const KnotCurve& curve,
                                       std::size_t m);

}  // namespace ppcurve

#endif
