#include "ppcurve/metric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ppcurve {

bool is_euclidean(const MetricElement& e) {
  return std::holds_alternative<EuclideanPoint>(e);
}

std::size_t element_dim(const MetricElement& e) {
  if (is_euclidean(e)) return std::get<EuclideanPoint>(e).x.size();
  return std::get<ot::DiscreteMeasure>(e).dim();
}

std::uint64_t element_hash(const MetricElement& e) {
  if (is_euclidean(e)) return hash_doubles(std::get<EuclideanPoint>(e).x, 0x9e3779b97f4a7c15ull);
  return std::get<ot::DiscreteMeasure>(e).content_hash();
}

bool KnotCurve::is_pinned(std::size_t k) const {
  return std::binary_search(pinned.begin(), pinned.end(), k);
}

void KnotCurve::validate() const {
  if (knots.empty()) throw std::invalid_argument("curve needs at least one knot");
  const bool eu = is_euclidean(knots.front());
  const std::size_t d = element_dim(knots.front());
  for (const auto& k : knots) {
    if (is_euclidean(k) != eu) throw BackendMismatch("curve mixes backends");
    if (element_dim(k) != d) throw DimensionMismatch("curve mixes dimensions");
  }
  if (!std::is_sorted(pinned.begin(), pinned.end()))
    throw std::invalid_argument("pinned indices must be sorted");
  for (std::size_t p : pinned)
    if (p >= knots.size()) throw std::out_of_range("pinned index out of range");
}

void MetricBackend::check_compatible(const MetricElement& a, const MetricElement& b) const {
  if (is_euclidean(a) != is_euclidean(b)) throw BackendMismatch("elements from different backends");
  if (element_dim(a) != element_dim(b)) throw DimensionMismatch("elements of different dimension");
}

double MetricBackend::cached_dist(const MetricElement& a, const MetricElement& b) const {
  std::uint64_t ha = element_hash(a), hb = element_hash(b);
  if (hb < ha) std::swap(ha, hb);
  const std::uint64_t key = ha ^ (hb * 0x9e3779b97f4a7c15ull + 0x165667b19e3779f9ull);
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const double d = dist(a, b);
  {
    std::unique_lock lock(cache_mutex_);
    cache_[key] = d;
  }
  return d;
}

void MetricBackend::clear_cache() const {
  std::unique_lock lock(cache_mutex_);
  cache_.clear();
}

// ---- Euclidean backend ----

namespace {

const Point& as_point(const MetricElement& e) {
  if (!is_euclidean(e)) throw BackendMismatch("expected a Euclidean element");
  return std::get<EuclideanPoint>(e).x;
}

const ot::DiscreteMeasure& as_measure(const MetricElement& e) {
  if (is_euclidean(e)) throw BackendMismatch("expected a measure element");
  return std::get<ot::DiscreteMeasure>(e);
}

void check_finite(const Point& p) {
  for (double x : p)
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite coordinate");
}

}  // namespace

double EuclideanBackend::dist(const MetricElement& a, const MetricElement& b) const {
  check_compatible(a, b);
  const Point& pa = as_point(a);
  const Point& pb = as_point(b);
  check_finite(pa);
  check_finite(pb);
  return euclid(pa, pb);
}

MetricElement EuclideanBackend::geodesic_point(const MetricElement& a, const MetricElement& b,
                                               double t) const {
  check_compatible(a, b);
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("geodesic parameter outside [0,1]");
  const Point& pa = as_point(a);
  const Point& pb = as_point(b);
  Point out(pa.size());
  for (std::size_t i = 0; i < pa.size(); ++i) out[i] = (1.0 - t) * pa[i] + t * pb[i];
  return EuclideanPoint{std::move(out)};
}

MetricElement EuclideanBackend::barycenter(const std::vector<const MetricElement*>& elems,
                                           const std::vector<double>& weights) const {
  if (elems.empty() || elems.size() != weights.size())
    throw std::invalid_argument("barycenter: empty input or mismatched weights");
  const std::size_t d = element_dim(*elems.front());
  Point out(d, 0.0);
  double ws = 0.0;
  for (std::size_t k = 0; k < elems.size(); ++k) {
    const Point& p = as_point(*elems[k]);
    for (std::size_t i = 0; i < d; ++i) out[i] += weights[k] * p[i];
    ws += weights[k];
  }
  if (ws <= 0.0) throw std::invalid_argument("barycenter: weights sum to zero");
  for (double& x : out) x /= ws;
  return EuclideanPoint{std::move(out)};
}

// ---- Wasserstein backend ----

double WassersteinBackend::dist(const MetricElement& a, const MetricElement& b) const {
  check_compatible(a, b);
  const auto& mu = as_measure(a);
  const auto& nu = as_measure(b);
  if (params_.use_sinkhorn) return ot::w2_sinkhorn(mu, nu, params_.sinkhorn).value;
  return ot::w2_exact(mu, nu).value;
}

MetricElement WassersteinBackend::geodesic_point(const MetricElement& a, const MetricElement& b,
                                                 double t) const {
  check_compatible(a, b);
  return ot::displacement_interpolate(as_measure(a), as_measure(b), t);
}

MetricElement WassersteinBackend::barycenter(const std::vector<const MetricElement*>& elems,
                                             const std::vector<double>& weights) const {
  if (elems.empty() || elems.size() != weights.size())
    throw std::invalid_argument("barycenter: empty input or mismatched weights");
  std::vector<const ot::DiscreteMeasure*> ms(elems.size());
  for (std::size_t k = 0; k < elems.size(); ++k) ms[k] = &as_measure(*elems[k]);
  double ws = 0.0;
  for (double w : weights) ws += w;
  std::vector<double> lam(weights);
  for (double& l : lam) l /= ws;
  return ot::barycenter(ms, lam, params_.barycenter).measure;
}

// ---- discrete-curve geometry ----

double discrete_length(const MetricBackend& backend, const KnotCurve& curve) {
  curve.validate();
  double len = 0.0;
  for (std::size_t k = 0; k + 1 < curve.size(); ++k)
    len += backend.dist(curve.knots[k], curve.knots[k + 1]);
  return len;
}

ProjectionResult project(const MetricBackend& backend, const MetricElement& x,
                         const KnotCurve& curve) {
  curve.validate();
  ProjectionResult best{0, backend.cached_dist(x, curve.knots[0])};
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const double d = backend.cached_dist(x, curve.knots[k]);
    if (d < best.distance) best = ProjectionResult{k, d};
  }
  return best;
}

double arcwise_dist(const MetricBackend& backend, const KnotCurve& curve, std::size_t j,
                    std::size_t k) {
  if (j >= curve.size() || k >= curve.size()) throw std::out_of_range("arcwise_dist: index");
  if (j == k) return 0.0;
  const std::size_t lo = std::min(j, k), hi = std::max(j, k);
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i) s += backend.dist(curve.knots[i], curve.knots[i + 1]);
  return s;
}

ResampleResult constant_speed_resample(const MetricBackend& backend, const KnotCurve& curve,
                                       std::size_t m) {
  curve.validate();
  if (curve.size() < 2 || m < 2)
    throw std::invalid_argument("constant_speed_resample needs K >= 2 and m >= 2");

  std::vector<double> seg(curve.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    seg[i] = backend.dist(curve.knots[i], curve.knots[i + 1]);
    total += seg[i];
  }

  ResampleResult out;
  if (total <= 0.0) {
    out.degenerate = true;
    out.curve.knots.assign(m, curve.knots.front());
    return out;
  }

  out.curve.knots.reserve(m);
  out.curve.knots.push_back(curve.knots.front());
  std::size_t cursor = 0;
  double consumed = 0.0;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    const double target = total * static_cast<double>(i) / static_cast<double>(m - 1);
    while (cursor + 1 < seg.size() && consumed + seg[cursor] < target) consumed += seg[cursor++];
    const double t = seg[cursor] > 0.0 ? std::clamp((target - consumed) / seg[cursor], 0.0, 1.0) : 0.0;
    out.curve.knots.push_back(
        backend.geodesic_point(curve.knots[cursor], curve.knots[cursor + 1], t));
  }
  out.curve.knots.push_back(curve.knots.back());
  return out;
}

}  // namespace ppcurve
