#include "ppcurve/seriation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ppcurve::seriation {

void DistanceMatrix::validate() const {
  if (n == 0 || values.size() != n * n) throw std::invalid_argument("distance matrix: bad shape");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(at(i, i)) > 1e-12) throw std::invalid_argument("distance matrix: nonzero diagonal");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (at(i, j) < 0.0) throw std::invalid_argument("distance matrix: negative entry");
      if (std::abs(at(i, j) - at(j, i)) > 1e-9)
        throw std::invalid_argument("distance matrix: asymmetric");
    }
  }
}

std::vector<std::vector<double>> DistanceMatrix::rows() const {
  std::vector<std::vector<double>> r(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r[i][j] = at(i, j);
  return r;
}

std::vector<std::size_t> ranks_to_permutation(const std::vector<double>& values) {
  std::vector<std::size_t> perm(values.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  return perm;
}

namespace {

// closed-form projection parameter of x onto segment [a, b]
double euclid_segment_t(const Point& x, const Point& a, const Point& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - a[i]) * (b[i] - a[i]);
    den += (b[i] - a[i]) * (b[i] - a[i]);
  }
  if (den <= 0.0) return 0.0;
  return std::clamp(num / den, 0.0, 1.0);
}

// golden-section minimization of d(x, geodesic(a,b,t)) over t in [0,1]
std::pair<double, double> golden_section_t(const MetricBackend& backend, const MetricElement& x,
                                           const MetricElement& a, const MetricElement& b) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  auto eval = [&](double t) { return backend.dist(x, backend.geodesic_point(a, b, t)); };
  double t1 = hi - gr * (hi - lo), t2 = lo + gr * (hi - lo);
  double f1 = eval(t1), f2 = eval(t2);
  for (int it = 0; it < 16; ++it) {
    if (f1 < f2) {
      hi = t2;
      t2 = t1;
      f2 = f1;
      t1 = hi - gr * (hi - lo);
      f1 = eval(t1);
    } else {
      lo = t1;
      t1 = t2;
      f1 = f2;
      t2 = lo + gr * (hi - lo);
      f2 = eval(t2);
    }
  }
  const double t = 0.5 * (lo + hi);
  return {t, eval(t)};
}

}  // namespace

PseudotimeResult projection_pseudotime(const MetricBackend& backend, const fit::Batches& data,
                                       const KnotCurve& curve, bool refine) {
  curve.validate();
  const std::size_t K = curve.size();
  std::vector<double> seg(K > 0 ? K - 1 : 0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < K; ++i) {
    seg[i] = backend.cached_dist(curve.knots[i], curve.knots[i + 1]);
    total += seg[i];
  }
  PseudotimeResult out;
  out.values.assign(data.size(), 0.0);
  if (total <= 0.0) {
    out.degenerate = true;
    return out;
  }
  std::vector<double> arc(K, 0.0);
  for (std::size_t i = 1; i < K; ++i) arc[i] = arc[i - 1] + seg[i - 1];

  const bool euclid_backend = is_euclidean(curve.knots.front());
  parallel_for(data.size(), [&](std::size_t n) {
    const auto pr = project(backend, data[n], curve);
    const std::size_t k = pr.knot_index;
    double tau = arc[k] / total;
    if (refine) {
      double best = pr.distance;
      for (std::size_t s : {k > 0 ? k - 1 : K, k + 1 < K ? k : K}) {
        if (s >= K - 1) continue;  // sentinel or out of range
        if (seg[s] <= 0.0) continue;
        double t, d;
        if (euclid_backend) {
          const Point& x = std::get<EuclideanPoint>(data[n]).x;
          const Point& a = std::get<EuclideanPoint>(curve.knots[s]).x;
          const Point& b = std::get<EuclideanPoint>(curve.knots[s + 1]).x;
          t = euclid_segment_t(x, a, b);
          Point p(x.size());
          for (std::size_t i = 0; i < x.size(); ++i) p[i] = (1.0 - t) * a[i] + t * b[i];
          d = euclid(x, p);
        } else {
          std::tie(t, d) = golden_section_t(backend, data[n], curve.knots[s], curve.knots[s + 1]);
        }
        if (d < best) {
          best = d;
          tau = (arc[s] + t * seg[s]) / total;
        }
      }
    }
    out.values[n] = tau;
  });
  return out;
}

double kendall_tau_error(const std::vector<double>& pseudotimes,
                         const std::vector<double>& true_times) {
  const std::size_t T = pseudotimes.size();
  if (T != true_times.size()) throw std::invalid_argument("kendall: length mismatch");
  if (T < 2) return 0.0;
  // sort by true time so discordance is counted against the true order
  std::vector<std::size_t> idx(T);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return true_times[a] < true_times[b]; });
  double disc = 0.0;
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = i + 1; j < T; ++j) {
      const double a = pseudotimes[idx[i]], b = pseudotimes[idx[j]];
      if (a > b)
        disc += 1.0;
      else if (a == b)
        disc += 0.5;
    }
  return disc * 2.0 / (static_cast<double>(T) * static_cast<double>(T - 1));
}

SeriationResult tsp_seriation(const DistanceMatrix& W,
                              std::optional<std::pair<std::size_t, std::size_t>> fixed_ends) {
  W.validate();
  if (W.n < 2) throw std::invalid_argument("tsp_seriation needs at least two batches");
  auto dmat = W.rows();
  std::vector<std::size_t> nodes(W.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::optional<std::size_t> s, e;
  if (fixed_ends) {
    s = fixed_ends->first;
    e = fixed_ends->second;
  }
  SeriationResult res;
  res.method = "tsp";
  res.permutation = fit::order_path(dmat, nodes, s, e);
  std::vector<std::size_t> identity(W.n);
  std::iota(identity.begin(), identity.end(), 0);
  const bool identity_ok =
      !fixed_ends || (identity.front() == fixed_ends->first && identity.back() == fixed_ends->second);
  if (identity_ok && fit::path_length(dmat, res.permutation) >= fit::path_length(dmat, identity))
    res.permutation = identity;
  res.pseudotimes.assign(W.n, 0.0);
  for (std::size_t r = 0; r < W.n; ++r)
    res.pseudotimes[res.permutation[r]] =
        static_cast<double>(r) / static_cast<double>(W.n - 1);
  return res;
}

SeriationResult spectral_seriation(const DistanceMatrix& W, double sigma) {
  W.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("spectral_seriation: sigma must be positive");
  const std::size_t n = W.n;
  SeriationResult res;
  res.method = "spectral";
  if (n == 2) {
    res.permutation = {0, 1};
    res.pseudotimes = {0.0, 1.0};
    return res;
  }

  // similarity and symmetric normalization D^{-1/2} A D^{-1/2}
  std::vector<double> A(n * n), dinv(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double w = W.at(i, j);
      A[i * n + j] = std::exp(-(w * w) / (sigma * sigma));
    }
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0, off = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += A[i * n + j];
      if (j != i) off += A[i * n + j];
    }
    if (off < 1e-300) res.flagged = true;  // numerically disconnected node
    dinv[i] = 1.0 / std::sqrt(std::max(row, 1e-300));
  }
  std::vector<double> M(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) M[i * n + j] = dinv[i] * A[i * n + j] * dinv[j];

  auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += M[i * n + j] * x[j];
      y[i] = s;
    }
  };
  auto normalize = [&](std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(std::max(s, 1e-300));
    for (double& x : v) x /= s;
    return s;
  };

  // leading eigenpair by power iteration
  std::vector<double> v1(n, 1.0), y(n);
  normalize(v1);
  double lam1 = 0.0;
  for (int it = 0; it < 20000; ++it) {
    matvec(v1, y);
    const double nrm = normalize(y);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(y[i] - v1[i]));
    v1 = y;
    lam1 = nrm;
    if (diff < 1e-10) break;
  }

  // second-largest eigenvector: shift by lam1 so the spectrum is nonnegative,
  // deflate v1, then power-iterate
  std::vector<double> v2(n);
  for (std::size_t i = 0; i < n; ++i)
    v2[i] = static_cast<double>(i) - 0.5 * static_cast<double>(n - 1);
  auto deflate = [&](std::vector<double>& v) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += v[i] * v1[i];
    for (std::size_t i = 0; i < n; ++i) v[i] -= dot * v1[i];
  };
  deflate(v2);
  normalize(v2);
  for (int it = 0; it < 20000; ++it) {
    matvec(v2, y);
    for (std::size_t i = 0; i < n; ++i) y[i] += lam1 * v2[i];  // shift
    deflate(y);
    normalize(y);
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) diff = std::max(diff, std::abs(y[i] - v2[i]));
    v2 = y;
    if (diff < 1e-10) break;
  }

  // canonical sign: the largest-magnitude entry is positive
  std::size_t amax = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (std::abs(v2[i]) > std::abs(v2[amax])) amax = i;
  if (v2[amax] < 0.0)
    for (double& x : v2) x = -x;

  res.permutation = ranks_to_permutation(v2);
  res.pseudotimes.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    res.pseudotimes[res.permutation[r]] = static_cast<double>(r) / static_cast<double>(n - 1);
  return res;
}

DistanceMatrix pairwise_w2_matrix(const fit::Batches& data, PairwiseSolver solver,
                                  const ot::SinkhornParams& params) {
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("pairwise_w2_matrix: empty dataset");
  DistanceMatrix W;
  W.n = n;
  W.metric_tag = solver == PairwiseSolver::Exact ? "w2" : "w2_sinkhorn";
  W.values.assign(n * n, 0.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), [&](std::size_t p) {
    const auto [i, j] = pairs[p];
    const auto& mu = std::get<ot::DiscreteMeasure>(data[i]);
    const auto& nu = std::get<ot::DiscreteMeasure>(data[j]);
    const double d = solver == PairwiseSolver::Exact ? ot::w2_exact(mu, nu).value
                                                     : ot::w2_sinkhorn(mu, nu, params).value;
    W.at(i, j) = W.at(j, i) = d;
  });
  return W;
}

}  // namespace ppcurve::seriation
