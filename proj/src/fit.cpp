#include "ppcurve/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ppcurve::fit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::vector<double>> pairwise_knot_dists(const MetricBackend& backend,
                                                     const KnotCurve& curve) {
  const std::size_t K = curve.size();
  std::vector<std::vector<double>> d(K, std::vector<double>(K, 0.0));
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j)
      d[i][j] = d[j][i] = backend.cached_dist(curve.knots[i], curve.knots[j]);
  return d;
}

std::vector<double> resolve_bandwidths(const PPCConfig& config, std::size_t K,
                                       const VoronoiPartition* partition) {
  std::vector<double> h;
  if (!config.bandwidths.empty()) {
    if (config.bandwidths.size() != K)
      throw std::invalid_argument("bandwidths must have one entry per knot");
    h = config.bandwidths;
  } else {
    h.assign(K, config.h);
  }
  if (config.adaptive_bandwidth && partition != nullptr && config.bandwidths.empty()) {
    std::vector<double> counts(K);
    for (std::size_t k = 0; k < K; ++k)
      counts[k] = static_cast<double>(partition->cells[k].size());
    std::vector<double> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const double med = sorted[K / 2];
    for (std::size_t k = 0; k < K; ++k) {
      const double c = std::max(counts[k], 1.0);
      h[k] = std::clamp(config.h * std::sqrt(std::max(med, 1.0) / c), 1e-12, 1.0);
    }
  }
  for (double v : h)
    if (!(v > 0.0) || v > 1.0) throw std::invalid_argument("bandwidths must lie in (0, 1]");
  return h;
}

// Row-normalized kernel weights kw[j][k] over normalized arcwise distances.
// Empty result signals a zero-length curve (caller falls back to the local
// objective).
std::vector<std::vector<double>> kernel_weights(const MetricBackend& backend,
                                                const KnotCurve& curve, const PPCConfig& config,
                                                const VoronoiPartition* partition) {
  const std::size_t K = curve.size();
  std::vector<double> seg(K > 0 ? K - 1 : 0);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < K; ++i) {
    seg[i] = backend.cached_dist(curve.knots[i], curve.knots[i + 1]);
    total += seg[i];
  }
  if (total <= 0.0) return {};

  std::vector<double> arc(K, 0.0);
  for (std::size_t i = 1; i < K; ++i) arc[i] = arc[i - 1] + seg[i - 1];

  const std::vector<double> h = resolve_bandwidths(config, K, partition);
  std::vector<std::vector<double>> kw(K, std::vector<double>(K, 0.0));
  for (std::size_t j = 0; j < K; ++j) {
    double cj = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double t = std::abs(arc[k] - arc[j]) / total;
      kw[j][k] = config.kernel.eval(t / h[j]);
      cj += kw[j][k];
    }
    for (std::size_t k = 0; k < K; ++k) kw[j][k] /= cj;  // cj >= w(0) = 1
  }
  return kw;
}

}  // namespace

double Kernel::eval(double t) const {
  const double a = 1.0 - std::pow(std::abs(t), p);
  return a > 0.0 ? std::pow(a, q) : 0.0;
}

void PPCConfig::validate() const {
  if (beta < 0.0 || !std::isfinite(beta)) throw std::invalid_argument("beta must be nonnegative");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (knots < 1) throw std::invalid_argument("need at least one knot");
  if (!pinned.empty() && knots < 2) throw std::invalid_argument("pins require K >= 2");
  for (const auto& [idx, elem] : pinned) {
    (void)elem;
    if (idx >= knots) throw std::out_of_range("pinned index out of range");
  }
  if (mode == Mode::Nonlocal && bandwidths.empty() && !(h > 0.0 && h <= 1.0))
    throw std::invalid_argument("nonlocal mode needs a bandwidth in (0, 1]");
}

KnotCurve init_kmeanspp(const MetricBackend& backend, const Batches& data, std::size_t K,
                        std::uint64_t seed,
                        const std::map<std::size_t, MetricElement>& pinned) {
  const std::size_t N = data.size();
  if (K < 1 || K > N) throw std::invalid_argument("init_kmeanspp requires 1 <= K <= N");
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> chosen;
  std::vector<char> taken(N, 0);
  std::vector<double> d2(N, kInf);
  {
    std::uniform_int_distribution<std::size_t> uni(0, N - 1);
    chosen.push_back(uni(rng));
    taken[chosen.back()] = 1;
  }
  while (chosen.size() < K) {
    const std::size_t last = chosen.back();
    std::vector<double> newd(N);
    parallel_for(N, [&](std::size_t n) {
      newd[n] = taken[n] ? 0.0 : backend.cached_dist(data[n], data[last]);
    });
    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      if (taken[n]) {
        d2[n] = 0.0;
        continue;
      }
      d2[n] = std::min(d2[n], newd[n] * newd[n]);
      total += d2[n];
    }
    std::size_t pick;
    if (total > 0.0) {
      std::uniform_real_distribution<double> uni(0.0, total);
      double r = uni(rng), acc = 0.0;
      pick = N;  // sentinel
      for (std::size_t n = 0; n < N; ++n) {
        if (taken[n]) continue;
        acc += d2[n];
        if (acc >= r) {
          pick = n;
          break;
        }
      }
      if (pick == N)  // numeric slack at the top of the range
        for (std::size_t n = N; n-- > 0;)
          if (!taken[n]) {
            pick = n;
            break;
          }
    } else {
      // all remaining batches coincide with chosen knots; pick uniformly
      std::vector<std::size_t> free;
      for (std::size_t n = 0; n < N; ++n)
        if (!taken[n]) free.push_back(n);
      std::uniform_int_distribution<std::size_t> uni(0, free.size() - 1);
      pick = free[uni(rng)];
    }
    taken[pick] = 1;
    chosen.push_back(pick);
  }

  KnotCurve curve;
  curve.knots.reserve(K);
  for (std::size_t j : chosen) curve.knots.push_back(data[j]);

  // install pins: move the nearest selected knot to the pinned slot, then
  // overwrite it with the pinned element
  std::vector<char> is_pin_slot(K, 0);
  for (const auto& [idx, elem] : pinned) is_pin_slot[idx] = 1;
  for (const auto& [idx, elem] : pinned) {
    std::size_t best = idx;
    double best_d = kInf;
    for (std::size_t j = 0; j < K; ++j) {
      if (is_pin_slot[j] && j != idx) continue;
      const double d = backend.dist(curve.knots[j], elem);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    std::swap(curve.knots[idx], curve.knots[best]);
    curve.knots[idx] = elem;
    curve.pinned.push_back(idx);
  }
  std::sort(curve.pinned.begin(), curve.pinned.end());
  return curve;
}

double path_length(const std::vector<std::vector<double>>& dmat,
                   const std::vector<std::size_t>& order) {
  double len = 0.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) len += dmat[order[i]][order[i + 1]];
  return len;
}

namespace {

std::vector<std::size_t> held_karp_path(const std::vector<std::vector<double>>& dmat,
                                        const std::vector<std::size_t>& nodes,
                                        std::optional<std::size_t> start_local,
                                        std::optional<std::size_t> end_local) {
  const std::size_t n = nodes.size();
  const std::size_t full = (std::size_t{1} << n) - 1;
  std::vector<std::vector<double>> dp(full + 1, std::vector<double>(n, kInf));
  std::vector<std::vector<int>> par(full + 1, std::vector<int>(n, -1));
  if (start_local) {
    dp[std::size_t{1} << *start_local][*start_local] = 0.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) dp[std::size_t{1} << i][i] = 0.0;
  }
  for (std::size_t mask = 1; mask <= full; ++mask) {
    for (std::size_t last = 0; last < n; ++last) {
      if (!(mask & (std::size_t{1} << last)) || dp[mask][last] == kInf) continue;
      for (std::size_t nxt = 0; nxt < n; ++nxt) {
        if (mask & (std::size_t{1} << nxt)) continue;
        if (end_local && nxt == *end_local && (mask | (std::size_t{1} << nxt)) != full) continue;
        const std::size_t m2 = mask | (std::size_t{1} << nxt);
        const double c = dp[mask][last] + dmat[nodes[last]][nodes[nxt]];
        if (c < dp[m2][nxt]) {
          dp[m2][nxt] = c;
          par[m2][nxt] = static_cast<int>(last);
        }
      }
    }
  }
  std::size_t best_last = 0;
  double best = kInf;
  if (end_local) {
    best_last = *end_local;
    best = dp[full][best_last];
  } else {
    for (std::size_t i = 0; i < n; ++i)
      if (dp[full][i] < best) {
        best = dp[full][i];
        best_last = i;
      }
  }
  std::vector<std::size_t> order;
  std::size_t mask = full;
  int cur = static_cast<int>(best_last);
  while (cur >= 0) {
    order.push_back(nodes[static_cast<std::size_t>(cur)]);
    const int p = par[mask][static_cast<std::size_t>(cur)];
    mask &= ~(std::size_t{1} << static_cast<std::size_t>(cur));
    cur = p;
  }
  std::reverse(order.begin(), order.end());
  return order;
}

void two_opt(const std::vector<std::vector<double>>& dmat, std::vector<std::size_t>& order,
             bool fix_start, bool fix_end) {
  const std::size_t n = order.size();
  bool improved = true;
  std::size_t passes = 0;
  while (improved && passes++ < 500) {
    improved = false;
    const std::size_t i0 = fix_start ? 1 : 0;
    const std::size_t j1 = fix_end ? n - 2 : n - 1;
    for (std::size_t i = i0; i + 1 <= j1; ++i) {
      for (std::size_t j = i + 1; j <= j1; ++j) {
        // reverse order[i..j]; only boundary edges change
        double before = 0.0, after = 0.0;
        if (i > 0) {
          before += dmat[order[i - 1]][order[i]];
          after += dmat[order[i - 1]][order[j]];
        }
        if (j + 1 < n) {
          before += dmat[order[j]][order[j + 1]];
          after += dmat[order[i]][order[j + 1]];
        }
        if (after + 1e-12 < before) {
          std::reverse(order.begin() + static_cast<std::ptrdiff_t>(i),
                       order.begin() + static_cast<std::ptrdiff_t>(j) + 1);
          improved = true;
        }
      }
    }
  }
}

}  // namespace

std::vector<std::size_t> order_path(const std::vector<std::vector<double>>& dmat,
                                    std::vector<std::size_t> nodes,
                                    std::optional<std::size_t> fixed_start,
                                    std::optional<std::size_t> fixed_end) {
  const std::size_t n = nodes.size();
  if (n <= 1) return nodes;
  std::optional<std::size_t> sl, el;
  for (std::size_t i = 0; i < n; ++i) {
    if (fixed_start && nodes[i] == *fixed_start) sl = i;
    if (fixed_end && nodes[i] == *fixed_end) el = i;
  }
  if ((fixed_start && !sl) || (fixed_end && !el))
    throw std::invalid_argument("order_path: fixed node not among nodes");

  if (n <= 12) return held_karp_path(dmat, nodes, sl, el);

  // nearest-neighbor construction
  std::vector<char> used(n, 0);
  std::vector<std::size_t> order;
  order.reserve(n);
  const std::size_t start = sl.value_or(0);
  order.push_back(start);
  used[start] = 1;
  if (el) used[*el] = 1;
  for (std::size_t step = 1; step < n - (el ? 1u : 0u); ++step) {
    std::size_t best = n;
    double bd = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double d = dmat[nodes[order.back()]][nodes[j]];
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    order.push_back(best);
    used[best] = 1;
  }
  if (el) order.push_back(*el);

  std::vector<std::size_t> global(n);
  for (std::size_t i = 0; i < n; ++i) global[i] = nodes[order[i]];
  two_opt(dmat, global, sl.has_value(), el.has_value());
  return global;
}

KnotCurve tsp_order(const MetricBackend& backend, const KnotCurve& curve, bool fixed_ends) {
  curve.validate();
  const std::size_t K = curve.size();
  if (K < 2) return curve;
  auto dmat = pairwise_knot_dists(backend, curve);
  std::vector<std::size_t> nodes(K);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::optional<std::size_t> s, e;
  if (fixed_ends) {
    s = 0;
    e = K - 1;
  }
  auto order = order_path(dmat, nodes, s, e);
  std::vector<std::size_t> identity(K);
  std::iota(identity.begin(), identity.end(), 0);
  if (path_length(dmat, order) >= path_length(dmat, identity)) return curve;
  KnotCurve out = curve;
  for (std::size_t i = 0; i < K; ++i) out.knots[i] = curve.knots[order[i]];
  return out;
}

ObjectiveBreakdown objective_ppc_k(const MetricBackend& backend, const Batches& data,
                                   const KnotCurve& curve, double beta) {
  if (data.empty()) throw std::invalid_argument("objective needs data");
  curve.validate();
  const std::size_t N = data.size();
  std::vector<double> mind(N);
  parallel_for(N, [&](std::size_t n) { mind[n] = project(backend, data[n], curve).distance; });
  ObjectiveBreakdown b;
  for (double d : mind) b.data_fit += d * d;
  b.data_fit /= static_cast<double>(N);
  b.length = discrete_length(backend, curve);
  b.total = b.data_fit + beta * b.length;
  return b;
}

ObjectiveBreakdown objective_ppc_kw(const MetricBackend& backend, const Batches& data,
                                    const KnotCurve& curve, const PPCConfig& config) {
  if (data.empty()) throw std::invalid_argument("objective needs data");
  curve.validate();
  const auto partition = voronoi_cells(backend, data, curve);
  auto kw = kernel_weights(backend, curve, config, &partition);
  if (kw.empty()) {
    auto b = objective_ppc_k(backend, data, curve, config.beta);
    b.degenerate_fallback = true;
    return b;
  }
  const std::size_t N = data.size();
  const std::size_t K = curve.size();
  ObjectiveBreakdown b;
  for (std::size_t j = 0; j < K; ++j) {
    for (std::size_t k = 0; k < K; ++k) {
      if (kw[j][k] == 0.0) continue;
      double s = 0.0;
      for (std::size_t n : partition.cells[j]) {
        const double d = backend.cached_dist(data[n], curve.knots[k]);
        s += d * d;
      }
      b.data_fit += kw[j][k] * s;
    }
  }
  b.data_fit /= static_cast<double>(N);
  b.length = discrete_length(backend, curve);
  b.total = b.data_fit + config.beta * b.length;
  return b;
}

VoronoiPartition voronoi_cells(const MetricBackend& backend, const Batches& data,
                               const KnotCurve& curve) {
  curve.validate();
  const std::size_t N = data.size();
  std::vector<std::size_t> nearest(N);
  parallel_for(N, [&](std::size_t n) { nearest[n] = project(backend, data[n], curve).knot_index; });
  VoronoiPartition p;
  p.cells.assign(curve.size(), {});
  for (std::size_t n = 0; n < N; ++n) p.cells[nearest[n]].push_back(n);
  return p;
}

KnotCurve update_knots(const MetricBackend& backend, const Batches& data, const KnotCurve& curve,
                       const VoronoiPartition& partition, const PPCConfig& config) {
  curve.validate();
  if (partition.cells.size() != curve.size())
    throw std::invalid_argument("partition inconsistent with curve");
  const std::size_t N = data.size();
  const std::size_t K = curve.size();

  // kernel weights frozen at entry geometry
  std::vector<std::vector<double>> kw;
  if (config.mode == Mode::Nonlocal) kw = kernel_weights(backend, curve, config, &partition);

  KnotCurve out = curve;
  std::vector<std::size_t> sweep;
  for (std::size_t k = 0; k < K; ++k)
    if (!out.is_pinned(k)) sweep.push_back(k);
  std::vector<std::size_t> order(sweep);
  for (auto it = sweep.rbegin(); it != sweep.rend(); ++it) order.push_back(*it);

  for (std::size_t k : order) {
    std::vector<const MetricElement*> elems;
    std::vector<double> weights;
    if (config.mode == Mode::Nonlocal && !kw.empty()) {
      for (std::size_t j = 0; j < K; ++j) {
        if (kw[j][k] == 0.0) continue;
        for (std::size_t n : partition.cells[j]) {
          elems.push_back(&data[n]);
          weights.push_back(kw[j][k] / static_cast<double>(N));
        }
      }
    } else {
      for (std::size_t n : partition.cells[k]) {
        elems.push_back(&data[n]);
        weights.push_back(1.0 / static_cast<double>(N));
      }
    }
    const bool no_data = elems.empty();

    if (no_data) {
      // repair move: neighbor terms only; the geodesic midpoint minimizes them
      if (k > 0 && k + 1 < K)
        out.knots[k] = backend.geodesic_point(out.knots[k - 1], out.knots[k + 1], 0.5);
      continue;
    }
    if (config.beta > 0.0) {
      // majorize beta*d(gamma, gamma_pm) by beta*d^2/(2c) + beta*c/2
      if (k > 0) {
        const double c = std::max(backend.dist(out.knots[k], out.knots[k - 1]), config.neighbor_floor);
        elems.push_back(&out.knots[k - 1]);
        weights.push_back(config.beta / (2.0 * c));
      }
      if (k + 1 < K) {
        const double c = std::max(backend.dist(out.knots[k], out.knots[k + 1]), config.neighbor_floor);
        elems.push_back(&out.knots[k + 1]);
        weights.push_back(config.beta / (2.0 * c));
      }
    }
    out.knots[k] = backend.barycenter(elems, weights);
  }
  return out;
}

namespace {

KnotCurve reorder_with_pins(const MetricBackend& backend, const KnotCurve& curve) {
  const std::size_t K = curve.size();
  if (K < 3) return curve;
  if (curve.pinned.empty()) return tsp_order(backend, curve, false);

  auto dmat = pairwise_knot_dists(backend, curve);
  // segment boundaries: curve ends plus every pinned index
  std::vector<std::size_t> bounds;
  if (curve.pinned.front() != 0) bounds.push_back(0);
  bounds.insert(bounds.end(), curve.pinned.begin(), curve.pinned.end());
  if (curve.pinned.back() != K - 1) bounds.push_back(K - 1);

  std::vector<std::size_t> order;
  order.reserve(K);
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    const std::size_t lo = bounds[b], hi = bounds[b + 1];
    std::vector<std::size_t> nodes;
    for (std::size_t i = lo; i <= hi; ++i) nodes.push_back(i);
    std::optional<std::size_t> s, e;
    if (curve.is_pinned(lo) || b > 0) s = lo;  // interior boundaries stay put
    if (curve.is_pinned(hi) || b + 2 < bounds.size()) e = hi;
    auto seg = order_path(dmat, nodes, s, e);
    if (b > 0) seg.erase(seg.begin());  // boundary node already emitted
    order.insert(order.end(), seg.begin(), seg.end());
  }

  std::vector<std::size_t> identity(K);
  std::iota(identity.begin(), identity.end(), 0);
  if (path_length(dmat, order) >= path_length(dmat, identity)) return curve;
  KnotCurve out = curve;
  for (std::size_t i = 0; i < K; ++i) out.knots[i] = curve.knots[order[i]];
  return out;
}

}  // namespace

FitResult fit(const MetricBackend& backend, const Batches& data, const PPCConfig& config) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("fit needs data");
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  FitResult res;
  res.curve = init_kmeanspp(backend, data, config.knots, config.seed, config.pinned);

  auto eval_obj = [&](const KnotCurve& c) {
    return config.mode == Mode::Nonlocal ? objective_ppc_kw(backend, data, c, config)
                                         : objective_ppc_k(backend, data, c, config.beta);
  };

  backend.clear_cache();
  ObjectiveBreakdown prev = eval_obj(res.curve);
  res.trace.entries.push_back({prev.total, prev.data_fit, prev.length, 0.0});

  auto accepts = [](double cand, double prev_total) {
    return cand <= prev_total + 1e-12 * (1.0 + std::abs(prev_total));
  };

  for (std::size_t iter = 0; iter < config.max_outer_iters; ++iter) {
    const KnotCurve before = res.curve;

    // 1) min-length reorder. In local mode this cannot increase the objective
    // (same knot set, shorter polyline); in nonlocal mode it reshapes the
    // kernel weights, so it is accepted only on descent.
    KnotCurve reordered = reorder_with_pins(backend, res.curve);
    if (config.mode == Mode::Local) {
      res.curve = std::move(reordered);
    } else {
      const ObjectiveBreakdown o = eval_obj(reordered);
      if (accepts(o.total, prev.total)) {
        res.curve = std::move(reordered);
        prev = o;
      }
    }

    // 2) Voronoi assignment + MM knot update. The MM step descends a frozen
    // surrogate, not the recomputed objective, so backtrack along knot
    // geodesics until the true objective descends.
    const auto partition = voronoi_cells(backend, data, res.curve);
    const KnotCurve target = update_knots(backend, data, res.curve, partition, config);
    bool accepted = false;
    ObjectiveBreakdown cur = prev;
    for (double step : {1.0, 0.5, 0.25}) {
      KnotCurve cand;
      if (step == 1.0) {
        cand = target;
      } else {
        cand = res.curve;
        for (std::size_t k = 0; k < cand.size(); ++k)
          if (!cand.is_pinned(k))
            cand.knots[k] = backend.geodesic_point(res.curve.knots[k], target.knots[k], step);
      }
      const ObjectiveBreakdown o = eval_obj(cand);
      if (accepts(o.total, prev.total)) {
        res.curve = std::move(cand);
        cur = o;
        accepted = true;
        break;
      }
    }
    backend.clear_cache();  // distance cache is scoped to one Lloyd iteration
    if (!accepted) {
      // no descent direction left: coupled fixed point
      res.trace.converged = true;
      break;
    }

    double movement = 0.0;
    for (std::size_t k = 0; k < res.curve.size(); ++k)
      movement = std::max(movement, backend.dist(before.knots[k], res.curve.knots[k]));

    res.trace.entries.push_back({cur.total, cur.data_fit, cur.length, movement});
    const double drop = prev.total - cur.total;
    prev = cur;
    if (drop < config.epsilon || movement < config.movement_tol) {
      res.trace.converged = true;
      break;
    }
    if (config.time_cap_seconds > 0.0 && elapsed() > config.time_cap_seconds) {
      res.trace.time_capped = true;
      break;
    }
  }
  return res;
}

}  // namespace ppcurve::fit
