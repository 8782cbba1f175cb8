#include "ppcurve/ot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ppcurve::ot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  mu.validate();
  nu.validate();
  if (mu.dim() != nu.dim()) throw DimensionMismatch("measures have different ambient dimension");
}

std::vector<std::vector<double>> cost_matrix(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                             GroundCost gc) {
  std::vector<std::vector<double>> c(mu.size(), std::vector<double>(nu.size()));
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const double s = sq_euclid(mu.support[i], nu.support[j]);
      c[i][j] = gc == GroundCost::SquaredEuclidean ? s : std::sqrt(s);
    }
  return c;
}

double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (m == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

DiscreteMeasure DiscreteMeasure::uniform(std::vector<Point> pts) {
  DiscreteMeasure m;
  const double w = 1.0 / static_cast<double>(pts.size());
  m.weights.assign(pts.size(), w);
  m.support = std::move(pts);
  return m;
}

void DiscreteMeasure::validate() const {
  if (support.empty() || support.size() != weights.size())
    throw std::invalid_argument("measure needs equal-length, nonempty support and weights");
  const std::size_t d = support.front().size();
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (support[i].size() != d) throw DimensionMismatch("ragged support");
    for (double x : support[i])
      if (!std::isfinite(x)) throw std::invalid_argument("non-finite support point");
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("negative weight");
    s += weights[i];
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("weights do not sum to 1");
}

std::uint64_t DiscreteMeasure::content_hash() const {
  std::uint64_t h = hash_doubles(weights);
  for (const auto& p : support) h = hash_doubles(p, h);
  return h;
}

// Successive shortest augmenting paths with node potentials (Dijkstra on the
// dense bipartite residual graph). With unit supplies this is exactly the
// Jonker-Volgenant assignment routine, so uniform equal-cardinality inputs
// take the assignment path for free.
TransportPlan solve_transport(const std::vector<std::vector<double>>& cost,
                              const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0 || cost.size() != n || cost[0].size() != m)
    throw std::invalid_argument("transport: bad shapes");
  if (n > kExactSizeCap || m > kExactSizeCap)
    throw std::invalid_argument("transport: exact-solver size cap exceeded");
  double sa = std::accumulate(a.begin(), a.end(), 0.0);
  double sb = std::accumulate(b.begin(), b.end(), 0.0);
  if (std::abs(sa - sb) > 1e-7) throw std::invalid_argument("transport: unbalanced masses");

  std::vector<double> rem_a = a, rem_b = b;
  std::vector<std::vector<double>> flow(n, std::vector<double>(m, 0.0));
  std::vector<double> pot_u(n, 0.0), pot_v(m, 0.0);
  const std::size_t V = n + m;  // nodes: [0,n) sources, [n,n+m) sinks
  std::vector<double> dist(V);
  std::vector<int> parent(V);
  std::vector<char> done(V);

  double total_rem = sa;
  // a mass below this is treated as exhausted
  const double mass_eps = 1e-13 * std::max(1.0, sa);

  while (total_rem > mass_eps) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(parent.begin(), parent.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (rem_a[i] > mass_eps) dist[i] = 0.0;

    int target = -1;
    for (;;) {
      int u = -1;
      double best = kInf;
      for (std::size_t k = 0; k < V; ++k)
        if (!done[k] && dist[k] < best) {
          best = dist[k];
          u = static_cast<int>(k);
        }
      if (u < 0) break;
      done[u] = 1;
      if (u >= static_cast<int>(n) && rem_b[u - n] > mass_eps) {
        target = u;
        break;
      }
      if (u < static_cast<int>(n)) {
        const std::size_t i = static_cast<std::size_t>(u);
        for (std::size_t j = 0; j < m; ++j) {
          const double rc = std::max(0.0, cost[i][j] + pot_u[i] - pot_v[j]);
          if (!done[n + j] && dist[u] + rc < dist[n + j]) {
            dist[n + j] = dist[u] + rc;
            parent[n + j] = u;
          }
        }
      } else {
        const std::size_t j = static_cast<std::size_t>(u) - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow[i][j] <= 0.0) continue;
          const double rc = std::max(0.0, pot_v[j] - pot_u[i] - cost[i][j]);
          if (!done[i] && dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = u;
          }
        }
      }
    }
    if (target < 0) throw std::runtime_error("transport: no augmenting path (infeasible)");

    // bottleneck along the alternating path
    double push = rem_b[target - n];
    for (int v = target; parent[v] >= 0; v = parent[v]) {
      const int p = parent[v];
      if (v >= static_cast<int>(n)) {
        if (parent[p] < 0) push = std::min(push, rem_a[p]);
      } else {
        push = std::min(push, flow[v][p - n]);
      }
    }
    for (int v = target; parent[v] >= 0; v = parent[v]) {
      const int p = parent[v];
      if (v >= static_cast<int>(n))
        flow[p][v - n] += push;
      else
        flow[v][p - n] -= push;
    }
    int src = target;
    while (parent[src] >= 0) src = parent[src];
    rem_a[src] -= push;
    rem_b[target - n] -= push;
    total_rem -= push;

    const double dt = dist[target];
    for (std::size_t k = 0; k < V; ++k) {
      const double d = std::min(dist[k], dt);
      if (d == kInf) continue;
      if (k < n)
        pot_u[k] += d;
      else
        pot_v[k - n] += d;
    }
  }

  TransportPlan plan;
  plan.coupling = std::move(flow);
  double c = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c += plan.coupling[i][j] * cost[i][j];
  plan.cost = c;
  return plan;
}

ExactResult w2_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  check_pair(mu, nu);
  auto c = cost_matrix(mu, nu, GroundCost::SquaredEuclidean);
  ExactResult r;
  r.plan = solve_transport(c, mu.weights, nu.weights);
  r.value = std::sqrt(std::max(0.0, r.plan.cost));
  return r;
}

double w1_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  check_pair(mu, nu);
  auto c = cost_matrix(mu, nu, GroundCost::Euclidean);
  return solve_transport(c, mu.weights, nu.weights).cost;
}

SinkhornResult w2_sinkhorn(const DiscreteMeasure& mu_in, const DiscreteMeasure& nu_in,
                           const SinkhornParams& params) {
  check_pair(mu_in, nu_in);
  if (!(params.reg > 0.0)) throw std::invalid_argument("sinkhorn: reg must be positive");
  // canonical argument order keeps the result exactly symmetric
  const bool swapped = nu_in.content_hash() < mu_in.content_hash();
  const DiscreteMeasure& mu = swapped ? nu_in : mu_in;
  const DiscreteMeasure& nu = swapped ? mu_in : nu_in;

  const std::size_t n = mu.size(), m = nu.size();
  auto c = cost_matrix(mu, nu, GroundCost::SquaredEuclidean);
  double cmax = 0.0;
  for (const auto& row : c)
    for (double x : row) cmax = std::max(cmax, x);

  std::vector<double> loga(n), logb(m), f(n, 0.0), g(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) loga[i] = std::log(std::max(mu.weights[i], 1e-300));
  for (std::size_t j = 0; j < m; ++j) logb[j] = std::log(std::max(nu.weights[j], 1e-300));

  std::vector<double> schedule;
  if (params.eps_scaling && cmax > 0.0) {
    double r = std::max(params.reg, 0.1 * cmax);
    while (r > params.reg * 1.0001) {
      schedule.push_back(r);
      r *= 0.5;
    }
  }
  schedule.push_back(params.reg);

  SinkhornResult result;
  std::vector<double> buf(std::max(n, m));
  std::size_t iters = 0;
  bool converged = false;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const double reg = schedule[s];
    const bool final_stage = (s + 1 == schedule.size());
    const std::size_t stage_iters = final_stage ? params.max_iter : std::max<std::size_t>(10, params.max_iter / (4 * schedule.size()));
    converged = false;
    for (std::size_t it = 0; it < stage_iters; ++it) {
      ++iters;
      for (std::size_t j = 0; j < m; ++j) {
        buf.resize(n);
        for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - c[i][j]) / reg + loga[i];
        g[j] = -reg * log_sum_exp(buf);
      }
      for (std::size_t i = 0; i < n; ++i) {
        buf.resize(m);
        for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - c[i][j]) / reg + logb[j];
        f[i] = -reg * log_sum_exp(buf);
      }
      if (it % 5 == 4 || it + 1 == stage_iters) {
        // row-marginal violation of the implied plan
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          buf.resize(m);
          for (std::size_t j = 0; j < m; ++j) buf[j] = (f[i] + g[j] - c[i][j]) / reg + loga[i] + logb[j];
          err += std::abs(std::exp(log_sum_exp(buf)) - mu.weights[i]);
        }
        if (err < params.tol) {
          converged = true;
          break;
        }
      }
    }
  }

  const double reg = params.reg;
  double cost = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double lp = (f[i] + g[j] - c[i][j]) / reg + loga[i] + logb[j];
      cost += std::exp(lp) * c[i][j];
    }
  result.value = std::sqrt(std::max(0.0, cost));
  result.converged = converged;
  result.iterations = iters;
  return result;
}

DiscreteMeasure displacement_interpolate(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                         double t) {
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolation parameter outside [0,1]");
  auto r = w2_exact(mu, nu);
  DiscreteMeasure out;
  const std::size_t d = mu.dim();
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = 0; j < nu.size(); ++j) {
      const double w = r.plan.coupling[i][j];
      if (w <= 1e-15) continue;
      Point p(d);
      for (std::size_t k = 0; k < d; ++k)
        p[k] = (1.0 - t) * mu.support[i][k] + t * nu.support[j][k];
      out.support.push_back(std::move(p));
      out.weights.push_back(w);
    }
  double s = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  for (double& w : out.weights) w /= s;
  return out;
}

BarycenterResult barycenter(const std::vector<const DiscreteMeasure*>& measures,
                            const std::vector<double>& lambdas,
                            const BarycenterConfig& config) {
  if (measures.empty() || measures.size() != lambdas.size())
    throw std::invalid_argument("barycenter: empty input or mismatched weights");
  double ls = 0.0;
  for (double l : lambdas) {
    if (l < 0.0) throw std::invalid_argument("barycenter: negative weight");
    ls += l;
  }
  if (std::abs(ls - 1.0) > 1e-7) throw std::invalid_argument("barycenter: weights must sum to 1");

  // deterministic init: support of the heaviest input
  std::size_t init = 0;
  for (std::size_t k = 1; k < lambdas.size(); ++k)
    if (lambdas[k] > lambdas[init]) init = k;

  BarycenterResult res;
  res.measure = *measures[init];
  if (measures.size() == 1) {
    res.objective_trace.push_back(0.0);
    return res;
  }

  const std::size_t S = res.measure.size();
  const std::size_t d = res.measure.dim();
  double prev_obj = kInf;
  res.converged = false;
  for (std::size_t it = 0; it < config.max_iter; ++it) {
    std::vector<Point> target(S, Point(d, 0.0));
    double obj = 0.0;
    std::vector<ExactResult> plans(measures.size());
    parallel_for(measures.size(), [&](std::size_t k) {
      plans[k] = w2_exact(res.measure, *measures[k]);
    });
    for (std::size_t k = 0; k < measures.size(); ++k) {
      obj += lambdas[k] * plans[k].plan.cost;
      const auto& cpl = plans[k].plan.coupling;
      for (std::size_t i = 0; i < S; ++i)
        for (std::size_t j = 0; j < measures[k]->size(); ++j) {
          const double w = cpl[i][j];
          if (w == 0.0) continue;
          for (std::size_t c = 0; c < d; ++c)
            target[i][c] += lambdas[k] * w * measures[k]->support[j][c];
        }
    }
    if (obj > prev_obj + 1e-12 * (1.0 + std::abs(prev_obj))) break;  // keep previous iterate
    res.objective_trace.push_back(obj);
    prev_obj = obj;

    double move = 0.0;
    for (std::size_t i = 0; i < S; ++i) {
      const double wi = std::max(res.measure.weights[i], 1e-300);
      for (std::size_t c = 0; c < d; ++c) target[i][c] /= wi;
      move = std::max(move, std::sqrt(sq_euclid(target[i], res.measure.support[i])));
      res.measure.support[i] = target[i];
    }
    if (move < config.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

double nested_w1(const NestedDataset& A, const NestedDataset& B, BaseMetric base,
                 double mmd_bandwidth) {
  if (A.measures.empty() || B.measures.empty())
    throw std::invalid_argument("nested_w1: empty dataset");
  const std::size_t n = A.measures.size(), m = B.measures.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(m));
  parallel_for(n * m, [&](std::size_t idx) {
    const std::size_t i = idx / m, j = idx % m;
    switch (base) {
      case BaseMetric::W1: c[i][j] = w1_exact(A.measures[i], B.measures[j]); break;
      case BaseMetric::W2: c[i][j] = w2_exact(A.measures[i], B.measures[j]).value; break;
      case BaseMetric::MMD: c[i][j] = mmd_gaussian(A.measures[i], B.measures[j], mmd_bandwidth); break;
    }
  });
  std::vector<double> a(n, 1.0 / n), b(m, 1.0 / m);
  return solve_transport(c, a, b).cost;
}

DiscreteMeasure multinomial_reads(const DiscreteMeasure& mu, std::uint64_t R, std::mt19937_64& rng) {
  mu.validate();
  if (R < 1) throw std::invalid_argument("multinomial_reads: R must be >= 1");
  DiscreteMeasure out = mu;
  const std::size_t d = mu.dim();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const Point& v = mu.support[i];
    double s = 0.0;
    for (double x : v) {
      if (x < -1e-9) throw std::invalid_argument("multinomial_reads: point off the simplex");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("multinomial_reads: point off the simplex");
    // conditional-binomial multinomial sampling
    std::uint64_t rem = R;
    double prest = 1.0;
    Point counts(d, 0.0);
    for (std::size_t c = 0; c + 1 < d && rem > 0; ++c) {
      const double p = std::clamp(std::max(0.0, v[c]) / std::max(prest, 1e-300), 0.0, 1.0);
      std::binomial_distribution<std::uint64_t> bin(rem, p);
      const std::uint64_t k = bin(rng);
      counts[c] = static_cast<double>(k);
      rem -= k;
      prest -= std::max(0.0, v[c]);
    }
    counts[d - 1] = static_cast<double>(rem);
    for (std::size_t c = 0; c < d; ++c) out.support[i][c] = counts[c] / static_cast<double>(R);
  }
  return out;
}

double mmd_gaussian(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double bandwidth) {
  check_pair(mu, nu);
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd: bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto kernel_sum = [&](const DiscreteMeasure& p, const DiscreteMeasure& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < q.size(); ++j)
        s += p.weights[i] * q.weights[j] * std::exp(-sq_euclid(p.support[i], q.support[j]) * inv);
    return s;
  };
  const double m2 = kernel_sum(mu, mu) + kernel_sum(nu, nu) - 2.0 * kernel_sum(mu, nu);
  return std::sqrt(std::max(0.0, m2));
}

}  // namespace ppcurve::ot
