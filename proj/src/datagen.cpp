#include "ppcurve/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ppcurve::datagen {

namespace {

std::vector<double> draw_times(std::size_t N, double t_max, std::mt19937_64& rng,
                               const GenOptions& opts) {
  std::vector<double> t(N);
  if (opts.grid_times) {
    for (std::size_t i = 0; i < N; ++i)
      t[i] = t_max * static_cast<double>(i) / static_cast<double>(N - 1);
  } else {
    std::uniform_real_distribution<double> uni(0.0, t_max);
    for (double& x : t) x = uni(rng);
  }
  return t;
}

// skeleton point of the branching measure at time t; branch in {0,1}
Point dataset1_skeleton(double t, int branch) {
  if (t <= 1.0) return {0.0, 1.0 - t};
  const double s = (t - 1.0) / std::sqrt(2.0);
  return branch == 0 ? Point{-s, -s} : Point{s, -s};
}

Point dataset2_skeleton(double t, int branch) {
  if (t <= 1.0) return {0.0, 1.0 - t};
  if (t <= 1.1) {
    const double s = (t - 1.0) / 0.1;
    return {1.5 * s, 0.0};
  }
  const double s = t - 1.1;
  return branch == 0 ? Point{1.5 - s, s} : Point{1.5 + s, s};
}

template <typename Skeleton>
Dataset gen_measure_dataset(const std::string& model, Skeleton skeleton, double t_max,
                            bool has_branch_from, double branch_from, std::size_t N,
                            std::size_t atoms_total, double sigma, std::uint64_t seed,
                            const GenOptions& opts) {
  if (N < 2) throw std::invalid_argument("need at least two batches");
  if (atoms_total < N) throw std::invalid_argument("need at least one atom per batch");
  const std::size_t M = atoms_total / N;

  std::mt19937_64 rng(seed);
  std::vector<double> times = draw_times(N, t_max, rng, opts);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<MetricElement> batches;
  batches.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<Point> atoms;
    atoms.reserve(M);
    for (std::size_t m = 0; m < M; ++m) {
      const int branch = (has_branch_from && times[n] > branch_from && coin(rng)) ? 1 : 0;
      Point p = skeleton(times[n], branch);
      for (double& x : p) x += sigma * gauss(rng);
      atoms.push_back(std::move(p));
    }
    batches.emplace_back(ot::DiscreteMeasure::uniform(std::move(atoms)));
  }

  // shuffle batch order so the file order carries no time information
  std::vector<std::size_t> perm(N);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<MetricElement> shuffled;
  std::vector<double> shuffled_times(N);
  shuffled.reserve(N);
  for (std::size_t i = 0; i < N; ++i) {
    shuffled.push_back(std::move(batches[perm[i]]));
    shuffled_times[i] = times[perm[i]];
  }
  return Dataset(std::move(shuffled), std::move(shuffled_times),
                 Provenance{model, seed, N, M, sigma, 0});
}

}  // namespace

Dataset gen_dataset1(std::size_t N, std::size_t atoms_total, double sigma, std::uint64_t seed,
                     const GenOptions& opts) {
  return gen_measure_dataset("dataset1", dataset1_skeleton, 1.0 + std::sqrt(2.0), true, 1.0, N,
                             atoms_total, sigma, seed, opts);
}

Dataset gen_dataset2(std::size_t N, std::size_t atoms_total, double sigma, std::uint64_t seed,
                     const GenOptions& opts) {
  return gen_measure_dataset("dataset2", dataset2_skeleton, 2.1, true, 1.1, N, atoms_total, sigma,
                             seed, opts);
}

Dataset gen_euclidean_line(std::size_t N, double noise, std::uint64_t seed,
                           const GenOptions& opts) {
  if (N < 2) throw std::invalid_argument("need at least two batches");
  std::mt19937_64 rng(seed);
  std::vector<double> times = draw_times(N, 1.0, rng, opts);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<MetricElement> batches;
  batches.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    Point p{times[n], 0.0};
    if (noise > 0.0)
      for (double& x : p) x += noise * gauss(rng);
    batches.emplace_back(EuclideanPoint{std::move(p)});
  }
  return Dataset(std::move(batches), std::move(times),
                 Provenance{"euclidean_line", seed, N, 1, noise, 0});
}

bool on_simplex(const Dataset& ds, double tol) {
  for (const auto& b : ds.batches) {
    if (is_euclidean(b)) return false;
    const auto& mu = std::get<ot::DiscreteMeasure>(b);
    for (const auto& p : mu.support) {
      double s = 0.0;
      for (double x : p) {
        if (x < -tol) return false;
        s += x;
      }
      if (std::abs(s - 1.0) > tol) return false;
    }
  }
  return true;
}

Dataset simplex_embed(const Dataset& ds) {
  double lo = 0.0, hi_sum = 0.0;
  std::size_t d = 0;
  for (const auto& b : ds.batches) {
    const auto& mu = std::get<ot::DiscreteMeasure>(b);
    d = mu.dim();
    for (const auto& p : mu.support)
      for (double x : p) lo = std::min(lo, x);
  }
  const double shift = -lo + 0.1;  // keep every coordinate strictly positive
  for (const auto& b : ds.batches) {
    const auto& mu = std::get<ot::DiscreteMeasure>(b);
    for (const auto& p : mu.support) {
      double s = 0.0;
      for (double x : p) s += x + shift;
      hi_sum = std::max(hi_sum, s);
    }
  }
  const double scale = hi_sum + 0.1;  // slack coordinate stays positive

  std::vector<MetricElement> out;
  out.reserve(ds.size());
  for (const auto& b : ds.batches) {
    const auto& mu = std::get<ot::DiscreteMeasure>(b);
    ot::DiscreteMeasure em;
    em.weights = mu.weights;
    for (const auto& p : mu.support) {
      Point q(d + 1);
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        q[i] = (p[i] + shift) / scale;
        s += q[i];
      }
      q[d] = 1.0 - s;
      em.support.push_back(std::move(q));
    }
    out.emplace_back(std::move(em));
  }
  Provenance prov = ds.prov;
  prov.model += "+simplex";
  return Dataset(std::move(out), ds.eval_true_times(), std::move(prov));
}

Dataset apply_reads(const Dataset& ds_in, std::uint64_t R, std::uint64_t seed,
                    bool embed_if_needed) {
  const Dataset* src = &ds_in;
  Dataset embedded;
  if (!on_simplex(ds_in)) {
    if (!embed_if_needed)
      throw std::invalid_argument("apply_reads: batches are not simplex-supported");
    embedded = simplex_embed(ds_in);
    src = &embedded;
  }
  std::mt19937_64 rng(seed);
  std::vector<MetricElement> out;
  out.reserve(src->size());
  for (const auto& b : src->batches)
    out.emplace_back(ot::multinomial_reads(std::get<ot::DiscreteMeasure>(b), R, rng));
  Provenance prov = src->prov;
  prov.reads = R;
  return Dataset(std::move(out), src->eval_true_times(), std::move(prov));
}

}  // namespace ppcurve::datagen
