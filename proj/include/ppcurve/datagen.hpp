#ifndef PPCURVE_DATAGEN_HPP
#define PPCURVE_DATAGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ppcurve/metric.hpp"

namespace ppcurve::datagen {

struct Provenance {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t n = 0;      // batches
  std::size_t m = 0;      // atoms per batch
  double sigma = 0.0;
  std::uint64_t reads = 0;  // 0 = no read noise applied
};

/// N batches plus hidden true times; the times are only reachable through the
/// evaluation accessor so fitting code cannot touch them by accident.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<MetricElement> batches, std::vector<double> true_times, Provenance prov)
      : batches(std::move(batches)), prov(std::move(prov)), true_times_(std::move(true_times)) {}

  std::vector<MetricElement> batches;
  Provenance prov;

  const std::vector<double>& eval_true_times() const { return true_times_; }
  std::size_t size() const { return batches.size(); }

 private:
  std::vector<double> true_times_;
};

struct GenOptions {
  bool grid_times = false;  // equispaced instead of i.i.d. uniform times
};

/// Branching two-regime curve of Gaussian-convolved discrete measures,
/// time domain [0, 1+sqrt(2)].
Dataset gen_dataset1(std::size_t N, std::size_t atoms_total, double sigma, std::uint64_t seed,
                     const GenOptions& opts = {});

/// Three-regime curve with a fast, poorly sampled middle segment, time
/// domain [0, 2.1].
Dataset gen_dataset2(std::size_t N, std::size_t atoms_total, double sigma, std::uint64_t seed,
                     const GenOptions& opts = {});

/// Euclidean points on the unit segment (t, 0), optional isotropic noise.
Dataset gen_euclidean_line(std::size_t N, double noise, std::uint64_t seed,
                           const GenOptions& opts = {});

/// Maps every atom into the probability simplex in R^{d+1}: shift positive,
/// append slack mass, normalize. Scale is chosen per dataset.
Dataset simplex_embed(const Dataset& ds);

bool on_simplex(const Dataset& ds, double tol = 1e-9);

/// Replaces every atom by its R-read multinomial frequency vector. Batches
/// must already live on the simplex unless embed_if_needed is set.
Dataset apply_reads(const Dataset& ds, std::uint64_t R, std::uint64_t seed,
                    bool embed_if_needed = false);

}  // namespace ppcurve::datagen

#endif
