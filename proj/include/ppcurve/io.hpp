#ifndef PPCURVE_IO_HPP
#define PPCURVE_IO_HPP

#include <filesystem>
#include <string>

#include "ppcurve/datagen.hpp"
#include "ppcurve/fit.hpp"
#include "ppcurve/seriation.hpp"

namespace ppcurve::io {

std::string format_double(double v);

/// Dataset directory: atoms.csv, truth.csv (written separately so truth can be
/// withheld), provenance.json.
void write_dataset(const std::filesystem::path& dir, const datagen::Dataset& ds);
datagen::Dataset read_dataset(const std::filesystem::path& dir, bool with_truth = true);

void write_matrix(const std::filesystem::path& file, const seriation::DistanceMatrix& W);
seriation::DistanceMatrix read_matrix(const std::filesystem::path& file);

void write_knots(const std::filesystem::path& file, const KnotCurve& curve);
KnotCurve read_knots(const std::filesystem::path& file, bool euclidean);

void write_trace(const std::filesystem::path& file, const fit::FitTrace& trace);

void write_pseudotimes(const std::filesystem::path& file, const std::vector<double>& tau,
                       const std::vector<std::size_t>& permutation);

std::uint64_t file_hash(const std::filesystem::path& file);

}  // namespace ppcurve::io

#endif
