#include <cmath>
#include "ppcurve/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ppcurve::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  return f;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

}  // namespace

void write_dataset(const fs::path& dir, const datagen::Dataset& ds) {
  fs::create_directories(dir);
  const bool euclid = !ds.batches.empty() && is_euclidean(ds.batches.front());
  const std::size_t d = ds.batches.empty() ? 0 : element_dim(ds.batches.front());

  auto atoms = open_out(dir / "atoms.csv");
  atoms << "batch_id";
  for (std::size_t i = 1; i <= d; ++i) atoms << ",x" << i;
  atoms << ",weight\n";
  for (std::size_t b = 0; b < ds.size(); ++b) {
    auto row = [&](const Point& p, double w) {
      atoms << b;
      for (double x : p) atoms << ',' << format_double(x);
      atoms << ',' << format_double(w) << '\n';
    };
    if (euclid) {
      row(std::get<EuclideanPoint>(ds.batches[b]).x, 1.0);
    } else {
      const auto& mu = std::get<ot::DiscreteMeasure>(ds.batches[b]);
      for (std::size_t i = 0; i < mu.size(); ++i) row(mu.support[i], mu.weights[i]);
    }
  }

  auto truth = open_out(dir / "truth.csv");
  truth << "batch_id,true_time\n";
  const auto& times = ds.eval_true_times();
  for (std::size_t b = 0; b < times.size(); ++b)
    truth << b << ',' << format_double(times[b]) << '\n';

  nlohmann::json j{{"model", ds.prov.model}, {"seed", ds.prov.seed}, {"N", ds.prov.n},
                   {"M", ds.prov.m},         {"sigma", ds.prov.sigma}, {"R", ds.prov.reads}};
  open_out(dir / "provenance.json") << j.dump(2) << '\n';
}

datagen::Dataset read_dataset(const fs::path& dir, bool with_truth) {
  auto atoms = open_in(dir / "atoms.csv");
  std::string line;
  if (!std::getline(atoms, line)) throw IoError("empty atoms.csv");
  const std::size_t d = split(line).size() - 2;

  std::vector<std::vector<Point>> support;
  std::vector<std::vector<double>> weights;
  while (std::getline(atoms, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    const auto b = static_cast<std::size_t>(std::stoull(cells[0]));
    if (b >= support.size()) {
      support.resize(b + 1);
      weights.resize(b + 1);
    }
    Point p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = std::stod(cells[1 + i]);
    support[b].push_back(std::move(p));
    weights[b].push_back(std::stod(cells[1 + d]));
  }

  nlohmann::json j;
  open_in(dir / "provenance.json") >> j;
  datagen::Provenance prov;
  prov.model = j.value("model", "unknown");
  prov.seed = j.value("seed", std::uint64_t{0});
  prov.n = j.value("N", std::size_t{0});
  prov.m = j.value("M", std::size_t{0});
  prov.sigma = j.value("sigma", 0.0);
  prov.reads = j.value("R", std::uint64_t{0});

  const bool euclid = prov.model.rfind("euclidean", 0) == 0;
  std::vector<MetricElement> batches;
  batches.reserve(support.size());
  for (std::size_t b = 0; b < support.size(); ++b) {
    if (euclid) {
      batches.emplace_back(EuclideanPoint{support[b].front()});
    } else {
      ot::DiscreteMeasure mu{support[b], weights[b]};
      double s = 0.0;
      for (double w : mu.weights) s += w;
      // renormalize only when out of tolerance so clean files round-trip bit-exactly
      if (std::abs(s - 1.0) > 1e-9)
        for (double& w : mu.weights) w /= s;
      batches.emplace_back(std::move(mu));
    }
  }

  std::vector<double> times;
  if (with_truth && fs::exists(dir / "truth.csv")) {
    auto truth = open_in(dir / "truth.csv");
    std::getline(truth, line);
    times.assign(batches.size(), 0.0);
    while (std::getline(truth, line)) {
      if (line.empty()) continue;
      auto cells = split(line);
      times[std::stoull(cells[0])] = std::stod(cells[1]);
    }
  }
  return datagen::Dataset(std::move(batches), std::move(times), std::move(prov));
}

void write_matrix(const fs::path& file, const seriation::DistanceMatrix& W) {
  auto f = open_out(file);
  f << "n=" << W.n << ",metric=" << W.metric_tag << '\n';
  for (std::size_t i = 0; i < W.n; ++i) {
    for (std::size_t j = 0; j < W.n; ++j) {
      if (j) f << ',';
      f << format_double(W.at(i, j));
    }
    f << '\n';
  }
}

seriation::DistanceMatrix read_matrix(const fs::path& file) {
  auto f = open_in(file);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty matrix file");
  seriation::DistanceMatrix W;
  for (const auto& kv : split(line)) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    const auto key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "n") W.n = std::stoull(val);
    if (key == "metric") W.metric_tag = val;
  }
  W.values.reserve(W.n * W.n);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    for (const auto& c : split(line)) W.values.push_back(std::stod(c));
  }
  if (W.values.size() != W.n * W.n) throw IoError("matrix size mismatch");
  return W;
}

void write_knots(const fs::path& file, const KnotCurve& curve) {
  auto f = open_out(file);
  const std::size_t d = curve.knots.empty() ? 0 : element_dim(curve.knots.front());
  f << "knot_index";
  for (std::size_t i = 1; i <= d; ++i) f << ",x" << i;
  f << ",weight,pinned\n";
  for (std::size_t k = 0; k < curve.size(); ++k) {
    const int pin = curve.is_pinned(k) ? 1 : 0;
    auto row = [&](const Point& p, double w) {
      f << k;
      for (double x : p) f << ',' << format_double(x);
      f << ',' << format_double(w) << ',' << pin << '\n';
    };
    if (is_euclidean(curve.knots[k])) {
      row(std::get<EuclideanPoint>(curve.knots[k]).x, 1.0);
    } else {
      const auto& mu = std::get<ot::DiscreteMeasure>(curve.knots[k]);
      for (std::size_t i = 0; i < mu.size(); ++i) row(mu.support[i], mu.weights[i]);
    }
  }
}

KnotCurve read_knots(const fs::path& file, bool euclidean) {
  auto f = open_in(file);
  std::string line;
  if (!std::getline(f, line)) throw IoError("empty knots file");
  const std::size_t d = split(line).size() - 3;
  std::vector<std::vector<Point>> support;
  std::vector<std::vector<double>> weights;
  std::vector<char> pinned;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    const auto k = static_cast<std::size_t>(std::stoull(cells[0]));
    if (k >= support.size()) {
      support.resize(k + 1);
      weights.resize(k + 1);
      pinned.resize(k + 1, 0);
    }
    Point p(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = std::stod(cells[1 + i]);
    support[k].push_back(std::move(p));
    weights[k].push_back(std::stod(cells[1 + d]));
    pinned[k] = static_cast<char>(std::stoi(cells[2 + d]));
  }
  KnotCurve curve;
  for (std::size_t k = 0; k < support.size(); ++k) {
    if (euclidean) {
      curve.knots.emplace_back(EuclideanPoint{support[k].front()});
    } else {
      ot::DiscreteMeasure mu{support[k], weights[k]};
      double s = 0.0;
      for (double w : mu.weights) s += w;
      if (std::abs(s - 1.0) > 1e-9)
        for (double& w : mu.weights) w /= s;
      curve.knots.emplace_back(std::move(mu));
    }
    if (pinned[k]) curve.pinned.push_back(k);
  }
  return curve;
}

void write_trace(const fs::path& file, const fit::FitTrace& trace) {
  auto f = open_out(file);
  f << "iter,objective,data_fit,length,knot_movement\n";
  for (std::size_t i = 0; i < trace.entries.size(); ++i) {
    const auto& e = trace.entries[i];
    f << i << ',' << format_double(e.objective) << ',' << format_double(e.data_fit) << ','
      << format_double(e.length) << ',' << format_double(e.knot_movement) << '\n';
  }
}

void write_pseudotimes(const fs::path& file, const std::vector<double>& tau,
                       const std::vector<std::size_t>& permutation) {
  auto f = open_out(file);
  f << "batch_id,pseudotime,rank\n";
  std::vector<std::size_t> rank(tau.size(), 0);
  for (std::size_t r = 0; r < permutation.size(); ++r) rank[permutation[r]] = r;
  for (std::size_t b = 0; b < tau.size(); ++b)
    f << b << ',' << format_double(tau[b]) << ',' << rank[b] << '\n';
}

std::uint64_t file_hash(const fs::path& file) {
  auto f = open_in(file);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return fnv1a(data.data(), data.size());
}

}  // namespace ppcurve::io
