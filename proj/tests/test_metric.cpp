#include <doctest.h>

#include <cmath>
#include <random>

#include "ppcurve/metric.hpp"

using namespace ppcurve;

namespace {

MetricElement ep(std::initializer_list<double> xs) { return EuclideanPoint{Point(xs)}; }

KnotCurve line_curve(std::initializer_list<double> xs) {
  KnotCurve c;
  for (double x : xs) c.knots.push_back(ep({x}));
  return c;
}

double x_of(const MetricElement& e) { return std::get<EuclideanPoint>(e).x[0]; }

}  // namespace

TEST_CASE("euclidean backend basics") {
  EuclideanBackend b;
  CHECK(b.dist(ep({0.0, 0.0}), ep({3.0, 4.0})) == doctest::Approx(5.0));
  CHECK(b.dist(ep({1.0, 2.0}), ep({1.0, 2.0})) == doctest::Approx(0.0));

  auto mid = b.geodesic_point(ep({0.0}), ep({2.0}), 0.5);
  CHECK(x_of(mid) == doctest::Approx(1.0));
  auto q = b.geodesic_point(ep({0.0}), ep({4.0}), 0.25);
  CHECK(x_of(q) == doctest::Approx(1.0));

  MetricElement a = ep({0.0}), c = ep({2.0});
  auto bc = b.barycenter({&a, &c}, {0.75, 0.25});
  CHECK(x_of(bc) == doctest::Approx(0.5));
}

TEST_CASE("backend type and dimension checks") {
  EuclideanBackend b;
  MetricElement p = ep({0.0});
  MetricElement m = ot::DiscreteMeasure::dirac({0.0});
  CHECK_THROWS_AS((void)b.dist(p, m), BackendMismatch);
  CHECK_THROWS_AS((void)b.dist(ep({0.0}), ep({0.0, 1.0})), DimensionMismatch);
}

TEST_CASE("cached_dist agrees with dist and survives clear") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  EuclideanBackend b;
  for (int i = 0; i < 20; ++i) {
    MetricElement u = ep({uni(rng), uni(rng)});
    MetricElement v = ep({uni(rng), uni(rng)});
    const double d = b.dist(u, v);
    CHECK(b.cached_dist(u, v) == doctest::Approx(d).epsilon(1e-15));
    CHECK(b.cached_dist(v, u) == doctest::Approx(d).epsilon(1e-15));  // symmetric key
    b.clear_cache();
    CHECK(b.cached_dist(u, v) == doctest::Approx(d).epsilon(1e-15));
  }
}

TEST_CASE("wasserstein backend dist and geodesic") {
  WassersteinBackend b;
  MetricElement m0 = ot::DiscreteMeasure::dirac({0.0, 0.0});
  MetricElement m1 = ot::DiscreteMeasure::dirac({3.0, 4.0});
  CHECK(b.dist(m0, m1) == doctest::Approx(5.0).epsilon(1e-9));

  auto mid = b.geodesic_point(m0, m1, 0.5);
  const auto& mm = std::get<ot::DiscreteMeasure>(mid);
  CHECK(mm.support[0][0] == doctest::Approx(1.5));
  CHECK(mm.support[0][1] == doctest::Approx(2.0));

  MetricElement d2 = ot::DiscreteMeasure::dirac({2.0, 0.0});
  auto bc = b.barycenter({&m0, &d2}, {0.5, 0.5});
  const auto& bm = std::get<ot::DiscreteMeasure>(bc);
  CHECK(bm.support[0][0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("wasserstein triangle inequality property") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto rand_measure = [&] {
    std::vector<Point> pts(4, Point(2));
    for (auto& p : pts)
      for (double& x : p) x = uni(rng);
    return MetricElement{ot::DiscreteMeasure::uniform(std::move(pts))};
  };
  WassersteinBackend b;
  for (int rep = 0; rep < 10; ++rep) {
    auto x = rand_measure(), y = rand_measure(), z = rand_measure();
    CHECK(b.dist(x, z) <= b.dist(x, y) + b.dist(y, z) + 1e-9);
  }
}

TEST_CASE("discrete length and arcwise distance") {
  EuclideanBackend b;
  auto c = line_curve({0.0, 1.0, 3.0});
  CHECK(discrete_length(b, c) == doctest::Approx(3.0));
  CHECK(arcwise_dist(b, c, 0, 2) == doctest::Approx(3.0));
  CHECK(arcwise_dist(b, c, 2, 0) == doctest::Approx(3.0));  // symmetric
  CHECK(arcwise_dist(b, c, 1, 1) == doctest::Approx(0.0));
  KnotCurve single = line_curve({5.0});
  CHECK(discrete_length(b, single) == doctest::Approx(0.0));
}

TEST_CASE("projection picks nearest knot, lowest index on ties") {
  EuclideanBackend b;
  auto c = line_curve({0.0, 1.0, 2.0});
  auto r = project(b, ep({0.9}), c);
  CHECK(r.knot_index == 1);
  CHECK(r.distance == doctest::Approx(0.1).epsilon(1e-12));

  auto tie = project(b, ep({0.5}), c);  // equidistant from knots 0 and 1
  CHECK(tie.knot_index == 0);

  // brute force comparison
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(-0.5, 2.5);
  for (int i = 0; i < 50; ++i) {
    MetricElement p = ep({uni(rng)});
    auto pr = project(b, p, c);
    for (std::size_t k = 0; k < c.size(); ++k)
      CHECK(pr.distance <= b.dist(p, c.knots[k]) + 1e-12);
  }
}

TEST_CASE("constant speed resample") {
  EuclideanBackend b;
  auto c = line_curve({0.0, 1.0, 3.0});
  auto r = constant_speed_resample(b, c, 4);
  REQUIRE(r.curve.size() == 4);
  CHECK_FALSE(r.degenerate);
  CHECK(x_of(r.curve.knots[0]) == doctest::Approx(0.0));
  CHECK(x_of(r.curve.knots[1]) == doctest::Approx(1.0));
  CHECK(x_of(r.curve.knots[2]) == doctest::Approx(2.0));
  CHECK(x_of(r.curve.knots[3]) == doctest::Approx(3.0));

  // endpoints preserved, segments equal length
  auto r7 = constant_speed_resample(b, c, 7);
  CHECK(x_of(r7.curve.knots[0]) == doctest::Approx(0.0));
  CHECK(x_of(r7.curve.knots[6]) == doctest::Approx(3.0));
  const double seg = b.dist(r7.curve.knots[0], r7.curve.knots[1]);
  for (std::size_t k = 1; k + 1 < r7.curve.size(); ++k)
    CHECK(b.dist(r7.curve.knots[k], r7.curve.knots[k + 1]) == doctest::Approx(seg).epsilon(1e-6));

  // zero-length curve flagged degenerate
  auto z = constant_speed_resample(b, line_curve({1.0, 1.0}), 5);
  CHECK(z.degenerate);
  REQUIRE(z.curve.size() == 5);
  for (const auto& k : z.curve.knots) CHECK(x_of(k) == doctest::Approx(1.0));
}

TEST_CASE("resample preserves length when inserting on-geodesic knots") {
  EuclideanBackend b;
  auto c = line_curve({0.0, 2.0});
  auto r = constant_speed_resample(b, c, 5);
  CHECK(discrete_length(b, r.curve) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("knot curve pin bookkeeping") {
  KnotCurve c = line_curve({0.0, 1.0, 2.0});
  c.pinned = {0, 2};
  c.validate();
  CHECK(c.is_pinned(0));
  CHECK_FALSE(c.is_pinned(1));
  CHECK(c.is_pinned(2));
  KnotCurve bad = line_curve({0.0});
  bad.pinned = {3};
  CHECK_THROWS_AS(bad.validate(), std::out_of_range);
}
