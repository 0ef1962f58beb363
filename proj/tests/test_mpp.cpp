#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qp/mpp.hpp"

using qp::Vec;

namespace {

const qp::AnalyticBenchmark bench = qp::make_double_well_benchmark();
const qp::PotentialField field = qp::PotentialField::analytic(bench);
const Vec xbar = {-1.0, 0.0};

qp::BoundaryCurve vertical_line(double x1, double lo, double hi) {
  qp::BoundaryCurve b;
  b.s_lo = lo;
  b.s_hi = hi;
  b.curve = [x1](double s) { return Vec{x1, s}; };
  b.normal = [](const Vec&) { return Vec{1.0, 0.0}; };
  return b;
}

const qp::FixedPoint& saddle_of(const qp::DriftSystem& sys) {
  for (const auto& fp : sys.fixed_points)
    if (fp.kind == qp::FixedPointKind::saddle) return fp;
  throw std::runtime_error("no saddle registered");
}

double dist(const Vec& a, const Vec& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

} // namespace

TEST_CASE("exit point on the x1 = -0.5 boundary is (-0.5, 0)") {
  auto r = qp::exit_point_on_boundary(field, vertical_line(-0.5, -0.8, 0.8));
  CHECK(std::abs(r.param) < 1e-7);
  CHECK(r.point[0] == doctest::Approx(-0.5));
  CHECK(std::abs(r.point[1]) < 1e-7);
  CHECK_FALSE(r.at_interval_endpoint);
}

TEST_CASE("exit point pinned to an interval endpoint is flagged") {
  // V(-0.5, x2) increases with |x2|; a boundary living entirely at x2 >= 0.3
  // has its minimum at the lower endpoint.
  auto r = qp::exit_point_on_boundary(field, vertical_line(-0.5, 0.3, 0.8));
  CHECK(r.at_interval_endpoint);
  CHECK(r.point[1] == doctest::Approx(0.3));
}

TEST_CASE("saddle seed offsets along the unstable direction toward xbar") {
  Vec seed = qp::saddle_seed(bench.system, saddle_of(bench.system), 0.05, xbar);
  CHECK(seed[0] == doctest::Approx(-0.05).epsilon(1e-10));
  CHECK(std::abs(seed[1]) < 1e-10);

  // A stable point has no unstable direction.
  for (const auto& fp : bench.system.fixed_points)
    if (fp.kind == qp::FixedPointKind::stable)
      CHECK_THROWS(qp::saddle_seed(bench.system, fp, 0.05, xbar));
}

TEST_CASE("case A path: converged, unit speed, correct endpoints") {
  qp::MppSettings s;
  auto path = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, s);
  REQUIRE(path.status == qp::PathStatus::converged);
  REQUIRE(path.points.size() >= 3);
  CHECK(dist(path.points.front(), xbar) <= s.delta2 + 1e-12);
  CHECK(dist(path.points.back(), {-0.5, 0.0}) < 1e-12);
  // arc-length parameterization: node spacing equals the sigma increments
  for (std::size_t i = 1; i + 1 < path.points.size(); i += 97) {
    double step = path.sigma[i + 1] - path.sigma[i];
    CHECK(dist(path.points[i], path.points[i + 1]) ==
          doctest::Approx(step).epsilon(1e-4));
  }
  // sigma starts at zero and increases strictly
  CHECK(path.sigma.front() == 0.0);
  for (std::size_t i = 1; i < path.sigma.size(); ++i)
    CHECK(path.sigma[i] > path.sigma[i - 1]);
}

TEST_CASE("quasipotential is monotone along the path") {
  qp::MppSettings s;
  auto path = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, s);
  double prev = field.value(path.points.front());
  for (std::size_t i = 20; i < path.points.size(); i += 20) {
    double v = field.value(path.points[i]);
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
}

TEST_CASE("divergence integral reproduces the frozen quadrature values") {
  qp::MppSettings s;
  // Case A, boundary exit point (-0.5, 0): value from an independent RK4 +
  // trapezoid implementation of the same quantity.
  auto path_a = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, s);
  double ia = qp::divergence_integral(field, bench.system, path_a, true, xbar);
  CHECK(ia == doctest::Approx(-0.4780066).epsilon(2e-4));

  // Case B, seeded at distance 0.05 from the saddle.
  Vec seed = qp::saddle_seed(bench.system, saddle_of(bench.system), 0.05, xbar);
  auto path_b = qp::integrate_mpp(field, bench.system, seed, xbar, s);
  REQUIRE(path_b.status == qp::PathStatus::converged);
  double ib = qp::divergence_integral(field, bench.system, path_b, true, xbar,
                                      Vec{0.0, 0.0});
  CHECK(ib == doctest::Approx(-1.0223034).epsilon(2e-4));

  // For the analytic benchmark div l vanishes at both fixed points, so the
  // baseline subtraction must be a no-op.
  double ib_raw = qp::divergence_integral(field, bench.system, path_b, false);
  CHECK(ib == doctest::Approx(ib_raw).epsilon(1e-12));
}

TEST_CASE("step halving changes the integral only at quadrature order") {
  qp::MppSettings coarse, fine;
  coarse.sigma_step = 2e-3;
  fine.sigma_step = 1e-3;
  auto pa = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, coarse);
  auto pb = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, fine);
  double ia = qp::divergence_integral(field, bench.system, pa, true, xbar);
  double ib = qp::divergence_integral(field, bench.system, pb, true, xbar);
  CHECK(std::abs(ia - ib) < 5e-4);
}

TEST_CASE("divergence integral is additive over concatenation") {
  qp::MppSettings s;
  auto path = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, s);
  std::size_t cut = path.points.size() / 2;
  qp::PathResult head, tail;
  head.points.assign(path.points.begin(), path.points.begin() + cut + 1);
  head.sigma.assign(path.sigma.begin(), path.sigma.begin() + cut + 1);
  tail.points.assign(path.points.begin() + cut, path.points.end());
  tail.sigma.assign(path.sigma.begin() + cut, path.sigma.end());
  double whole = qp::divergence_integral(field, bench.system, path, false);
  double parts = qp::divergence_integral(field, bench.system, head, false) +
                 qp::divergence_integral(field, bench.system, tail, false);
  CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
}

TEST_CASE("max_length cap is reported") {
  qp::MppSettings s;
  s.max_length = 0.5; // far too short to reach the xbar ball
  auto path = qp::integrate_mpp(field, bench.system, {-0.5, 0.0}, xbar, s);
  CHECK(path.status == qp::PathStatus::max_length);
}

TEST_CASE("starting inside the delta2 ball converges immediately") {
  qp::MppSettings s;
  auto path = qp::integrate_mpp(field, bench.system, {-1.0, 0.005}, xbar, s);
  CHECK(path.status == qp::PathStatus::converged);
}
