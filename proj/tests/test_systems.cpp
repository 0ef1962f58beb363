#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qp/systems.hpp"

using qp::Vec;

namespace {
const qp::AnalyticBenchmark bench = qp::make_double_well_benchmark();
}

TEST_CASE("drift closed form at pinned points") {
  Vec b = bench.system.drift_at({-0.5, 0.0});
  CHECK(b[0] == doctest::Approx(-0.375).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(-1.125).epsilon(1e-15));
  // fixed points
  for (double x1 : {-1.0, 0.0, 1.0}) {
    Vec f = bench.system.drift_at({x1, 0.0});
    CHECK(std::abs(f[0]) < 1e-14);
    CHECK(std::abs(f[1]) < 1e-14);
  }
}

TEST_CASE("jacobian matches finite differences of the drift") {
  const double h = 1e-6;
  for (Vec x : {Vec{-0.7, 0.3}, Vec{-1.2, -0.4}, Vec{0.2, 0.1}}) {
    qp::Mat j = bench.system.jacobian_at(x);
    for (std::size_t c = 0; c < 2; ++c) {
      Vec xp = x, xm = x;
      xp[c] += h;
      xm[c] -= h;
      Vec fp = bench.system.drift_at(xp), fm = bench.system.drift_at(xm);
      for (std::size_t r = 0; r < 2; ++r)
        CHECK(j(r, c) == doctest::Approx((fp[r] - fm[r]) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("fixed point catalog and classification") {
  const auto& fps = bench.system.fixed_points;
  REQUIRE(fps.size() == 3);
  int stable = 0, saddle = 0;
  for (const auto& fp : fps) {
    if (fp.kind == qp::FixedPointKind::stable) ++stable;
    if (fp.kind == qp::FixedPointKind::saddle) ++saddle;
    if (std::abs(fp.location[0]) < 1e-12) {
      // origin: grad b = diag(1, -1/2), one positive eigenvalue
      CHECK(fp.kind == qp::FixedPointKind::saddle);
      CHECK(fp.eigenvalues.size() == 2);
    }
    if (std::abs(fp.location[0] + 1.0) < 1e-12) {
      CHECK(fp.kind == qp::FixedPointKind::stable);
      // eigenvalues of [[-2,3],[-12,-1/2]] are (-5 +/- 9 sqrt(7) i)/4
      for (const auto& ev : fp.eigenvalues) {
        CHECK(ev.real() == doctest::Approx(-1.25).epsilon(1e-9));
        CHECK(std::abs(ev.imag()) ==
              doctest::Approx(9.0 * std::sqrt(7.0) / 4.0).epsilon(1e-9));
      }
    }
  }
  CHECK(stable == 2);
  CHECK(saddle == 1);
}

TEST_CASE("decomposition: b = -1/2 grad V + l with grad V orthogonal to l") {
  for (Vec x : {Vec{-0.5, 0.0}, Vec{-1.3, 0.6}, Vec{0.4, -0.7}, Vec{-0.9, 0.1}}) {
    Vec b = bench.system.drift_at(x);
    Vec g = bench.grad_quasipotential(x);
    Vec l = bench.rotational(x);
    CHECK(std::abs(b[0] + 0.5 * g[0] - l[0]) < 1e-12);
    CHECK(std::abs(b[1] + 0.5 * g[1] - l[1]) < 1e-12);
    CHECK(std::abs(g[0] * l[0] + g[1] * l[1]) < 1e-12);
  }
}

TEST_CASE("quasipotential shifted to vanish at xbar, barrier values") {
  CHECK(std::abs(bench.quasipotential({-1.0, 0.0})) < 1e-15);
  CHECK(bench.quasipotential({-0.5, 0.0}) == doctest::Approx(0.28125).epsilon(1e-14));
  CHECK(bench.quasipotential({0.0, 0.0}) == doctest::Approx(0.5).epsilon(1e-14));
  // div l = -2 alpha beta x2 = -3 x2
  CHECK(bench.div_rotational({-0.6, 0.4}) == doctest::Approx(-1.2).epsilon(1e-14));
  CHECK(bench.div_rotational({-1.0, 0.0}) == 0.0);
}

TEST_CASE("find_fixed_point refines a coarse seed") {
  auto fp = qp::find_fixed_point(bench.system, {-1.2, 0.3});
  REQUIRE(fp.has_value());
  CHECK((*fp)[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(std::abs((*fp)[1]) < 1e-9);
}

TEST_CASE("registry exposes the benchmark system") {
  auto& reg = qp::SystemRegistry::instance();
  CHECK(reg.contains("doublewell-rot"));
  qp::DriftSystem sys = reg.make("doublewell-rot");
  CHECK(sys.dim == 2);
  CHECK_THROWS(reg.make("no-such-system"));
}
