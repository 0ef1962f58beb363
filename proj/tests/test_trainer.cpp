#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qp/trainer.hpp"

using qp::Vec;

namespace {
const qp::AnalyticBenchmark bench = qp::make_double_well_benchmark();
}

TEST_CASE("training set sampling: bounds, count, determinism") {
  qp::TrainConfig cfg;
  cfg.sample_count = 500;
  cfg.seed = 4;
  auto pts = qp::sample_training_set(cfg);
  REQUIRE(pts.size() == 500);
  for (const auto& p : pts) {
    CHECK(p[0] >= cfg.region.lo[0]);
    CHECK(p[0] <= cfg.region.hi[0]);
    CHECK(p[1] >= cfg.region.lo[1]);
    CHECK(p[1] <= cfg.region.hi[1]);
  }
  CHECK(pts == qp::sample_training_set(cfg));
  cfg.seed = 5;
  CHECK(pts != qp::sample_training_set(cfg));
}

TEST_CASE("loss formulas on hand-computed values") {
  // One point with grad V = (1,0), l = (0,2), b = (3,4):
  //   residual = b + grad V / 2 - l = (3.5, 2),  L_dyn = 3.5^2 + 2^2 = 16.25
  //   <grad V, l> = 0 exactly, so L_orth = 0
  std::vector<qp::FieldPointValues> vals(1);
  vals[0].grad_v = {1.0, 0.0};
  vals[0].l = {0.0, 2.0};
  vals[0].b = {3.0, 4.0};
  auto lc = qp::loss_from_values(vals, 0.25, 0.001);
  CHECK(lc.l_dyn == doctest::Approx(16.25).epsilon(1e-15));
  CHECK(lc.l_orth == doctest::Approx(0.0));
  CHECK(lc.l_zero == doctest::Approx(0.0625).epsilon(1e-15)); // 0.25^2
  CHECK(lc.total(1.0, 0.1) == doctest::Approx(16.25 + 0.00625).epsilon(1e-14));

  // Non-orthogonal pair: grad V = (1,1), l = (1,0), b = (0,0):
  //   <g,l>^2 / (|g|^2 |l|^2 + delta) = 1 / (2 + delta)
  vals[0].grad_v = {1.0, 1.0};
  vals[0].l = {1.0, 0.0};
  vals[0].b = {0.0, 0.0};
  lc = qp::loss_from_values(vals, 0.0, 0.5);
  CHECK(lc.l_orth == doctest::Approx(1.0 / 2.5).epsilon(1e-15));
  // residual = (1/2 + ... ) : b + g/2 - l = (-0.5, 0.5)
  CHECK(lc.l_dyn == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("loss_from_values averages over the batch") {
  std::vector<qp::FieldPointValues> vals(2);
  for (auto& v : vals) {
    v.grad_v = {2.0, 0.0};
    v.l = {0.0, 0.0};
    v.b = {0.0, 0.0};
  }
  vals[1].b = {2.0, 0.0}; // residuals (1,0) and (3,0)
  auto lc = qp::loss_from_values(vals, 0.0, 0.001);
  CHECK(lc.l_dyn == doctest::Approx((1.0 + 9.0) / 2.0).epsilon(1e-15));
}

TEST_CASE("adam step matches the closed form") {
  // Single parameter, g = 3, lr = 0.1, first step:
  //   m_hat = g, v_hat = g^2, delta = lr * g / (|g| + eps) ~ lr
  Vec theta = {1.0};
  qp::AdamState adam(1);
  adam.update(theta, {3.0}, 0.1);
  double expected = 1.0 - 0.1 * 3.0 / (std::sqrt(9.0) + 1e-8);
  CHECK(theta[0] == doctest::Approx(expected).epsilon(1e-12));

  // Second step with g = -1: closed-form bias-corrected moments.
  double m = 0.9 * (0.1 * 3.0) / 0.1; // m after step1 = 0.3; recompute below
  (void)m;
  double m2 = 0.9 * 0.3 + 0.1 * (-1.0);
  double v2 = 0.999 * (0.001 * 9.0) / 0.001; // v after step1 = 0.009
  v2 = 0.999 * 0.009 + 0.001 * 1.0;
  double mhat = m2 / (1.0 - 0.9 * 0.9);
  double vhat = v2 / (1.0 - 0.999 * 0.999);
  double expected2 = expected - 0.1 * mhat / (std::sqrt(vhat) + 1e-8);
  adam.update(theta, {-1.0}, 0.1);
  CHECK(theta[0] == doctest::Approx(expected2).epsilon(1e-12));
}

TEST_CASE("short training run reduces the loss and is reproducible") {
  qp::TrainConfig cfg;
  cfg.sample_count = 200;
  cfg.epochs = 150;
  cfg.seed = 2;
  qp::Architecture arch{2, {16, 16}, 3};
  auto r1 = qp::train(bench.system, arch, cfg);
  REQUIRE(r1.history.epochs.size() == 150);
  CHECK_FALSE(r1.history.diverged);
  double first = r1.history.epochs.front().total;
  double last = r1.history.epochs.back().total;
  CHECK(last < first);
  CHECK(r1.params.trained_epochs == 150);

  auto r2 = qp::train(bench.system, arch, cfg);
  CHECK(r1.params.theta == r2.params.theta);

  // Worker count must not change the result either.
  cfg.workers = 4;
  auto r4 = qp::train(bench.system, arch, cfg);
  CHECK(r1.params.theta == r4.params.theta);
}

TEST_CASE("resume continues the epoch count") {
  qp::TrainConfig cfg;
  cfg.sample_count = 100;
  cfg.epochs = 40;
  cfg.seed = 6;
  qp::Architecture arch{2, {8}, 3};
  auto first = qp::train(bench.system, arch, cfg);
  cfg.epochs = 25;
  auto second = qp::resume_train(bench.system, first.params, cfg);
  CHECK(second.params.trained_epochs == 65);
  CHECK(second.history.epochs.size() == 25);
}

TEST_CASE("approximation errors vanish for the exact decomposition") {
  // Feed the analytic values through the metric formulas by training nothing:
  // a fresh network must show large errors, the formula itself is exercised
  // against the exact field in test_field via the learned-vs-analytic route.
  qp::Architecture arch{2, {8}, 3};
  auto params = qp::init_network(arch, 1);
  qp::Box region{{-1.5, -0.8}, {0.0, 0.8}};
  auto err = qp::approximation_errors(params, bench, region, 21, 17);
  CHECK(err.grid_nx == 21);
  CHECK(err.grid_ny == 17);
  CHECK(err.e_v > 0.05); // untrained network is nowhere near the target
  CHECK(std::isfinite(err.e_v));
  CHECK(std::isfinite(err.e_l));
}
