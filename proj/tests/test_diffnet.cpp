#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "qp/diffnet.hpp"
#include "qp/philox.hpp"

using qp::Architecture;
using qp::Mat;
using qp::NetworkParams;
using qp::Vec;

namespace {

Vec random_point(qp::PhiloxStream& rng, std::size_t n) {
  Vec x(n);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

// Central finite difference of a scalar function of theta.
double fd_param(const NetworkParams& params, std::size_t i,
                const std::function<double(const NetworkParams&)>& f,
                double h) {
  NetworkParams p = params, m = params;
  p.theta[i] += h;
  m.theta[i] -= h;
  return (f(p) - f(m)) / (2 * h);
}

} // namespace

TEST_CASE("init is deterministic in the seed and respects the fan-in bound") {
  Architecture arch{2, {8, 8}, 3};
  auto a = qp::init_network(arch, 11);
  auto b = qp::init_network(arch, 11);
  auto c = qp::init_network(arch, 12);
  CHECK(a.theta == b.theta);
  CHECK(a.theta != c.theta);
  CHECK(a.theta.size() == NetworkParams::param_count(arch));
  double bound0 = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < 2 * 8; ++i) {
    CHECK(std::abs(a.theta[a.weight_offset(0) + i]) <= bound0);
  }
  // biases start at zero
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(a.theta[a.bias_offset(0) + i] == 0.0);
}

TEST_CASE("input jacobian matches central finite differences") {
  qp::PhiloxStream rng(5, 0);
  for (auto arch : {Architecture{2, {10}, 3}, Architecture{3, {7, 5}, 2},
                    Architecture{2, {20, 20, 20}, 3}}) {
    auto params = qp::init_network(arch, 21);
    for (int rep = 0; rep < 3; ++rep) {
      Vec x = random_point(rng, arch.input_dim);
      auto eval = qp::forward_with_input_jacobian(params, x);
      CHECK(eval.outputs == qp::forward(params, x));
      const double h = 1e-6;
      for (std::size_t c = 0; c < arch.input_dim; ++c) {
        Vec xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        Vec fp = qp::forward(params, xp), fm = qp::forward(params, xm);
        for (std::size_t r = 0; r < arch.output_dim; ++r) {
          double fd = (fp[r] - fm[r]) / (2 * h);
          double scale = std::max(1.0, std::abs(fd));
          CHECK(std::abs(eval.jacobian(r, c) - fd) / scale < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("parameter gradient of a jacobian-dependent scalar matches FD") {
  qp::PhiloxStream rng(77, 1);
  for (auto arch : {Architecture{2, {6}, 3}, Architecture{2, {8, 6}, 3}}) {
    auto params = qp::init_network(arch, 3);
    std::vector<Vec> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(random_point(rng, 2));

    // Scalar mixing outputs and jacobian entries:
    //   sum_i ( sum_r out_r^2 + sum_rc (J_rc + 0.3 r - 0.1 c)^2 )
    auto adjoint = [](std::size_t, const qp::EvalWithJacobian& eval,
                      Vec& d_out, Mat& d_jac) {
      double loss = 0.0;
      for (std::size_t r = 0; r < eval.outputs.size(); ++r) {
        loss += eval.outputs[r] * eval.outputs[r];
        d_out[r] = 2.0 * eval.outputs[r];
      }
      for (std::size_t r = 0; r < eval.jacobian.rows; ++r)
        for (std::size_t c = 0; c < eval.jacobian.cols; ++c) {
          double t = eval.jacobian(r, c) + 0.3 * double(r) - 0.1 * double(c);
          loss += t * t;
          d_jac(r, c) = 2.0 * t;
        }
      return loss;
    };

    auto result = qp::parameter_gradient(params, batch, adjoint);
    auto loss_of = [&](const NetworkParams& q) {
      Vec dummy_out(arch.output_dim);
      Mat dummy_jac(arch.output_dim, arch.input_dim);
      double total = 0.0;
      for (std::size_t i = 0; i < batch.size(); ++i)
        total += adjoint(i, qp::forward_with_input_jacobian(q, batch[i]),
                         dummy_out, dummy_jac);
      return total;
    };
    CHECK(result.loss == doctest::Approx(loss_of(params)).epsilon(1e-12));

    // Spot-check a spread of parameters across all layers.
    for (std::size_t i = 0; i < params.theta.size();
         i += std::max<std::size_t>(1, params.theta.size() / 23)) {
      double fd = fd_param(params, i, loss_of, 1e-5);
      double scale = std::max(1.0, std::abs(fd));
      CHECK(std::abs(result.grad[i] - fd) / scale < 1e-5);
    }
  }
}

TEST_CASE("batch gradient is bit-identical across worker counts") {
  Architecture arch{2, {16, 16}, 3};
  auto params = qp::init_network(arch, 9);
  qp::PhiloxStream rng(1, 2);
  std::vector<Vec> batch;
  for (int i = 0; i < 700; ++i) batch.push_back(random_point(rng, 2));
  auto adjoint = [](std::size_t, const qp::EvalWithJacobian& eval, Vec& d_out,
                    Mat& d_jac) {
    double loss = 0.0;
    for (std::size_t r = 0; r < eval.outputs.size(); ++r) {
      loss += std::sin(eval.outputs[r]);
      d_out[r] = std::cos(eval.outputs[r]);
    }
    for (std::size_t r = 0; r < d_jac.rows; ++r)
      for (std::size_t c = 0; c < d_jac.cols; ++c) {
        loss += 0.5 * eval.jacobian(r, c) * eval.jacobian(r, c);
        d_jac(r, c) = eval.jacobian(r, c);
      }
    return loss;
  };
  auto g1 = qp::parameter_gradient(params, batch, adjoint, 1);
  auto g3 = qp::parameter_gradient(params, batch, adjoint, 3);
  auto g8 = qp::parameter_gradient(params, batch, adjoint, 8);
  CHECK(g1.loss == g3.loss);
  CHECK(g1.loss == g8.loss);
  CHECK(g1.grad == g3.grad);
  CHECK(g1.grad == g8.grad);
}

TEST_CASE("checkpoint round-trips bit-for-bit and validates on load") {
  namespace fs = std::filesystem;
  Architecture arch{2, {12, 12}, 3};
  auto params = qp::init_network(arch, 31);
  params.trained_epochs = 777;
  fs::path file = fs::temp_directory_path() / "qp_test_ckpt.qpck";
  qp::save_checkpoint(params, file.string());
  auto loaded = qp::load_checkpoint(file.string());
  CHECK(loaded.arch == params.arch);
  CHECK(loaded.seed == params.seed);
  CHECK(loaded.trained_epochs == 777);
  CHECK(loaded.theta == params.theta);

  // Corrupt the magic and expect a load failure.
  {
    std::FILE* f = std::fopen(file.string().c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);
    std::fclose(f);
  }
  CHECK_THROWS(qp::load_checkpoint(file.string()));
  fs::remove(file);
  CHECK_THROWS(qp::load_checkpoint(file.string()));
}
