#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qp/linalg.hpp"

// Feed-forward (Vhat, l) network with tanh hidden layers and identity output,
// its input Jacobian, and exact parameter gradients of any scalar built from
// outputs and input Jacobians. The loss depends on the Jacobian, so the
// backward pass differentiates through the Jacobian propagation as well
// (second-order structure); there is no general tape beyond this contract.

namespace qp {

struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden; // neuron count per hidden layer
  std::size_t output_dim = 0;

  // [input_dim, hidden..., output_dim]
  std::vector<std::size_t> widths() const;
  std::size_t layer_count() const { return hidden.size() + 1; }
  bool operator==(const Architecture&) const = default;
};

struct NetworkParams {
  Architecture arch;
  std::uint64_t seed = 0;
  std::uint64_t trained_epochs = 0;
  Vec theta; // all weights then biases, layer by layer: W0, b0, W1, b1, ...

  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  static std::size_t param_count(const Architecture& arch);
};

struct EvalWithJacobian {
  Vec outputs;  // length output_dim
  Mat jacobian; // output_dim x input_dim
};

// Uniform(-a, a) weights with a = 1/sqrt(fan_in), zero biases; deterministic
// in the seed.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

Vec forward(const NetworkParams& params, const Vec& x);
EvalWithJacobian forward_with_input_jacobian(const NetworkParams& params,
                                             const Vec& x);

// Per-sample adjoint: fill d_outputs (length output_dim) and d_jacobian
// (output_dim x input_dim) with the partials of the scalar loss at this
// sample; return the sample's loss contribution.
using SampleAdjointFn = std::function<double(
    std::size_t index, const EvalWithJacobian& eval, Vec& d_outputs,
    Mat& d_jacobian)>;

struct BatchGradient {
  double loss = 0.0;
  Vec grad; // aligned with NetworkParams::theta
};

// Exact gradient of sum_i loss_i over the batch; per-sample contributions are
// reduced in index order regardless of worker count.
BatchGradient parameter_gradient(const NetworkParams& params,
                                 const std::vector<Vec>& batch,
                                 const SampleAdjointFn& adjoint,
                                 std::size_t workers = 1);

void save_checkpoint(const NetworkParams& params, const std::string& path);
NetworkParams load_checkpoint(const std::string& path);

} // namespace qp
