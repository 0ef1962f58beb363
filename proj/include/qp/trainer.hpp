#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qp/diffnet.hpp"
#include "qp/systems.hpp"

namespace qp {

struct Box {
  Vec lo, hi;
};

struct TrainConfig {
  Box region{{-1.5, -0.8}, {0.0, 0.8}};
  std::size_t sample_count = 10000; // N
  double gamma1 = 1.0;
  double gamma2 = 0.1;
  double delta = 0.001; // L_orth denominator guard
  double learning_rate = 0.002;
  std::size_t epochs = 100000;
  std::uint64_t seed = 0;
  Vec xbar = {-1.0, 0.0};
  std::size_t checkpoint_every = 5000;
  std::string run_dir; // empty: no files written
  std::size_t workers = 1;
  double divergence_guard = 1e6;
};

struct EpochRecord {
  double l_dyn = 0.0, l_orth = 0.0, l_zero = 0.0, total = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double wall_seconds = 0.0;
  bool diverged = false;
};

struct ErrorMetrics {
  double e_v = 0.0; // max|V_theta - V|^2 / max|V|^2 (fraction, not percent)
  double e_l = 0.0;
  std::size_t grid_nx = 0, grid_ny = 0;
};

// N i.i.d. uniform points in the region; deterministic in the seed. Sampled
// once and reused for every epoch.
std::vector<Vec> sample_training_set(const TrainConfig& cfg);

// Values of the learned field at one training point, V_theta already
// including the |x - xbar|^2 lift. Kept as plain data so the loss formulas
// can be exercised against a mock (e.g. the analytic decomposition).
struct FieldPointValues {
  Vec grad_v; // gradient of V_theta
  Vec l;      // rotational output
  Vec b;      // drift at the point
};

struct LossComponents {
  double l_dyn = 0.0, l_orth = 0.0, l_zero = 0.0;
  double total(double gamma1, double gamma2) const {
    return l_dyn + gamma1 * l_orth + gamma2 * l_zero;
  }
};

// The loss formulas on explicit values; v_at_xbar is V_theta(xbar).
LossComponents loss_from_values(const std::vector<FieldPointValues>& values,
                                double v_at_xbar, double delta);

// Loss of the network on the given points.
LossComponents loss_components(const NetworkParams& params,
                               const DriftSystem& system,
                               const std::vector<Vec>& points,
                               const TrainConfig& cfg);

struct AdamState {
  Vec m, v;
  std::size_t step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
  void update(Vec& theta, const Vec& grad, double lr);
};

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
};

TrainResult train(const DriftSystem& system, const Architecture& arch,
                  const TrainConfig& cfg);

// Continue from existing parameters (cfg.epochs more epochs); Adam moments
// restart from zero.
TrainResult resume_train(const DriftSystem& system, const NetworkParams& start,
                         const TrainConfig& cfg);

// e_V and e_l on a uniform grid over the region (101 x 81 by default),
// against the analytic benchmark with V shifted to vanish at xbar.
ErrorMetrics approximation_errors(const NetworkParams& params,
                                  const AnalyticBenchmark& bench,
                                  const Box& region, std::size_t nx = 101,
                                  std::size_t ny = 81);

} // namespace qp
