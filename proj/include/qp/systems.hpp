#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qp/linalg.hpp"

namespace qp {

enum class FixedPointKind { stable, saddle, unstable };

struct FixedPoint {
  Vec location;
  FixedPointKind kind = FixedPointKind::stable;
  std::vector<std::complex<double>> eigenvalues;
};

// An SDE drift field with closed-form Jacobian and a catalog of fixed points.
struct DriftSystem {
  std::size_t dim = 0;
  std::string name;
  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> jacobian;
  std::vector<FixedPoint> fixed_points;

  Vec drift_at(const Vec& x) const;
  Mat jacobian_at(const Vec& x) const;
};

// Benchmark with a known orthogonal decomposition b = -1/2 grad V + l.
// V is stored shifted so V(xbar) = 0.
struct AnalyticBenchmark {
  DriftSystem system;
  double alpha = 0.5;
  double beta = 3.0;
  Vec xbar;
  std::function<double(const Vec&)> quasipotential;
  std::function<Vec(const Vec&)> grad_quasipotential;
  std::function<Vec(const Vec&)> rotational;
  std::function<double(const Vec&)> div_rotational;
};

// Classify each registered fixed point by the spectrum of the drift Jacobian:
// stable iff all real parts < 0, saddle iff exactly one real part > 0.
std::vector<FixedPoint> classify_fixed_points(const DriftSystem& system);

// Damped Newton refinement of b(x) = 0 from a seed. Tolerance |b| <= 1e-10,
// at most 100 iterations; empty on non-convergence.
std::optional<Vec> find_fixed_point(const DriftSystem& system, Vec seed);

// Double-well drift of the numerical experiments: b1 = x1 - x1^3 - 3 x1 x2,
// b2 = 6 x1^4 - 6 x1^2 - x2/2, with explicit quasipotential
// V = x1^4/2 - x1^2 + alpha x2^2 and rotational part l = beta x1 (-v2', v1').
AnalyticBenchmark make_double_well_benchmark(double alpha = 0.5, double beta = 3.0);

// Registry keyed by name for CLI selection; "doublewell-rot" is built in.
struct SystemRegistry {
  static SystemRegistry& instance();
  void add(const std::string& key, std::function<DriftSystem()> factory);
  DriftSystem make(const std::string& key) const;
  bool contains(const std::string& key) const;
  std::vector<std::string> keys() const;

 private:
  std::vector<std::pair<std::string, std::function<DriftSystem()>>> factories_;
};

} // namespace qp
