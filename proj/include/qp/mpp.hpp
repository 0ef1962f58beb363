#pragma once

#include <functional>
#include <optional>
#include <string>

#include "qp/field.hpp"
#include "qp/systems.hpp"

namespace qp {

// Parametric boundary curve with outward normal, for the non-characteristic
// case.
struct BoundaryCurve {
  std::function<Vec(double)> curve; // s -> point
  double s_lo = 0.0, s_hi = 1.0;
  std::function<Vec(const Vec&)> normal; // point -> unit exterior normal
};

struct ExitPointResult {
  Vec point;
  double param = 0.0;
  bool at_interval_endpoint = false; // minimum pinned to s_lo/s_hi
};

// Minimizes V along the curve: 201-sample coarse scan (ties -> smallest
// parameter), then golden-section refinement to parameter tolerance 1e-8.
ExitPointResult exit_point_on_boundary(const PotentialField& field,
                                       const BoundaryCurve& boundary);

// x* = x_sad + delta1 * e_u, e_u the unit unstable eigenvector of grad b at
// the saddle, oriented toward xbar. Requires exactly one positive eigenvalue.
Vec saddle_seed(const DriftSystem& system, const FixedPoint& saddle,
                double delta1, const Vec& xbar);

enum class PathStatus { converged, max_length, stalled };

struct PathResult {
  std::vector<Vec> points; // ordered xbar-neighborhood -> x*
  Vec sigma;               // cumulative arc length per node
  PathStatus status = PathStatus::converged;
  Vec stall_location;
};

struct MppSettings {
  double sigma_step = 1e-3;
  double max_length = 10.0;
  double delta2 = 0.01; // termination ball radius around xbar
};

// RK4 on d phi / d sigma = -(b + grad V)/|b| from x*, marching until the
// delta2-ball around xbar is reached; nodes are reversed so the result runs
// xbar -> x*.
PathResult integrate_mpp(const PotentialField& field, const DriftSystem& system,
                         const Vec& x_star, const Vec& xbar,
                         const MppSettings& settings);

// Trapezoidal quadrature of div l / |b| over the path nodes. With
// subtract_baseline set, div l(start_fp) is removed on the half nearer the
// path start and div l(end_fp) on the other half (Case B saddle end); pass
// nullopt to skip an endpoint.
double divergence_integral(const PotentialField& field,
                           const DriftSystem& system, const PathResult& path,
                           bool subtract_baseline,
                           std::optional<Vec> start_fp = std::nullopt,
                           std::optional<Vec> end_fp = std::nullopt);

// CSV with columns sigma, x1..xn, V, divl, |b|.
void write_path_csv(const std::string& path_file, const PotentialField& field,
                    const DriftSystem& system, const PathResult& path);

} // namespace qp
