#include "qp/mpp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace qp {

namespace {

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dist(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

} // namespace

ExitPointResult exit_point_on_boundary(const PotentialField& field,
                                       const BoundaryCurve& boundary) {
  if (!(boundary.s_lo < boundary.s_hi))
    throw std::invalid_argument("exit_point_on_boundary: bad interval");
  constexpr int kScan = 201;
  double best_s = boundary.s_lo;
  double best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kScan; ++i) {
    double s = boundary.s_lo +
               (boundary.s_hi - boundary.s_lo) * double(i) / double(kScan - 1);
    double v = field.value(boundary.curve(s));
    if (v < best_v) { // strict: ties keep the smallest parameter
      best_v = v;
      best_s = s;
    }
  }
  // Golden-section refinement on the bracketing scan cells.
  double cell = (boundary.s_hi - boundary.s_lo) / double(kScan - 1);
  double a = std::max(boundary.s_lo, best_s - cell);
  double b = std::min(boundary.s_hi, best_s + cell);
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = b - kInvPhi * (b - a), x2 = a + kInvPhi * (b - a);
  double f1 = field.value(boundary.curve(x1));
  double f2 = field.value(boundary.curve(x2));
  while (b - a > 1e-8) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = field.value(boundary.curve(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = field.value(boundary.curve(x2));
    }
  }
  double s_min = 0.5 * (a + b);
  if (field.value(boundary.curve(best_s)) <
      field.value(boundary.curve(s_min)))
    s_min = best_s; // scan tie-break wins over refinement drift
  ExitPointResult r;
  r.param = s_min;
  r.point = boundary.curve(s_min);
  r.at_interval_endpoint = (s_min - boundary.s_lo < 1e-7) ||
                           (boundary.s_hi - s_min < 1e-7);
  return r;
}

Vec saddle_seed(const DriftSystem& system, const FixedPoint& saddle,
                double delta1, const Vec& xbar) {
  Mat j = system.jacobian_at(saddle.location);
  auto evs = eigenvalues(j);
  double lambda_pos = 0.0;
  std::size_t positive = 0;
  for (auto ev : evs)
    if (ev.real() > 0) {
      ++positive;
      lambda_pos = ev.real();
    }
  if (positive != 1)
    throw std::runtime_error(
        "saddle_seed: saddle must have a single positive eigenvalue (B1), got " +
        std::to_string(positive));
  Vec eu = real_eigenvector(j, lambda_pos);
  double toward = 0.0;
  for (std::size_t d = 0; d < eu.size(); ++d)
    toward += eu[d] * (xbar[d] - saddle.location[d]);
  if (toward < 0)
    for (double& v : eu) v = -v;
  Vec x = saddle.location;
  for (std::size_t d = 0; d < x.size(); ++d) x[d] += delta1 * eu[d];
  return x;
}

PathResult integrate_mpp(const PotentialField& field, const DriftSystem& system,
                         const Vec& x_star, const Vec& xbar,
                         const MppSettings& settings) {
  PathResult result;
  if (dist(x_star, xbar) <= settings.delta2) {
    result.status = PathStatus::converged;
    return result;
  }

  auto near_fixed_point = [&](const Vec& x) {
    for (const auto& fp : system.fixed_points)
      if (dist(x, fp.location) < 1e-6) return true;
    return false;
  };

  bool stalled = false;
  Vec stall_at;
  auto rhs = [&](const Vec& x) -> Vec {
    Vec b = system.drift_at(x);
    double nb = norm(b);
    if (nb < 1e-12) {
      if (!near_fixed_point(x)) {
        stalled = true;
        stall_at = x;
      }
      return Vec(x.size(), 0.0);
    }
    Vec g = field.eval(x).grad_v;
    Vec f(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) f[d] = -(b[d] + g[d]) / nb;
    return f;
  };

  std::vector<Vec> nodes = {x_star};
  Vec x = x_star;
  double h = settings.sigma_step;
  std::size_t max_nodes = std::size_t(settings.max_length / h) + 1;
  PathStatus status = PathStatus::max_length;
  for (std::size_t step = 0; step < max_nodes; ++step) {
    Vec k1 = rhs(x);
    if (stalled) break;
    Vec x2 = x, x3 = x, x4 = x;
    for (std::size_t d = 0; d < x.size(); ++d) x2[d] += 0.5 * h * k1[d];
    Vec k2 = rhs(x2);
    for (std::size_t d = 0; d < x.size(); ++d) x3[d] += 0.5 * h * k2[d];
    Vec k3 = rhs(x3);
    for (std::size_t d = 0; d < x.size(); ++d) x4[d] += h * k3[d];
    Vec k4 = rhs(x4);
    if (stalled) break;
    for (std::size_t d = 0; d < x.size(); ++d)
      x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    nodes.push_back(x);
    if (dist(x, xbar) <= settings.delta2) {
      status = PathStatus::converged;
      break;
    }
  }
  if (stalled) {
    result.status = PathStatus::stalled;
    result.stall_location = stall_at;
  } else {
    result.status = status;
  }

  // Reverse so the polyline runs xbar-neighborhood -> x*.
  result.points.assign(nodes.rbegin(), nodes.rend());
  result.sigma.resize(result.points.size());
  for (std::size_t i = 0; i < result.points.size(); ++i)
    result.sigma[i] = double(i) * h;
  return result;
}

double divergence_integral(const PotentialField& field,
                           const DriftSystem& system, const PathResult& path,
                           bool subtract_baseline, std::optional<Vec> start_fp,
                           std::optional<Vec> end_fp) {
  if (path.points.size() < 2) return 0.0;
  double base_start = 0.0, base_end = 0.0;
  if (subtract_baseline) {
    if (start_fp) base_start = field.eval(*start_fp).div_l;
    if (end_fp) base_end = field.eval(*end_fp).div_l;
  }
  double half = path.sigma.back() / 2.0;
  auto integrand = [&](std::size_t i) {
    const Vec& x = path.points[i];
    double nb = 0.0;
    Vec b = system.drift_at(x);
    for (double v : b) nb += v * v;
    nb = std::sqrt(nb);
    double base = path.sigma[i] <= half ? base_start : base_end;
    double w = (field.eval(x).div_l - base) / nb;
    if (std::abs(w) > 1e6)
      throw std::runtime_error(
          "divergence_integral: integrand blow-up near a fixed point "
          "(div l baseline not zero) at sigma=" +
          std::to_string(path.sigma[i]));
    return w;
  };
  double sum = 0.0;
  double prev = integrand(0);
  for (std::size_t i = 1; i < path.points.size(); ++i) {
    double cur = integrand(i);
    sum += 0.5 * (prev + cur) * (path.sigma[i] - path.sigma[i - 1]);
    prev = cur;
  }
  return sum;
}

void write_path_csv(const std::string& path_file, const PotentialField& field,
                    const DriftSystem& system, const PathResult& path) {
  std::ofstream f(path_file, std::ios::trunc);
  if (!f) throw std::runtime_error("write_path_csv: cannot open " + path_file);
  f << "sigma";
  for (std::size_t d = 0; d < field.dim(); ++d) f << ",x" << d + 1;
  f << ",V,divl,normb\n";
  char buf[64];
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    const Vec& x = path.points[i];
    FieldSample s = field.eval(x);
    Vec b = system.drift_at(x);
    double nb = 0.0;
    for (double v : b) nb += v * v;
    std::snprintf(buf, sizeof buf, "%.17g", path.sigma[i]);
    f << buf;
    for (double v : x) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      f << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g", s.v);
    f << buf;
    std::snprintf(buf, sizeof buf, ",%.17g", s.div_l);
    f << buf;
    std::snprintf(buf, sizeof buf, ",%.17g\n", std::sqrt(nb));
    f << buf;
  }
}

} // namespace qp
