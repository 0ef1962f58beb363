#include "qp/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace qp {

Vec DriftSystem::drift_at(const Vec& x) const {
  if (x.size() != dim) throw std::invalid_argument("drift: dimension mismatch");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("drift: non-finite point");
  return drift(x);
}

Mat DriftSystem::jacobian_at(const Vec& x) const {
  if (x.size() != dim) throw std::invalid_argument("jacobian: dimension mismatch");
  return jacobian(x);
}

std::vector<FixedPoint> classify_fixed_points(const DriftSystem& system) {
  std::vector<FixedPoint> out;
  out.reserve(system.fixed_points.size());
  for (const FixedPoint& fp : system.fixed_points) {
    FixedPoint c = fp;
    c.eigenvalues = eigenvalues(system.jacobian_at(fp.location));
    std::size_t pos = 0, neg = 0;
    for (auto ev : c.eigenvalues) {
      if (ev.real() > 0) ++pos;
      if (ev.real() < 0) ++neg;
    }
    if (pos == 0 && neg == c.eigenvalues.size())
      c.kind = FixedPointKind::stable;
    else if (pos == 1)
      c.kind = FixedPointKind::saddle;
    else
      c.kind = FixedPointKind::unstable;
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<Vec> find_fixed_point(const DriftSystem& system, Vec x) {
  for (int it = 0; it < 100; ++it) {
    Vec b = system.drift_at(x);
    double nb = 0.0;
    for (double v : b) nb += v * v;
    if (std::sqrt(nb) <= 1e-10) return x;
    Vec step;
    try {
      step = solve(system.jacobian_at(x), b);
    } catch (const std::runtime_error&) {
      return std::nullopt;
    }
    // Damping: halve until the residual does not grow.
    double t = 1.0;
    for (int halvings = 0; halvings < 30; ++halvings) {
      Vec trial = x;
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] -= t * step[i];
      Vec bt = system.drift_at(trial);
      double nt = 0.0;
      for (double v : bt) nt += v * v;
      if (nt <= nb || halvings == 29) {
        x = trial;
        break;
      }
      t *= 0.5;
    }
  }
  return std::nullopt;
}

AnalyticBenchmark make_double_well_benchmark(double alpha, double beta) {
  AnalyticBenchmark bench;
  bench.alpha = alpha;
  bench.beta = beta;
  bench.xbar = {-1.0, 0.0};

  auto v1 = [](double x1) { return 0.5 * x1 * x1 * x1 * x1 - x1 * x1; };
  auto dv1 = [](double x1) { return 2.0 * x1 * x1 * x1 - 2.0 * x1; };
  auto v2 = [alpha](double x2) { return alpha * x2 * x2; };
  auto dv2 = [alpha](double x2) { return 2.0 * alpha * x2; };
  const double v_shift = v1(-1.0); // = -1/2; subtracted so V(xbar) = 0

  bench.quasipotential = [=](const Vec& x) {
    return v1(x[0]) + v2(x[1]) - v_shift;
  };
  bench.grad_quasipotential = [=](const Vec& x) {
    return Vec{dv1(x[0]), dv2(x[1])};
  };
  bench.rotational = [=](const Vec& x) {
    double c = beta * x[0];
    return Vec{-c * dv2(x[1]), c * dv1(x[0])};
  };
  bench.div_rotational = [=](const Vec& x) { return -2.0 * alpha * beta * x[1]; };

  DriftSystem sys;
  sys.dim = 2;
  sys.name = "doublewell-rot";
  sys.drift = [=](const Vec& x) {
    Vec g = {dv1(x[0]), dv2(x[1])};
    double c = beta * x[0];
    return Vec{-0.5 * g[0] - c * g[1], -0.5 * g[1] + c * g[0]};
  };
  sys.jacobian = [=](const Vec& x) {
    Mat j(2, 2);
    double d2v1 = 6.0 * x[0] * x[0] - 2.0;
    j(0, 0) = -0.5 * d2v1 - beta * dv2(x[1]);
    j(0, 1) = -beta * x[0] * 2.0 * alpha;
    j(1, 0) = beta * dv1(x[0]) + beta * x[0] * d2v1;
    j(1, 1) = -alpha;
    return j;
  };
  sys.fixed_points = {
      {{-1.0, 0.0}, FixedPointKind::stable, {}},
      {{1.0, 0.0}, FixedPointKind::stable, {}},
      {{0.0, 0.0}, FixedPointKind::saddle, {}},
  };
  sys.fixed_points = classify_fixed_points(sys);
  bench.system = sys;
  return bench;
}

SystemRegistry& SystemRegistry::instance() {
  static SystemRegistry reg = [] {
    SystemRegistry r;
    r.add("doublewell-rot",
          [] { return make_double_well_benchmark().system; });
    return r;
  }();
  return reg;
}

void SystemRegistry::add(const std::string& key,
                         std::function<DriftSystem()> factory) {
  factories_.emplace_back(key, std::move(factory));
}

DriftSystem SystemRegistry::make(const std::string& key) const {
  for (const auto& [k, f] : factories_)
    if (k == key) return f();
  throw std::invalid_argument("unknown system key: " + key);
}

bool SystemRegistry::contains(const std::string& key) const {
  for (const auto& [k, f] : factories_)
    if (k == key) return true;
  return false;
}

std::vector<std::string> SystemRegistry::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, f] : factories_) out.push_back(k);
  return out;
}

} // namespace qp
