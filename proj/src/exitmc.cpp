#include "qp/exitmc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "qp/parallel.hpp"
#include "qp/philox.hpp"

namespace qp {

ExitSample simulate_exit(const McSetup& setup, std::size_t eps_index,
                         std::size_t trajectory_index) {
  double eps = setup.epsilon_list.at(eps_index);
  // Stream id packs (eps_index, trajectory_index); trajectories never share
  // counters, so worker scheduling cannot change the draw order.
  PhiloxStream rng(setup.seed,
                   (std::uint64_t(eps_index) << 40) | trajectory_index);
  std::size_t n = setup.system.dim;
  Vec x = setup.start;
  double g_prev = setup.exit_level(x);
  double noise = std::sqrt(eps * setup.dt);
  Vec b(n);
  for (std::uint64_t k = 0; k < setup.max_steps; ++k) {
    b = setup.system.drift(x);
    for (std::size_t d = 0; d < n; ++d)
      x[d] += b[d] * setup.dt + noise * rng.normal();
    double g = setup.exit_level(x);
    if (g >= 0.0) {
      // Linear interpolation of the crossing sub-step.
      double frac = g > g_prev ? (0.0 - g_prev) / (g - g_prev) : 1.0;
      if (!(frac >= 0.0 && frac <= 1.0)) frac = 1.0;
      return {(double(k) + frac) * setup.dt, false};
    }
    g_prev = g;
  }
  return {double(setup.max_steps) * setup.dt, true};
}

ExitTimeStats exit_time_stats(const McSetup& setup) {
  if (setup.trajectories < 1)
    throw std::invalid_argument("exit_time_stats: M >= 1 required");
  if (!(setup.dt > 0)) throw std::invalid_argument("exit_time_stats: dt > 0");
  if (setup.exit_level(setup.start) >= 0.0)
    throw std::invalid_argument("exit_time_stats: start already outside D");

  ExitTimeStats stats;
  for (std::size_t e = 0; e < setup.epsilon_list.size(); ++e) {
    std::vector<ExitSample> samples(setup.trajectories);
    parallel_for(setup.trajectories, setup.workers,
                 [&](std::size_t i) { samples[i] = simulate_exit(setup, e, i); });
    EpsilonStats s;
    s.epsilon = setup.epsilon_list[e];
    double sum = 0.0;
    for (const ExitSample& smp : samples) {
      if (smp.censored) {
        ++s.censored;
      } else {
        sum += smp.time;
        ++s.count;
      }
    }
    if (s.censored * 2 > setup.trajectories)
      throw std::runtime_error(
          "exit_time_stats: more than 50% of runs censored at eps=" +
          std::to_string(s.epsilon) + "; increase max_steps or eps");
    s.mean = s.count ? sum / double(s.count) : 0.0;
    if (s.count >= 2) {
      double ss = 0.0;
      for (const ExitSample& smp : samples)
        if (!smp.censored) ss += (smp.time - s.mean) * (smp.time - s.mean);
      s.stderr_ = std::sqrt(ss / double(s.count - 1)) / std::sqrt(double(s.count));
    } else {
      s.stderr_ = std::numeric_limits<double>::quiet_NaN();
    }
    stats.per_epsilon.push_back(s);
  }
  return stats;
}

std::vector<ComparisonRow> compare_with_formula(const ExitTimeStats& stats,
                                                const PrefactorReport& report) {
  std::vector<ComparisonRow> rows;
  for (const EpsilonStats& s : stats.per_epsilon) {
    ComparisonRow r;
    r.epsilon = s.epsilon;
    r.met_mc = s.mean;
    r.stderr_ = s.stderr_;
    r.n_effective = s.count;
    r.censored = s.censored;
    r.met_formula = mean_exit_time(report, s.epsilon);
    r.rel_err = (r.met_mc - r.met_formula) / r.met_formula;
    r.z_score = std::isnan(s.stderr_) || s.stderr_ == 0.0
                    ? std::numeric_limits<double>::quiet_NaN()
                    : (r.met_mc - r.met_formula) / s.stderr_;
    rows.push_back(r);
  }
  return rows;
}

void write_comparison_csv(const std::string& path,
                          const std::vector<ComparisonRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("write_comparison_csv: cannot open " + path);
  f << "epsilon,met_mc,stderr,n_effective,censored,met_formula,rel_err\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%zu,%zu,%.17g,%.17g\n",
                  r.epsilon, r.met_mc, r.stderr_, r.n_effective, r.censored,
                  r.met_formula, r.rel_err);
    f << buf;
  }
}

} // namespace qp
