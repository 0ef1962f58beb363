#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "qp/prefactor.hpp"
#include "qp/systems.hpp"

namespace qp {

// Euler-Maruyama exit-time measurement for dx = b dt + sqrt(eps) dB.
// The exit set is {x : exit_level(x) >= 0}; the level value is also used to
// interpolate the crossing sub-step linearly.
struct McSetup {
  DriftSystem system;
  Vec start;
  std::function<double(const Vec&)> exit_level;
  double dt = 1e-3;
  std::uint64_t max_steps = 10000000;
  std::vector<double> epsilon_list;
  std::size_t trajectories = 2000; // M
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct ExitSample {
  double time = 0.0;
  bool censored = false;
};

struct EpsilonStats {
  double epsilon = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0; // sample stdev / sqrt(count); NaN when count < 2
  std::size_t count = 0;
  std::size_t censored = 0;
};

struct ExitTimeStats {
  std::vector<EpsilonStats> per_epsilon;
};

// One trajectory, fully determined by (seed, eps_index, trajectory_index)
// through a private counter-based stream.
ExitSample simulate_exit(const McSetup& setup, std::size_t eps_index,
                         std::size_t trajectory_index);

// M trajectories per epsilon; deterministic for a fixed seed regardless of
// worker count. Errors if more than half the runs are censored at any eps.
ExitTimeStats exit_time_stats(const McSetup& setup);

struct ComparisonRow {
  double epsilon = 0.0;
  double met_mc = 0.0;
  double stderr_ = 0.0;
  std::size_t n_effective = 0;
  std::size_t censored = 0;
  double met_formula = 0.0;
  double rel_err = 0.0; // (MC - formula) / formula
  double z_score = 0.0; // (MC - formula) / stderr
};

std::vector<ComparisonRow> compare_with_formula(const ExitTimeStats& stats,
                                                const PrefactorReport& report);

void write_comparison_csv(const std::string& path,
                          const std::vector<ComparisonRow>& rows);

} // namespace qp
