// Pipeline driver: learn the drift decomposition, trace most probable exit
// paths, assemble exit-time prefactors, and validate them against direct
// Monte Carlo. Subcommands: train, surface, mpp, prefactor, met, mc, report.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qp/diffnet.hpp"
#include "qp/exitmc.hpp"
#include "qp/field.hpp"
#include "qp/mpp.hpp"
#include "qp/parallel.hpp"
#include "qp/prefactor.hpp"
#include "qp/systems.hpp"
#include "qp/trainer.hpp"

namespace {

constexpr const char* kToolVersion = "qpcli 1.0.0";
constexpr int kExitUsage = 64;
constexpr int kExitNumerical = 2;

using nlohmann::json;
namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json default_config() {
  return json{
      {"system", "doublewell-rot"},
      {"xbar", {-1.0, 0.0}},
      {"arch", {{"hidden_layers", 6}, {"hidden_width", 20}}},
      {"train",
       {{"N", 10000},
        {"gamma1", 1.0},
        {"gamma2", 0.1},
        {"delta", 0.001},
        {"learning_rate", 0.002},
        {"epochs", 100000},
        {"seed", 0},
        {"checkpoint_every", 5000},
        {"region", {{"lo", {-1.5, -0.8}}, {"hi", {0.0, 0.8}}}}}},
      {"path",
       {{"delta1", 0.05}, {"delta2", 0.01}, {"sigma_step", 0.001},
        {"max_length", 10.0}}},
      {"boundary_a", {{"x1", -0.5}, {"span", {-0.8, 0.8}}}},
      {"mc",
       {{"dt", 0.001},
        {"M", 2000},
        {"max_steps", 10000000},
        {"seed", 1},
        {"eps_a", {0.08, 0.1, 0.14, 0.2}},
        {"eps_b", {0.1, 0.12, 0.15, 0.2}}}},
      {"prefactor", {{"riccati_paper_convention", false}}},
      {"workers", 0},
  };
}

void merge_into(json& base, const json& overlay) {
  for (auto it = overlay.begin(); it != overlay.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object())
      merge_into(base[it.key()], *it);
    else
      base[it.key()] = *it;
  }
}

json load_config(const std::string& path) {
  json cfg = default_config();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw UsageError("config file not found: " + path);
    json user;
    try {
      f >> user;
    } catch (const json::parse_error& e) {
      throw UsageError(std::string("config parse error: ") + e.what());
    }
    merge_into(cfg, user);
  }
  return cfg;
}

std::string output_root(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("QP_OUT_ROOT")) return env;
  return "runs";
}

fs::path make_run_dir(const std::string& root, const std::string& sub,
                      const json& cfg) {
  fs::path dir = fs::path(root) / sub;
  fs::create_directories(dir);
  json snapshot = cfg;
  snapshot["tool_version"] = kToolVersion;
  std::ofstream f(dir / "config_snapshot.json", std::ios::trunc);
  f << snapshot.dump(2) << "\n";
  return dir;
}

qp::Vec vec_of(const json& j) { return j.get<qp::Vec>(); }

std::size_t workers_of(const json& cfg) {
  std::size_t w = cfg.at("workers").get<std::size_t>();
  return w == 0 ? qp::default_workers() : w;
}

qp::TrainConfig train_config(const json& cfg, const std::string& run_dir) {
  const json& t = cfg.at("train");
  qp::TrainConfig tc;
  tc.region.lo = vec_of(t.at("region").at("lo"));
  tc.region.hi = vec_of(t.at("region").at("hi"));
  tc.sample_count = t.at("N").get<std::size_t>();
  tc.gamma1 = t.at("gamma1").get<double>();
  tc.gamma2 = t.at("gamma2").get<double>();
  tc.delta = t.at("delta").get<double>();
  tc.learning_rate = t.at("learning_rate").get<double>();
  tc.epochs = t.at("epochs").get<std::size_t>();
  tc.seed = t.at("seed").get<std::uint64_t>();
  tc.xbar = vec_of(cfg.at("xbar"));
  tc.checkpoint_every = t.at("checkpoint_every").get<std::size_t>();
  tc.run_dir = run_dir;
  tc.workers = workers_of(cfg);
  return tc;
}

qp::Architecture arch_of(const json& cfg, std::size_t dim) {
  qp::Architecture a;
  a.input_dim = dim;
  a.output_dim = dim + 1;
  a.hidden.assign(cfg.at("arch").at("hidden_layers").get<std::size_t>(),
                  cfg.at("arch").at("hidden_width").get<std::size_t>());
  return a;
}

qp::PotentialField field_of(const json& cfg, const std::string& checkpoint) {
  if (checkpoint.empty())
    return qp::PotentialField::analytic(qp::make_double_well_benchmark());
  return qp::PotentialField::learned(qp::load_checkpoint(checkpoint),
                                     vec_of(cfg.at("xbar")));
}

qp::BoundaryCurve boundary_a_of(const json& cfg) {
  double x1 = cfg.at("boundary_a").at("x1").get<double>();
  qp::Vec span = vec_of(cfg.at("boundary_a").at("span"));
  qp::BoundaryCurve b;
  b.s_lo = span[0];
  b.s_hi = span[1];
  b.curve = [x1](double s) { return qp::Vec{x1, s}; };
  b.normal = [](const qp::Vec&) { return qp::Vec{1.0, 0.0}; };
  return b;
}

qp::FixedPoint saddle_of(const qp::DriftSystem& system) {
  for (const auto& fp : qp::classify_fixed_points(system))
    if (fp.kind == qp::FixedPointKind::saddle) return fp;
  throw std::runtime_error("system has no registered saddle point");
}

qp::ExitCase parse_case(const std::string& s) {
  if (s == "A" || s == "a") return qp::ExitCase::A;
  if (s == "B" || s == "b") return qp::ExitCase::B;
  throw UsageError("unknown case '" + s + "' (expected A or B)");
}

struct CaseArtifacts {
  qp::Vec x_star;
  qp::Vec normal;         // Case A only
  qp::FixedPoint saddle;  // Case B only
  qp::PathResult path;
};

CaseArtifacts build_case(const json& cfg, const qp::PotentialField& field,
                         const qp::DriftSystem& system, qp::ExitCase exit_case) {
  const json& p = cfg.at("path");
  qp::MppSettings ms;
  ms.sigma_step = p.at("sigma_step").get<double>();
  ms.max_length = p.at("max_length").get<double>();
  ms.delta2 = p.at("delta2").get<double>();
  qp::Vec xbar = vec_of(cfg.at("xbar"));
  CaseArtifacts art;
  if (exit_case == qp::ExitCase::A) {
    auto exit_pt = qp::exit_point_on_boundary(field, boundary_a_of(cfg));
    if (exit_pt.at_interval_endpoint)
      std::cerr << "warning: boundary minimum at interval endpoint (possible "
                   "domain misspecification)\n";
    art.x_star = exit_pt.point;
    art.normal = boundary_a_of(cfg).normal(exit_pt.point);
  } else {
    art.saddle = saddle_of(system);
    art.x_star = qp::saddle_seed(system, art.saddle,
                                 p.at("delta1").get<double>(), xbar);
  }
  art.path = qp::integrate_mpp(field, system, art.x_star, xbar, ms);
  if (art.path.status == qp::PathStatus::stalled) {
    std::ostringstream os;
    os << "path integration stalled at (";
    for (double v : art.path.stall_location) os << v << " ";
    os << ")";
    throw std::runtime_error(os.str());
  }
  if (art.path.status != qp::PathStatus::converged)
    throw std::runtime_error("path integration hit max_length before xbar");
  return art;
}

qp::PrefactorReport build_report(const json& cfg,
                                 const qp::PotentialField& field,
                                 const qp::DriftSystem& system,
                                 qp::ExitCase exit_case) {
  CaseArtifacts art = build_case(cfg, field, system, exit_case);
  qp::PrefactorSettings ps;
  ps.riccati_paper_convention =
      cfg.at("prefactor").at("riccati_paper_convention").get<bool>();
  qp::Vec xbar = vec_of(cfg.at("xbar"));
  if (exit_case == qp::ExitCase::A)
    return qp::prefactor_case_a(field, system, art.x_star, art.normal,
                                art.path, xbar, ps);
  return qp::prefactor_case_b(field, system, art.saddle, art.path, xbar, ps);
}

void write_met_csv(const std::string& path, const qp::PrefactorReport& report,
                   const std::vector<double>& eps_list) {
  std::ofstream f(path, std::ios::trunc);
  f << "epsilon,L,V_star,met_formula\n";
  char buf[160];
  for (double eps : eps_list) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", eps,
                  report.prefactor(eps), report.v_star,
                  qp::mean_exit_time(report, eps));
    f << buf;
  }
}

int cmd_train(const json& cfg, const std::string& out_root,
              const std::string& resume) {
  fs::path dir = make_run_dir(out_root, "train", cfg);
  qp::DriftSystem system =
      qp::SystemRegistry::instance().make(cfg.at("system").get<std::string>());
  qp::TrainConfig tc = train_config(cfg, dir.string());
  qp::Architecture arch = arch_of(cfg, system.dim);

  qp::TrainResult result;
  if (!resume.empty()) {
    qp::NetworkParams start = qp::load_checkpoint(resume);
    // Continue the epoch counter: only the remaining epochs are run.
    if (start.trained_epochs >= tc.epochs) {
      result.params = start;
    } else {
      qp::TrainConfig rest = tc;
      rest.epochs = tc.epochs - start.trained_epochs;
      rest.seed = start.seed;
      result = qp::resume_train(system, start, rest);
    }
  } else {
    result = qp::train(system, arch, tc);
  }

  json metrics;
  metrics["epochs_run"] = result.params.trained_epochs;
  metrics["wall_seconds"] = result.history.wall_seconds;
  metrics["diverged"] = result.history.diverged;
  if (!result.history.epochs.empty()) {
    metrics["final_loss"] = result.history.epochs.back().total;
  }
  if (cfg.at("system").get<std::string>() == "doublewell-rot") {
    auto bench = qp::make_double_well_benchmark();
    auto em = qp::approximation_errors(result.params, bench, tc.region);
    metrics["e_V_percent"] = em.e_v * 100.0;
    metrics["e_l_percent"] = em.e_l * 100.0;
  }
  std::ofstream mf(dir / "metrics.json", std::ios::trunc);
  mf << metrics.dump(2) << "\n";
  std::cout << metrics.dump(2) << "\n";
  return result.history.diverged ? kExitNumerical : 0;
}

int cmd_surface(const json& cfg, const std::string& out_root,
                const std::string& checkpoint, std::size_t nx, std::size_t ny) {
  fs::path dir = make_run_dir(out_root, "surface", cfg);
  auto bench = qp::make_double_well_benchmark();
  std::optional<qp::NetworkParams> params;
  if (!checkpoint.empty()) params = qp::load_checkpoint(checkpoint);
  qp::Vec xbar = vec_of(cfg.at("xbar"));
  const json& region = cfg.at("train").at("region");
  qp::Vec lo = vec_of(region.at("lo")), hi = vec_of(region.at("hi"));

  std::ofstream f(dir / "surface.csv", std::ios::trunc);
  if (params)
    f << "x1,x2,V_theta,V_true,l_theta_1,l_theta_2,l_true_1,l_true_2\n";
  else
    f << "x1,x2,V_true,l_true_1,l_true_2\n";
  char buf[64];
  auto put = [&](double v, bool last = false) {
    std::snprintf(buf, sizeof buf, last ? "%.17g\n" : "%.17g,", v);
    f << buf;
  };
  for (std::size_t i = 0; i < nx; ++i) {
    double x1 = lo[0] + (hi[0] - lo[0]) * double(i) / double(nx - 1);
    for (std::size_t j = 0; j < ny; ++j) {
      double x2 = lo[1] + (hi[1] - lo[1]) * double(j) / double(ny - 1);
      qp::Vec x = {x1, x2};
      qp::Vec lt = bench.rotational(x);
      put(x1);
      put(x2);
      if (params) {
        qp::Vec out = qp::forward(*params, x);
        double lift = (x1 - xbar[0]) * (x1 - xbar[0]) +
                      (x2 - xbar[1]) * (x2 - xbar[1]);
        put(out[0] + lift);
        put(bench.quasipotential(x));
        put(out[1]);
        put(out[2]);
        put(lt[0]);
        put(lt[1], true);
      } else {
        put(bench.quasipotential(x));
        put(lt[0]);
        put(lt[1], true);
      }
    }
  }
  std::cout << "wrote " << (dir / "surface.csv").string() << "\n";
  return 0;
}

int cmd_mpp(const json& cfg, const std::string& out_root,
            const std::string& checkpoint, const std::string& case_str) {
  qp::ExitCase exit_case = parse_case(case_str);
  fs::path dir = make_run_dir(out_root, "mpp", cfg);
  qp::DriftSystem system =
      qp::SystemRegistry::instance().make(cfg.at("system").get<std::string>());
  qp::PotentialField field = field_of(cfg, checkpoint);
  CaseArtifacts art = build_case(cfg, field, system, exit_case);
  qp::Vec xbar = vec_of(cfg.at("xbar"));
  std::optional<qp::Vec> end_fp;
  if (exit_case == qp::ExitCase::B) end_fp = art.saddle.location;
  double integral =
      qp::divergence_integral(field, system, art.path, true, xbar, end_fp);
  std::string name = exit_case == qp::ExitCase::A ? "path_A.csv" : "path_B.csv";
  qp::write_path_csv((dir / name).string(), field, system, art.path);
  std::cout << "exit point: (";
  for (std::size_t d = 0; d < art.x_star.size(); ++d)
    std::cout << (d ? ", " : "") << art.x_star[d];
  std::cout << ")\ndivergence integral: " << integral << "\nwrote "
            << (dir / name).string() << "\n";
  return 0;
}

int cmd_prefactor(const json& cfg, const std::string& out_root,
                  const std::string& checkpoint, const std::string& case_str) {
  qp::ExitCase exit_case = parse_case(case_str);
  fs::path dir = make_run_dir(out_root, "prefactor", cfg);
  qp::DriftSystem system =
      qp::SystemRegistry::instance().make(cfg.at("system").get<std::string>());
  qp::PotentialField field = field_of(cfg, checkpoint);
  qp::PrefactorReport report = build_report(cfg, field, system, exit_case);
  std::string text = qp::report_to_json(report);
  std::string name =
      exit_case == qp::ExitCase::A ? "report_A.json" : "report_B.json";
  std::ofstream f(dir / name, std::ios::trunc);
  f << text << "\n";
  std::cout << text << "\n";
  return 0;
}

int cmd_met(const json& cfg, const std::string& out_root,
            const std::string& report_path, std::vector<double> eps_list) {
  fs::path dir = make_run_dir(out_root, "met", cfg);
  std::ifstream rf(report_path);
  if (!rf) throw UsageError("report file not found: " + report_path);
  std::stringstream ss;
  ss << rf.rdbuf();
  qp::PrefactorReport report = qp::report_from_json(ss.str());
  if (eps_list.empty())
    eps_list = cfg.at("mc")
                   .at(report.exit_case == qp::ExitCase::A ? "eps_a" : "eps_b")
                   .get<std::vector<double>>();
  write_met_csv((dir / "met.csv").string(), report, eps_list);
  std::cout << "wrote " << (dir / "met.csv").string() << "\n";
  return 0;
}

qp::McSetup mc_setup(const json& cfg, qp::ExitCase exit_case) {
  qp::McSetup setup;
  setup.system =
      qp::SystemRegistry::instance().make(cfg.at("system").get<std::string>());
  setup.start = vec_of(cfg.at("xbar"));
  const json& mc = cfg.at("mc");
  setup.dt = mc.at("dt").get<double>();
  setup.max_steps = mc.at("max_steps").get<std::uint64_t>();
  setup.trajectories = mc.at("M").get<std::size_t>();
  setup.seed = mc.at("seed").get<std::uint64_t>();
  setup.workers = workers_of(cfg);
  if (exit_case == qp::ExitCase::A) {
    double x1 = cfg.at("boundary_a").at("x1").get<double>();
    setup.exit_level = [x1](const qp::Vec& x) { return x[0] - x1; };
    setup.epsilon_list = mc.at("eps_a").get<std::vector<double>>();
  } else {
    qp::FixedPoint saddle = saddle_of(setup.system);
    double x1 = saddle.location[0];
    setup.exit_level = [x1](const qp::Vec& x) { return x[0] - x1; };
    setup.epsilon_list = mc.at("eps_b").get<std::vector<double>>();
  }
  return setup;
}

int cmd_mc(const json& cfg, const std::string& out_root,
           const std::string& case_str, const std::string& report_path) {
  qp::ExitCase exit_case = parse_case(case_str);
  fs::path dir = make_run_dir(out_root, "mc", cfg);
  qp::McSetup setup = mc_setup(cfg, exit_case);
  qp::ExitTimeStats stats = qp::exit_time_stats(setup);

  std::vector<qp::ComparisonRow> rows;
  if (!report_path.empty()) {
    std::ifstream rf(report_path);
    if (!rf) throw UsageError("report file not found: " + report_path);
    std::stringstream ss;
    ss << rf.rdbuf();
    rows = qp::compare_with_formula(stats, qp::report_from_json(ss.str()));
  } else {
    for (const auto& s : stats.per_epsilon) {
      qp::ComparisonRow r;
      r.epsilon = s.epsilon;
      r.met_mc = s.mean;
      r.stderr_ = s.stderr_;
      r.n_effective = s.count;
      r.censored = s.censored;
      r.met_formula = std::nan("");
      r.rel_err = std::nan("");
      rows.push_back(r);
    }
  }
  std::string name = exit_case == qp::ExitCase::A ? "mc_A.csv" : "mc_B.csv";
  qp::write_comparison_csv((dir / name).string(), rows);
  std::cout << "wrote " << (dir / name).string() << "\n";
  return 0;
}

int cmd_report(const json& cfg, const std::string& out_root,
               const std::string& report_path, const std::string& mc_csv) {
  fs::path dir = make_run_dir(out_root, "report", cfg);
  std::ifstream rf(report_path);
  if (!rf) throw UsageError("report file not found: " + report_path);
  std::stringstream ss;
  ss << rf.rdbuf();
  qp::PrefactorReport report = qp::report_from_json(ss.str());

  std::ifstream mf(mc_csv);
  if (!mf) throw UsageError("mc csv not found: " + mc_csv);
  std::string line;
  std::getline(mf, line); // header
  json bundle;
  bundle["report"] = json::parse(qp::report_to_json(report));
  json table = json::array();
  while (std::getline(mf, line)) {
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() < 5) throw UsageError("malformed mc csv row: " + line);
    double eps = cells[0], mc_mean = cells[1], se = cells[2];
    double met = qp::mean_exit_time(report, eps);
    table.push_back(json{{"epsilon", eps},
                         {"met_mc", mc_mean},
                         {"stderr", se},
                         {"met_formula", met},
                         {"rel_err", (mc_mean - met) / met}});
  }
  bundle["comparison"] = table;
  std::ofstream out(dir / "report_bundle.json", std::ios::trunc);
  out << bundle.dump(2) << "\n";
  std::cout << bundle.dump(2) << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasipotential decomposition, exit paths, prefactors, and "
               "Monte Carlo validation"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  std::string config_path, out_root_flag, checkpoint, case_str = "A";
  std::string resume, report_path, mc_csv;
  std::size_t nx = 101, ny = 81;
  std::vector<double> eps_list;
  std::optional<std::size_t> n_override, epochs_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<bool> paper_convention;

  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--out", out_root_flag,
                 "output root (default $QP_OUT_ROOT or ./runs)");

  auto* train = app.add_subcommand("train", "train the decomposition network");
  train->add_option("--n", n_override, "training point count N");
  train->add_option("--epochs", epochs_override, "epoch count");
  train->add_option("--seed", seed_override, "training seed");
  train->add_option("--resume", resume, "checkpoint to continue from");

  auto* surface = app.add_subcommand("surface", "V/l grids as CSV");
  surface->add_option("--checkpoint", checkpoint, "trained checkpoint");
  surface->add_option("--nx", nx, "grid points along x1");
  surface->add_option("--ny", ny, "grid points along x2");

  auto* mpp = app.add_subcommand("mpp", "most probable exit path");
  mpp->add_option("--checkpoint", checkpoint, "trained checkpoint (omit: analytic)");
  mpp->add_option("--case", case_str, "A or B");

  auto* prefactor = app.add_subcommand("prefactor", "prefactor report JSON");
  prefactor->add_option("--checkpoint", checkpoint, "trained checkpoint (omit: analytic)");
  prefactor->add_option("--case", case_str, "A or B");
  prefactor->add_option("--paper-convention", paper_convention,
                        "use the printed factor-2 Riccati variant");

  auto* met = app.add_subcommand("met", "mean exit time table from a report");
  met->add_option("--report", report_path, "prefactor report JSON")->required();
  met->add_option("--eps", eps_list, "epsilon values");

  auto* mc = app.add_subcommand("mc", "Monte Carlo mean exit times");
  mc->add_option("--case", case_str, "A or B");
  mc->add_option("--report", report_path, "optional report for comparison columns");

  auto* report = app.add_subcommand("report", "bundle formula vs MC tables");
  report->add_option("--report", report_path, "prefactor report JSON")->required();
  report->add_option("--mc", mc_csv, "mc comparison CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    json cfg = load_config(config_path);
    if (n_override) cfg["train"]["N"] = *n_override;
    if (epochs_override) cfg["train"]["epochs"] = *epochs_override;
    if (seed_override) cfg["train"]["seed"] = *seed_override;
    if (paper_convention)
      cfg["prefactor"]["riccati_paper_convention"] = *paper_convention;
    std::string out_root = output_root(out_root_flag);

    if (*train) return cmd_train(cfg, out_root, resume);
    if (*surface) return cmd_surface(cfg, out_root, checkpoint, nx, ny);
    if (*mpp) return cmd_mpp(cfg, out_root, checkpoint, case_str);
    if (*prefactor) return cmd_prefactor(cfg, out_root, checkpoint, case_str);
    if (*met) return cmd_met(cfg, out_root, report_path, eps_list);
    if (*mc) return cmd_mc(cfg, out_root, case_str, report_path);
    if (*report) return cmd_report(cfg, out_root, report_path, mc_csv);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
