#include "qp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "qp/philox.hpp"

namespace qp {

std::vector<Vec> sample_training_set(const TrainConfig& cfg) {
  std::size_t dim = cfg.region.lo.size();
  if (dim == 0 || cfg.region.hi.size() != dim)
    throw std::invalid_argument("sample_training_set: bad region");
  for (std::size_t d = 0; d < dim; ++d)
    if (!(cfg.region.lo[d] < cfg.region.hi[d]))
      throw std::invalid_argument("sample_training_set: degenerate region");
  if (cfg.sample_count < 1)
    throw std::invalid_argument("sample_training_set: N >= 1 required");
  PhiloxStream rng(cfg.seed, 0);
  std::vector<Vec> pts(cfg.sample_count, Vec(dim));
  for (auto& p : pts)
    for (std::size_t d = 0; d < dim; ++d)
      p[d] = rng.uniform(cfg.region.lo[d], cfg.region.hi[d]);
  return pts;
}

LossComponents loss_from_values(const std::vector<FieldPointValues>& values,
                                double v_at_xbar, double delta) {
  if (values.empty())
    throw std::invalid_argument("loss_from_values: empty batch");
  LossComponents c;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& s = values[i];
    double r2 = 0.0, gl = 0.0, g2 = 0.0, l2 = 0.0;
    for (std::size_t d = 0; d < s.b.size(); ++d) {
      double r = s.b[d] + 0.5 * s.grad_v[d] - s.l[d];
      r2 += r * r;
      gl += s.grad_v[d] * s.l[d];
      g2 += s.grad_v[d] * s.grad_v[d];
      l2 += s.l[d] * s.l[d];
    }
    if (!std::isfinite(r2) || !std::isfinite(gl))
      throw std::runtime_error("loss: non-finite value at sample " +
                               std::to_string(i));
    c.l_dyn += r2;
    c.l_orth += gl * gl / (g2 * l2 + delta);
  }
  c.l_dyn /= double(values.size());
  c.l_orth /= double(values.size());
  c.l_zero = v_at_xbar * v_at_xbar;
  return c;
}

LossComponents loss_components(const NetworkParams& params,
                               const DriftSystem& system,
                               const std::vector<Vec>& points,
                               const TrainConfig& cfg) {
  std::vector<FieldPointValues> vals;
  vals.reserve(points.size());
  std::size_t n = system.dim;
  for (const Vec& x : points) {
    EvalWithJacobian ev = forward_with_input_jacobian(params, x);
    FieldPointValues v;
    v.b = system.drift_at(x);
    v.grad_v.resize(n);
    v.l.assign(ev.outputs.begin() + 1, ev.outputs.end());
    for (std::size_t d = 0; d < n; ++d)
      v.grad_v[d] = ev.jacobian(0, d) + 2.0 * (x[d] - cfg.xbar[d]);
    vals.push_back(std::move(v));
  }
  double v_at_xbar = forward(params, cfg.xbar)[0];
  return loss_from_values(vals, v_at_xbar, cfg.delta);
}

void AdamState::update(Vec& theta, const Vec& grad, double lr) {
  if (theta.size() != m.size() || grad.size() != m.size())
    throw std::invalid_argument("adam: dimension mismatch");
  ++step;
  double bc1 = 1.0 - std::pow(beta1, double(step));
  double bc2 = 1.0 - std::pow(beta2, double(step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

namespace {

void write_history_csv(const std::string& path, const TrainHistory& h) {
  std::ofstream f(path, std::ios::trunc);
  f << "epoch,L_dyn,L_orth,L0,total\n";
  char buf[160];
  for (std::size_t e = 0; e < h.epochs.size(); ++e) {
    const auto& r = h.epochs[e];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", e, r.l_dyn,
                  r.l_orth, r.l_zero, r.total);
    f << buf;
  }
}

void write_config_snapshot(const std::string& path, const TrainConfig& cfg,
                           const Architecture& arch,
                           const std::string& system_name) {
  nlohmann::json j;
  j["system"] = system_name;
  j["arch"] = {{"input_dim", arch.input_dim},
               {"hidden", arch.hidden},
               {"output_dim", arch.output_dim}};
  j["region"] = {{"lo", cfg.region.lo}, {"hi", cfg.region.hi}};
  j["N"] = cfg.sample_count;
  j["gamma1"] = cfg.gamma1;
  j["gamma2"] = cfg.gamma2;
  j["delta"] = cfg.delta;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["seed"] = cfg.seed;
  j["xbar"] = cfg.xbar;
  j["checkpoint_every"] = cfg.checkpoint_every;
  std::ofstream f(path, std::ios::trunc);
  f << j.dump(2) << "\n";
}

} // namespace

namespace {

TrainResult train_loop(const DriftSystem& system, NetworkParams params,
                       const TrainConfig& cfg, std::size_t epoch_base) {
  const Architecture& arch = params.arch;
  if (arch.output_dim != arch.input_dim + 1)
    throw std::invalid_argument("train: output_dim must be input_dim + 1");
  if (cfg.xbar.size() != system.dim)
    throw std::invalid_argument("train: xbar dimension mismatch");

  auto t0 = std::chrono::steady_clock::now();
  std::vector<Vec> points = sample_training_set(cfg);
  std::vector<Vec> batch = points;
  batch.push_back(cfg.xbar); // trailing sample carries the L0 pin

  std::size_t N = points.size();
  std::size_t n = system.dim;
  std::vector<Vec> drift_vals(N);
  for (std::size_t i = 0; i < N; ++i) drift_vals[i] = system.drift_at(points[i]);

  NetworkParams last_good = params;
  AdamState adam(params.theta.size());
  TrainHistory history;
  history.epochs.reserve(cfg.epochs);

  bool write_files = !cfg.run_dir.empty();
  if (write_files) {
    std::filesystem::create_directories(cfg.run_dir);
    write_config_snapshot(cfg.run_dir + "/config.json", cfg, arch, system.name);
  }

  std::vector<double> dyn_terms(N), orth_terms(N);
  double zero_term = 0.0;

  SampleAdjointFn adjoint = [&](std::size_t i, const EvalWithJacobian& ev,
                                Vec& dout, Mat& djac) -> double {
    if (i == N) { // the xbar sample, gamma2 * Vhat(xbar)^2
      double vh = ev.outputs[0];
      zero_term = vh * vh;
      dout[0] = cfg.gamma2 * 2.0 * vh;
      return cfg.gamma2 * zero_term;
    }
    const Vec& x = batch[i];
    double inv_n = 1.0 / double(N);
    Vec g(n), r(n);
    double gl = 0.0, g2 = 0.0, l2 = 0.0, r2 = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      g[d] = ev.jacobian(0, d) + 2.0 * (x[d] - cfg.xbar[d]);
      double l = ev.outputs[1 + d];
      r[d] = drift_vals[i][d] + 0.5 * g[d] - l;
      r2 += r[d] * r[d];
      gl += g[d] * l;
      g2 += g[d] * g[d];
      l2 += l * l;
    }
    if (!std::isfinite(r2) || !std::isfinite(gl))
      throw std::runtime_error("train: non-finite loss at sample " +
                               std::to_string(i));
    double q = g2 * l2 + cfg.delta;
    double u2q2 = gl * gl / (q * q);
    dyn_terms[i] = r2 * inv_n;
    orth_terms[i] = (gl * gl / q) * inv_n;
    for (std::size_t d = 0; d < n; ++d) {
      double l = ev.outputs[1 + d];
      double dg = r[d] + cfg.gamma1 * (2.0 * gl / q * l - u2q2 * 2.0 * l2 * g[d]);
      double dl = -2.0 * r[d] +
                  cfg.gamma1 * (2.0 * gl / q * g[d] - u2q2 * 2.0 * g2 * l);
      djac(0, d) = dg * inv_n;
      dout[1 + d] = dl * inv_n;
    }
    return (r2 + cfg.gamma1 * (gl * gl / q)) * inv_n;
  };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    BatchGradient bg = parameter_gradient(params, batch, adjoint, cfg.workers);
    EpochRecord rec;
    for (std::size_t i = 0; i < N; ++i) {
      rec.l_dyn += dyn_terms[i];
      rec.l_orth += orth_terms[i];
    }
    rec.l_zero = zero_term;
    rec.total = rec.l_dyn + cfg.gamma1 * rec.l_orth + cfg.gamma2 * rec.l_zero;
    history.epochs.push_back(rec);

    if (!std::isfinite(rec.total) || rec.total > cfg.divergence_guard) {
      history.diverged = true;
      if (write_files) {
        save_checkpoint(last_good, cfg.run_dir + "/last_good.qpck");
        write_history_csv(cfg.run_dir + "/history.csv", history);
      }
      auto t1 = std::chrono::steady_clock::now();
      history.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
      return {last_good, history};
    }

    adam.update(params.theta, bg.grad, cfg.learning_rate);
    params.trained_epochs = epoch_base + epoch + 1;

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      last_good = params;
      if (write_files)
        save_checkpoint(params, cfg.run_dir + "/ckpt_" +
                                    std::to_string(epoch + 1) + ".qpck");
    }
  }

  auto t1 = std::chrono::steady_clock::now();
  history.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  if (write_files) {
    save_checkpoint(params, cfg.run_dir + "/final.qpck");
    write_history_csv(cfg.run_dir + "/history.csv", history);
  }
  return {params, history};
}

} // namespace

TrainResult train(const DriftSystem& system, const Architecture& arch,
                  const TrainConfig& cfg) {
  return train_loop(system, init_network(arch, cfg.seed), cfg, 0);
}

TrainResult resume_train(const DriftSystem& system, const NetworkParams& start,
                         const TrainConfig& cfg) {
  return train_loop(system, start, cfg, start.trained_epochs);
}

ErrorMetrics approximation_errors(const NetworkParams& params,
                                  const AnalyticBenchmark& bench,
                                  const Box& region, std::size_t nx,
                                  std::size_t ny) {
  ErrorMetrics m;
  m.grid_nx = nx;
  m.grid_ny = ny;
  double max_dv2 = 0.0, max_v2 = 0.0, max_dl2 = 0.0, max_l2 = 0.0;
  const Vec& xbar = bench.xbar;
  for (std::size_t i = 0; i < nx; ++i) {
    double x1 = region.lo[0] + (region.hi[0] - region.lo[0]) * double(i) /
                                   double(nx - 1);
    for (std::size_t j = 0; j < ny; ++j) {
      double x2 = region.lo[1] + (region.hi[1] - region.lo[1]) * double(j) /
                                     double(ny - 1);
      Vec x = {x1, x2};
      Vec out = forward(params, x);
      double lift = 0.0;
      for (std::size_t d = 0; d < x.size(); ++d)
        lift += (x[d] - xbar[d]) * (x[d] - xbar[d]);
      double v_theta = out[0] + lift;
      double v_true = bench.quasipotential(x);
      Vec l_true = bench.rotational(x);
      double dv = v_theta - v_true;
      max_dv2 = std::max(max_dv2, dv * dv);
      max_v2 = std::max(max_v2, v_true * v_true);
      double dl2 = 0.0, l2 = 0.0;
      for (std::size_t d = 0; d < l_true.size(); ++d) {
        double dl = out[1 + d] - l_true[d];
        dl2 += dl * dl;
        l2 += l_true[d] * l_true[d];
      }
      max_dl2 = std::max(max_dl2, dl2);
      max_l2 = std::max(max_l2, l2);
    }
  }
  m.e_v = max_dv2 / max_v2;
  m.e_l = max_dl2 / max_l2;
  return m;
}

} // namespace qp
