#include "qp/field.hpp"

#include <cmath>
#include <stdexcept>

namespace qp {

PotentialField PotentialField::learned(NetworkParams params, Vec xbar) {
  if (params.arch.output_dim != params.arch.input_dim + 1)
    throw std::invalid_argument("PotentialField: output_dim != input_dim + 1");
  if (xbar.size() != params.arch.input_dim)
    throw std::invalid_argument("PotentialField: xbar dimension mismatch");
  PotentialField f;
  f.backing_ = Learned{std::move(params), std::move(xbar)};
  return f;
}

PotentialField PotentialField::analytic(AnalyticBenchmark bench) {
  PotentialField f;
  f.backing_ = Analytic{std::move(bench)};
  return f;
}

std::size_t PotentialField::dim() const {
  if (auto* l = std::get_if<Learned>(&backing_)) return l->params.arch.input_dim;
  return std::get<Analytic>(backing_).bench.system.dim;
}

FieldSample PotentialField::eval(const Vec& x) const {
  FieldSample s;
  if (auto* lf = std::get_if<Learned>(&backing_)) {
    std::size_t n = lf->params.arch.input_dim;
    EvalWithJacobian ev = forward_with_input_jacobian(lf->params, x);
    double lift = 0.0;
    s.grad_v.resize(n);
    s.l.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
      double dx = x[d] - lf->xbar[d];
      lift += dx * dx;
      s.grad_v[d] = ev.jacobian(0, d) + 2.0 * dx;
      s.l[d] = ev.outputs[1 + d];
      s.div_l += ev.jacobian(1 + d, d);
    }
    s.v = ev.outputs[0] + lift;
    return s;
  }
  const auto& bench = std::get<Analytic>(backing_).bench;
  s.v = bench.quasipotential(x);
  s.grad_v = bench.grad_quasipotential(x);
  s.l = bench.rotational(x);
  s.div_l = bench.div_rotational(x);
  return s;
}

namespace {

Mat hessian_fd_raw(const PotentialField& field, const Vec& x, double h) {
  std::size_t n = x.size();
  Mat hess(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    Vec gp = field.eval(xp).grad_v;
    Vec gm = field.eval(xm).grad_v;
    for (std::size_t i = 0; i < n; ++i)
      hess(i, j) = (gp[i] - gm[i]) / (2.0 * h);
  }
  // symmetrize
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double m = 0.5 * (hess(i, j) + hess(j, i));
      hess(i, j) = m;
      hess(j, i) = m;
    }
  return hess;
}

void count_signature(HessianResult& r) {
  SymEig eig = sym_eig(r.matrix);
  r.positive_eigenvalues = 0;
  r.negative_eigenvalues = 0;
  for (double v : eig.values) {
    if (v > 0) ++r.positive_eigenvalues;
    if (v < 0) ++r.negative_eigenvalues;
  }
}

double riccati_residual_of(const Mat& h, const Mat& q) {
  return frobenius_norm(h * h - (transpose(q) * h + h * q));
}

} // namespace

HessianResult hessian_fd(const PotentialField& field, const Vec& x, double h) {
  if (!(h > 0)) throw std::invalid_argument("hessian_fd: h > 0 required");
  Mat coarse = hessian_fd_raw(field, x, h);
  Mat fine = hessian_fd_raw(field, x, h / 2.0);
  HessianResult r;
  // Richardson: error of the central difference is O(h^2).
  r.matrix = (1.0 / 3.0) * (4.0 * fine - coarse);
  r.method = HessianMethod::finite_difference;
  r.fd_error_estimate = max_abs_diff(fine, coarse);
  count_signature(r);
  return r;
}

HessianResult lyapunov_hessian(const Mat& q_bar) {
  std::size_t n = q_bar.rows;
  for (auto ev : eigenvalues(q_bar))
    if (ev.real() <= 0)
      throw std::runtime_error(
          "lyapunov_hessian: -Q has an eigenvalue with nonnegative real part "
          "(not a stable fixed point); use riccati_newton");
  Mat sigma = solve_sylvester(q_bar, transpose(q_bar), Mat::identity(n));
  // enforce symmetry before inverting
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double m = 0.5 * (sigma(i, j) + sigma(j, i));
      sigma(i, j) = m;
      sigma(j, i) = m;
    }
  HessianResult r;
  r.matrix = inverse(sigma);
  r.method = HessianMethod::lyapunov;
  r.riccati_residual = riccati_residual_of(r.matrix, q_bar);
  count_signature(r);
  return r;
}

HessianResult riccati_newton(const Mat& q, const Mat& seed_h) {
  std::size_t n = q.rows;
  if (seed_h.rows != n || seed_h.cols != n)
    throw std::invalid_argument("riccati_newton: shape mismatch");
  if (max_abs_diff(seed_h, transpose(seed_h)) > 1e-8)
    throw std::invalid_argument("riccati_newton: seed not symmetric");
  Mat h = seed_h;
  Mat qt = transpose(q);
  double res = riccati_residual_of(h, q);
  for (int it = 0; it < 50 && res > 1e-10; ++it) {
    // Linearize: (H - Q^T) dH + dH (H - Q) = -R(H)
    Mat r = h * h - (qt * h + h * q);
    Mat dh = solve_sylvester(h - qt, h - q, -1.0 * r);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        double m = 0.5 * (dh(i, j) + dh(j, i));
        dh(i, j) = m;
        dh(j, i) = m;
      }
    h = h + dh;
    res = riccati_residual_of(h, q);
  }
  if (res > 1e-10)
    throw std::runtime_error("riccati_newton: no convergence, residual " +
                             std::to_string(res));
  HessianResult out;
  out.matrix = h;
  out.method = HessianMethod::riccati_newton;
  out.riccati_residual = res;
  count_signature(out);
  return out;
}

} // namespace qp
