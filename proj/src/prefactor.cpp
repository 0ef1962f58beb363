#include "qp/prefactor.hpp"

#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace qp {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_unit(const Vec& normal) {
  double n2 = 0.0;
  for (double v : normal) n2 += v * v;
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-8)
    throw std::invalid_argument("normal vector must have unit norm");
}

// Orthonormal basis of normal^perp, Gram-Schmidt over the coordinate vectors
// in index order (deterministic).
Mat tangent_basis(const Vec& normal) {
  std::size_t n = normal.size();
  std::vector<Vec> basis;
  for (std::size_t k = 0; k < n && basis.size() < n - 1; ++k) {
    Vec v(n, 0.0);
    v[k] = 1.0;
    double dn = 0.0;
    for (std::size_t d = 0; d < n; ++d) dn += v[d] * normal[d];
    for (std::size_t d = 0; d < n; ++d) v[d] -= dn * normal[d];
    for (const Vec& b : basis) {
      double db = 0.0;
      for (std::size_t d = 0; d < n; ++d) db += v[d] * b[d];
      for (std::size_t d = 0; d < n; ++d) v[d] -= db * b[d];
    }
    double nv = 0.0;
    for (double x : v) nv += x * x;
    nv = std::sqrt(nv);
    if (nv < 1e-8) continue;
    for (double& x : v) x /= nv;
    basis.push_back(v);
  }
  Mat b(n, n > 0 ? n - 1 : 0);
  for (std::size_t j = 0; j < basis.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) b(i, j) = basis[j][i];
  return b;
}

double cross_check_rel(const Mat& fd, const Mat& route) {
  double scale = 0.0;
  for (double v : route.a) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  return max_abs_diff(fd, route) / scale;
}

double hessian_scale(const PrefactorSettings& s) {
  return s.riccati_paper_convention ? 0.5 : 1.0;
}

} // namespace

double PrefactorReport::prefactor(double eps) const {
  return l_coefficient * std::pow(eps, epsilon_power);
}

double mu_star(const PotentialField& field, const Vec& x_star,
               const Vec& normal) {
  check_unit(normal);
  FieldSample s = field.eval(x_star);
  double mu = 0.0;
  for (std::size_t d = 0; d < x_star.size(); ++d)
    mu += (0.5 * s.grad_v[d] + s.l[d]) * normal[d];
  if (mu <= 0.0)
    throw std::runtime_error(
        "assumption (A3) violated: mu* = " + std::to_string(mu) + " <= 0");
  return mu;
}

double tangential_hessian_det(const PotentialField& field, const Vec& x_star,
                              const Vec& normal, const PrefactorSettings& s) {
  check_unit(normal);
  HessianResult h = hessian_fd(field, x_star, s.hessian_step);
  Mat hm = hessian_scale(s) * h.matrix;
  Mat b = tangent_basis(normal);
  Mat restricted = transpose(b) * hm * b;
  SymEig eig = sym_eig(restricted);
  for (double v : eig.values)
    if (v <= 0.0)
      throw std::runtime_error(
          "assumption (A3) violated: tangential Hessian not positive definite");
  return determinant(restricted);
}

namespace {

HessianResult adopted_h_bar(const PotentialField& field,
                            const DriftSystem& system, const Vec& xbar,
                            const PrefactorSettings& settings,
                            bool& warning, double& rel) {
  HessianResult fd = hessian_fd(field, xbar, settings.hessian_step);
  Mat q_bar = -1.0 * system.jacobian_at(xbar);
  HessianResult lyap = lyapunov_hessian(q_bar);
  rel = cross_check_rel(fd.matrix, lyap.matrix);
  warning = rel > settings.cross_check_tolerance;
  // The field's own Hessian is what the rest of the pipeline (barrier, path)
  // is built from; the Lyapunov route is the cross-check.
  HessianResult h = fd;
  h.matrix = hessian_scale(settings) * h.matrix;
  return h;
}

} // namespace

PrefactorReport prefactor_case_a(const PotentialField& field,
                                 const DriftSystem& system, const Vec& x_star,
                                 const Vec& normal, const PathResult& path,
                                 const Vec& xbar,
                                 const PrefactorSettings& settings) {
  if (path.status != PathStatus::converged)
    throw std::runtime_error("prefactor_case_a: path did not converge");
  PrefactorReport r;
  r.exit_case = ExitCase::A;
  r.epsilon_power = 0.5;
  r.paper_convention = settings.riccati_paper_convention;
  r.field_backing = field.is_learned() ? "learned" : "analytic";
  r.mu_star = mu_star(field, x_star, normal);
  r.det_h_star = tangential_hessian_det(field, x_star, normal, settings);
  r.h_bar = adopted_h_bar(field, system, xbar, settings,
                          r.hessian_cross_check_warning,
                          r.hessian_cross_check_rel);
  r.det_h_bar = determinant(r.h_bar.matrix);
  if (r.det_h_bar <= 0.0)
    throw std::runtime_error("prefactor_case_a: det Hbar not positive");
  r.div_integral = divergence_integral(field, system, path, true, xbar);
  r.v_star = field.value(x_star);
  // The exit rate is a boundary flux proportional to the stationary-density
  // prefactor C(x*) = C(xbar)*exp(-div_integral), so the mean exit time
  // carries 1/C(x*): the exponent sign is opposite the WKB one.  Verified
  // against Euler-Maruyama exit statistics (see acceptance suite).
  r.l_coefficient = (1.0 / r.mu_star) *
                    std::sqrt(2.0 * kPi * r.det_h_star / r.det_h_bar) *
                    std::exp(r.div_integral);
  return r;
}

PrefactorReport prefactor_case_b(const PotentialField& field,
                                 const DriftSystem& system,
                                 const FixedPoint& saddle,
                                 const PathResult& path, const Vec& xbar,
                                 const PrefactorSettings& settings) {
  if (path.status != PathStatus::converged)
    throw std::runtime_error("prefactor_case_b: path did not converge");
  PrefactorReport r;
  r.exit_case = ExitCase::B;
  r.epsilon_power = 0.0;
  r.paper_convention = settings.riccati_paper_convention;
  r.field_backing = field.is_learned() ? "learned" : "analytic";

  Mat jac = system.jacobian_at(saddle.location);
  std::size_t positive = 0;
  for (auto ev : eigenvalues(jac))
    if (ev.real() > 0) {
      ++positive;
      r.lambda_star = ev.real();
    }
  if (positive != 1)
    throw std::runtime_error(
        "assumption (B1) violated: saddle needs a single positive eigenvalue");

  r.h_bar = adopted_h_bar(field, system, xbar, settings,
                          r.hessian_cross_check_warning,
                          r.hessian_cross_check_rel);
  r.det_h_bar = determinant(r.h_bar.matrix);

  HessianResult h_star = hessian_fd(field, saddle.location, settings.hessian_step);
  // Cross-check against the Riccati route seeded from the FD result.
  HessianResult riccati = riccati_newton(-1.0 * jac, h_star.matrix);
  double rel = cross_check_rel(h_star.matrix, riccati.matrix);
  if (rel > settings.cross_check_tolerance) r.hessian_cross_check_warning = true;
  r.hessian_cross_check_rel = std::max(r.hessian_cross_check_rel, rel);
  h_star.matrix = hessian_scale(settings) * h_star.matrix;
  SymEig eig = sym_eig(h_star.matrix);
  std::size_t pos = 0, neg = 0;
  for (double v : eig.values) (v > 0 ? pos : neg) += 1;
  if (neg != 1 || pos != h_star.matrix.rows - 1)
    throw std::runtime_error(
        "assumption (B4) violated: H* needs n-1 positive and 1 negative "
        "eigenvalue");
  r.h_star_full = h_star;

  r.div_integral =
      divergence_integral(field, system, path, true, xbar, saddle.location);
  r.v_star = field.value(saddle.location);
  double det_star = determinant(h_star.matrix);
  // Same sign convention as Case A: mean exit time ~ 1/C(x*).
  r.l_coefficient = (kPi / r.lambda_star) *
                    std::sqrt(std::abs(det_star) / r.det_h_bar) *
                    std::exp(r.div_integral);
  return r;
}

double wkb_prefactor(const PotentialField& field, const DriftSystem& system,
                     const Vec& xbar, const PathResult& path_to_x, double eps,
                     const PrefactorSettings& settings) {
  bool warn = false;
  double rel = 0.0;
  HessianResult h_bar = adopted_h_bar(field, system, xbar, settings, warn, rel);
  double det = determinant(h_bar.matrix);
  double integral =
      divergence_integral(field, system, path_to_x, true, xbar);
  std::size_t n = xbar.size();
  return std::sqrt(det / std::pow(2.0 * kPi * eps, double(n))) *
         std::exp(-integral);
}

double mean_exit_time(const PrefactorReport& report, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("mean_exit_time: eps > 0 required");
  double exponent = report.v_star / eps;
  if (exponent > 700.0)
    throw std::runtime_error(
        "mean_exit_time: V*/eps > 700 overflows double precision; use a "
        "larger eps");
  return report.prefactor(eps) * std::exp(exponent);
}

namespace {

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j) {
  Mat m(j.size(), j.empty() ? 0 : j[0].size());
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t k = 0; k < m.cols; ++k) m(i, k) = j[i][k].get<double>();
  return m;
}

} // namespace

std::string report_to_json(const PrefactorReport& r) {
  nlohmann::json j;
  j["case"] = r.exit_case == ExitCase::A ? "A" : "B";
  j["V_star"] = r.v_star;
  j["mu_star"] = r.mu_star;
  j["det_h_star"] = r.det_h_star;
  j["lambda_star"] = r.lambda_star;
  j["H_bar"] = mat_to_json(r.h_bar.matrix);
  j["H_star"] = mat_to_json(r.h_star_full.matrix);
  j["det_H_bar"] = r.det_h_bar;
  j["div_integral"] = r.div_integral;
  j["L_coefficient"] = r.l_coefficient;
  j["epsilon_power"] = r.epsilon_power;
  j["paper_convention"] = r.paper_convention;
  j["hessian_cross_check_warning"] = r.hessian_cross_check_warning;
  j["hessian_cross_check_rel"] = r.hessian_cross_check_rel;
  j["field_backing"] = r.field_backing;
  return j.dump(2);
}

PrefactorReport report_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PrefactorReport r;
  r.exit_case = j.at("case").get<std::string>() == "A" ? ExitCase::A : ExitCase::B;
  r.v_star = j.at("V_star").get<double>();
  r.mu_star = j.at("mu_star").get<double>();
  r.det_h_star = j.at("det_h_star").get<double>();
  r.lambda_star = j.at("lambda_star").get<double>();
  r.h_bar.matrix = mat_from_json(j.at("H_bar"));
  r.h_star_full.matrix = mat_from_json(j.at("H_star"));
  r.det_h_bar = j.at("det_H_bar").get<double>();
  r.div_integral = j.at("div_integral").get<double>();
  r.l_coefficient = j.at("L_coefficient").get<double>();
  r.epsilon_power = j.at("epsilon_power").get<double>();
  r.paper_convention = j.at("paper_convention").get<bool>();
  r.hessian_cross_check_warning = j.at("hessian_cross_check_warning").get<bool>();
  r.hessian_cross_check_rel = j.at("hessian_cross_check_rel").get<double>();
  r.field_backing = j.at("field_backing").get<std::string>();
  return r;
}

} // namespace qp
