#pragma once

#include <string>

#include "qp/field.hpp"
#include "qp/mpp.hpp"

namespace qp {

enum class ExitCase { A, B };

struct PrefactorSettings {
  // Reproduce the printed factor-2 Riccati variant (all Hessians of V
  // halved); kept for comparison tables, off by default.
  bool riccati_paper_convention = false;
  double hessian_step = 1e-3;
  // Relative disagreement between the finite-difference Hessian and the
  // Lyapunov/Riccati route above which a warning is recorded.
  double cross_check_tolerance = 0.2;
};

struct PrefactorReport {
  ExitCase exit_case = ExitCase::A;
  double v_star = 0.0;     // barrier: quasipotential at the exit point/saddle
  double mu_star = 0.0;    // Case A
  double det_h_star = 0.0; // Case A tangential Hessian determinant
  double lambda_star = 0.0; // Case B positive eigenvalue of grad b at saddle
  HessianResult h_bar;      // Hessian of V at xbar (adopted convention)
  HessianResult h_star_full; // Case B: Hessian of V at the saddle
  double det_h_bar = 0.0;
  double div_integral = 0.0;
  double l_coefficient = 0.0; // L = l_coefficient * eps^epsilon_power
  double epsilon_power = 0.5; // 1/2 for Case A, 0 for Case B
  bool paper_convention = false;
  bool hessian_cross_check_warning = false;
  double hessian_cross_check_rel = 0.0;
  std::string field_backing;

  double prefactor(double eps) const;
};

// <1/2 grad V(x*) + l(x*), n(x*)>; errors if the (A3) positivity fails.
double mu_star(const PotentialField& field, const Vec& x_star, const Vec& normal);

// det of the Hessian of V at x* restricted to the tangent hyperplane of the
// boundary (orthonormal basis by Gram-Schmidt over coordinate vectors).
double tangential_hessian_det(const PotentialField& field, const Vec& x_star,
                              const Vec& normal, const PrefactorSettings& s = {});

PrefactorReport prefactor_case_a(const PotentialField& field,
                                 const DriftSystem& system,
                                 const Vec& x_star, const Vec& normal,
                                 const PathResult& path, const Vec& xbar,
                                 const PrefactorSettings& settings = {});

PrefactorReport prefactor_case_b(const PotentialField& field,
                                 const DriftSystem& system,
                                 const FixedPoint& saddle,
                                 const PathResult& path, const Vec& xbar,
                                 const PrefactorSettings& settings = {});

// WKB prefactor C(x) = sqrt(det Hbar / (2 pi eps)^n) exp(-div integral).
double wkb_prefactor(const PotentialField& field, const DriftSystem& system,
                     const Vec& xbar, const PathResult& path_to_x, double eps,
                     const PrefactorSettings& settings = {});

// L(eps) * exp(V*/eps); guards the exponent at 700.
double mean_exit_time(const PrefactorReport& report, double eps);

std::string report_to_json(const PrefactorReport& report);
PrefactorReport report_from_json(const std::string& text);

} // namespace qp
