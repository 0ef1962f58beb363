#pragma once

#include <string>
#include <variant>

#include "qp/diffnet.hpp"
#include "qp/systems.hpp"

namespace qp {

struct FieldSample {
  double v = 0.0;
  Vec grad_v;
  Vec l;
  double div_l = 0.0;
};

// One evaluation surface over a quasipotential field, network-backed or
// analytic.
class PotentialField {
 public:
  struct Learned {
    NetworkParams params;
    Vec xbar;
  };
  struct Analytic {
    AnalyticBenchmark bench;
  };

  static PotentialField learned(NetworkParams params, Vec xbar);
  static PotentialField analytic(AnalyticBenchmark bench);

  std::size_t dim() const;
  bool is_learned() const { return std::holds_alternative<Learned>(backing_); }

  FieldSample eval(const Vec& x) const;
  double value(const Vec& x) const { return eval(x).v; }

 private:
  std::variant<Learned, Analytic> backing_;
};

enum class HessianMethod { finite_difference, lyapunov, riccati_newton };

struct HessianResult {
  Mat matrix;
  HessianMethod method = HessianMethod::finite_difference;
  double riccati_residual = 0.0; // ||H^2 - (Q^T H + H Q)||_F where applicable
  double fd_error_estimate = 0.0;
  std::size_t positive_eigenvalues = 0;
  std::size_t negative_eigenvalues = 0;
};

// Symmetrized central differences of grad V with Richardson refinement at
// h/2; the difference between the two levels is reported as the error
// estimate.
HessianResult hessian_fd(const PotentialField& field, const Vec& x,
                         double h = 1e-3);

// H = Sigma^{-1} where Q Sigma + Sigma Q^T = I, Q = -grad b(xbar); requires a
// stable fixed point (all eigenvalues of -Q with negative real part). The
// result satisfies H^2 = Q^T H + H Q.
HessianResult lyapunov_hessian(const Mat& q_bar);

// Newton iteration on R(H) = H^2 - (Q^T H + H Q), symmetric seed preserved;
// residual target 1e-10, at most 50 iterations.
HessianResult riccati_newton(const Mat& q, const Mat& seed_h);

} // namespace qp
