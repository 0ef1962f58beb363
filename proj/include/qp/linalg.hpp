#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace qp {

using Vec = std::vector<double>;

// Small dense row-major matrix; dimensions here stay <= ~10.
struct Mat {
  std::size_t rows = 0, cols = 0;
  Vec a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  static Mat identity(std::size_t n);
};

Mat operator*(const Mat& x, const Mat& y);
Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator*(double s, const Mat& x);
Mat transpose(const Mat& x);
Vec matvec(const Mat& x, const Vec& v);

double frobenius_norm(const Mat& x);
double max_abs_diff(const Mat& x, const Mat& y);

// Solves A x = b by partial-pivot LU; throws on singular A.
Vec solve(Mat a, Vec b);
Mat inverse(const Mat& a);
double determinant(Mat a);

// Eigenvalues+vectors of a symmetric matrix by cyclic Jacobi rotations.
// Eigenvalues ascending; columns of vectors match.
struct SymEig {
  Vec values;
  Mat vectors;
};
SymEig sym_eig(Mat a);

// Eigenvalues of a general (possibly non-symmetric) small matrix:
// closed form for n<=2, unshifted QR iteration with Hessenberg start for
// 3 <= n <= 10.
std::vector<std::complex<double>> eigenvalues(const Mat& a);

// Real eigenvector for a real eigenvalue of a general matrix, by inverse
// iteration on (A - lambda I); unit norm.
Vec real_eigenvector(const Mat& a, double lambda);

// Solves the Sylvester equation P X + X Q = C for X (all n x n) through the
// vectorized n^2 x n^2 linear system.
Mat solve_sylvester(const Mat& p, const Mat& q, const Mat& c);

} // namespace qp
