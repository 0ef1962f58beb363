#include "qp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qp {

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat operator*(const Mat& x, const Mat& y) {
  if (x.cols != y.rows) throw std::invalid_argument("Mat multiply: shape mismatch");
  Mat r(x.rows, y.cols);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t k = 0; k < x.cols; ++k) {
      double v = x(i, k);
      for (std::size_t j = 0; j < y.cols; ++j) r(i, j) += v * y(k, j);
    }
  return r;
}

Mat operator+(const Mat& x, const Mat& y) {
  Mat r = x;
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] += y.a[i];
  return r;
}

Mat operator-(const Mat& x, const Mat& y) {
  Mat r = x;
  for (std::size_t i = 0; i < r.a.size(); ++i) r.a[i] -= y.a[i];
  return r;
}

Mat operator*(double s, const Mat& x) {
  Mat r = x;
  for (double& v : r.a) v *= s;
  return r;
}

Mat transpose(const Mat& x) {
  Mat r(x.cols, x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
  return r;
}

Vec matvec(const Mat& x, const Vec& v) {
  if (x.cols != v.size()) throw std::invalid_argument("matvec: shape mismatch");
  Vec r(x.rows, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) r[i] += x(i, j) * v[j];
  return r;
}

double frobenius_norm(const Mat& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(const Mat& x, const Mat& y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.a.size(); ++i)
    m = std::max(m, std::abs(x.a[i] - y.a[i]));
  return m;
}

namespace {

// Partial-pivot LU in place; returns permutation sign, fills perm.
double lu_decompose(Mat& a, std::vector<std::size_t>& perm) {
  std::size_t n = a.rows;
  perm.resize(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double sign = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (a(p, k) == 0.0) throw std::runtime_error("linalg: singular matrix");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(perm[k], perm[p]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      a(i, k) /= a(k, k);
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= a(i, k) * a(k, j);
    }
  }
  return sign;
}

Vec lu_solve(const Mat& lu, const std::vector<std::size_t>& perm, const Vec& b) {
  std::size_t n = lu.rows;
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
    x[i] /= lu(i, i);
  }
  return x;
}

} // namespace

Vec solve(Mat a, Vec b) {
  if (a.rows != a.cols || a.rows != b.size())
    throw std::invalid_argument("solve: shape mismatch");
  std::vector<std::size_t> perm;
  lu_decompose(a, perm);
  return lu_solve(a, perm, b);
}

Mat inverse(const Mat& a) {
  std::size_t n = a.rows;
  Mat lu = a;
  std::vector<std::size_t> perm;
  lu_decompose(lu, perm);
  Mat inv(n, n);
  Vec e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    Vec col = lu_solve(lu, perm, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  return inv;
}

double determinant(Mat a) {
  std::vector<std::size_t> perm;
  double det;
  try {
    det = lu_decompose(a, perm);
  } catch (const std::runtime_error&) {
    return 0.0;
  }
  for (std::size_t i = 0; i < a.rows; ++i) det *= a(i, i);
  return det;
}

SymEig sym_eig(Mat a) {
  if (a.rows != a.cols) throw std::invalid_argument("sym_eig: not square");
  std::size_t n = a.rows;
  Mat v = Mat::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });
  SymEig out;
  out.values.resize(n);
  out.vectors = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

std::vector<std::complex<double>> eigenvalues(const Mat& m) {
  if (m.rows != m.cols) throw std::invalid_argument("eigenvalues: not square");
  std::size_t n = m.rows;
  if (n == 1) return {std::complex<double>(m(0, 0), 0.0)};
  if (n == 2) {
    double tr = m(0, 0) + m(1, 1);
    double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double disc = tr * tr / 4.0 - det;
    if (disc >= 0.0) {
      double s = std::sqrt(disc);
      return {std::complex<double>(tr / 2.0 - s, 0.0),
              std::complex<double>(tr / 2.0 + s, 0.0)};
    }
    double s = std::sqrt(-disc);
    return {std::complex<double>(tr / 2.0, -s), std::complex<double>(tr / 2.0, s)};
  }
  if (n > 10) throw std::invalid_argument("eigenvalues: dimension > 10");

  // Francis-free plain QR iteration with Wilkinson-style trailing deflation;
  // adequate for the tiny, well-separated spectra showing up here.
  Mat a = m;
  std::vector<std::complex<double>> out;
  std::size_t k = n;
  int guard = 0;
  while (k > 2 && guard++ < 5000) {
    // Check subdiagonal for deflation.
    bool deflated = false;
    for (std::size_t i = k - 1; i >= 1; --i) {
      if (std::abs(a(i, i - 1)) <
          1e-14 * (std::abs(a(i, i)) + std::abs(a(i - 1, i - 1)) + 1e-300)) {
        if (i == k - 1) {
          out.emplace_back(a(k - 1, k - 1), 0.0);
          --k;
          deflated = true;
        }
        break;
      }
    }
    if (deflated) continue;
    // Shifted QR step on the leading k x k block via Gram-Schmidt QR.
    double shift = a(k - 1, k - 1);
    Mat b(k, k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) b(i, j) = a(i, j) - (i == j ? shift : 0.0);
    // QR by modified Gram-Schmidt.
    Mat q(k, k), r(k, k);
    for (std::size_t j = 0; j < k; ++j) {
      Vec v(k);
      for (std::size_t i = 0; i < k; ++i) v[i] = b(i, j);
      for (std::size_t p = 0; p < j; ++p) {
        double d = 0.0;
        for (std::size_t i = 0; i < k; ++i) d += q(i, p) * v[i];
        r(p, j) = d;
        for (std::size_t i = 0; i < k; ++i) v[i] -= d * q(i, p);
      }
      double nv = 0.0;
      for (double x : v) nv += x * x;
      nv = std::sqrt(nv);
      r(j, j) = nv;
      for (std::size_t i = 0; i < k; ++i) q(i, j) = nv > 1e-300 ? v[i] / nv : 0.0;
    }
    Mat rq = r * q;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) a(i, j) = rq(i, j) + (i == j ? shift : 0.0);
  }
  if (k == 1) {
    out.emplace_back(a(0, 0), 0.0);
  } else if (k == 2) {
    Mat tail(2, 2);
    tail(0, 0) = a(0, 0);
    tail(0, 1) = a(0, 1);
    tail(1, 0) = a(1, 0);
    tail(1, 1) = a(1, 1);
    for (auto ev : eigenvalues(tail)) out.push_back(ev);
  } else if (guard >= 5000) {
    throw std::runtime_error("eigenvalues: QR iteration did not converge");
  }
  std::sort(out.begin(), out.end(), [](auto x, auto y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return out;
}

Vec real_eigenvector(const Mat& a, double lambda) {
  std::size_t n = a.rows;
  Mat shifted = a;
  for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= lambda + 1e-10;
  Vec v(n, 1.0 / std::sqrt(double(n)));
  for (int it = 0; it < 50; ++it) {
    Vec w = solve(shifted, v);
    double nw = 0.0;
    for (double x : w) nw += x * x;
    nw = std::sqrt(nw);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
  }
  return v;
}

Mat solve_sylvester(const Mat& p, const Mat& q, const Mat& c) {
  std::size_t n = p.rows;
  if (p.cols != n || q.rows != n || q.cols != n || c.rows != n || c.cols != n)
    throw std::invalid_argument("solve_sylvester: shape mismatch");
  std::size_t m = n * n;
  Mat big(m, m);
  // vec(PX + XQ) = (I (x) P + Q^T (x) I) vec(X), column-major vec order;
  // with row-major indexing x(i,j) -> i*n+j the operator is
  // big[(i,j),(k,l)] = P(i,k) delta(j,l) + Q(l,j) delta(i,k).
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
          double v = 0.0;
          if (j == l) v += p(i, k);
          if (i == k) v += q(l, j);
          big(i * n + j, k * n + l) = v;
        }
  Vec rhs(m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rhs[i * n + j] = c(i, j);
  Vec x = solve(big, rhs);
  Mat out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = x[i * n + j];
  return out;
}

} // namespace qp
