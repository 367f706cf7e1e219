#include "qlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qlab {

// ---------------------------------------------------------------- matrix

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  double scale = max_abs(*this);
  if (scale == 0.0) return true;
  for (int i = 0; i < rows_; ++i)
    for (int j = i + 1; j < cols_; ++j)
      if (std::fabs((*this)(i, j) - (*this)(j, i)) > tol * scale) return false;
  return true;
}

void DenseMatrix::require_finite(const char* who) const {
  for (double v : a_)
    if (!std::isfinite(v)) throw InvalidInput(std::string(who) + ": non-finite entry");
}

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: dimension mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data() + static_cast<size_t>(k) * b.cols();
      double* crow = c.data() + static_cast<size_t>(i) * c.cols();
      for (int j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("matrix add: dimension mismatch");
  DenseMatrix c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) += b(i, j);
  return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInput("matrix sub: dimension mismatch");
  DenseMatrix c = a;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) c(i, j) -= b(i, j);
  return c;
}

DenseMatrix transpose(const DenseMatrix& m) {
  DenseMatrix t(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

DenseMatrix scaled(const DenseMatrix& m, double c) {
  DenseMatrix s = m;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) s(i, j) *= c;
  return s;
}

Vec matvec(const DenseMatrix& m, const Vec& x) {
  if (static_cast<int>(x.size()) != m.cols())
    throw InvalidInput("matvec: dimension mismatch");
  Vec y(m.rows(), 0.0);
  for (int i = 0; i < m.rows(); ++i) {
    const double* row = m.data() + static_cast<size_t>(i) * m.cols();
    double s = 0.0;
    for (int j = 0; j < m.cols(); ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

double dot(const Vec& x, const Vec& y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(const Vec& x) { return std::sqrt(dot(x, x)); }

double max_abs(const DenseMatrix& m) {
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) s = std::max(s, std::fabs(m(i, j)));
  return s;
}

double frob_norm(const DenseMatrix& m) {
  double s = 0.0;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
  return std::sqrt(s);
}

DenseMatrix submatrix(const DenseMatrix& m, const std::vector<int>& rows,
                      const std::vector<int>& cols) {
  DenseMatrix s(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) s(static_cast<int>(i), static_cast<int>(j)) = m(rows[i], cols[j]);
  return s;
}

// ---------------------------------------------------------------- eigen

EigenDecomposition sym_eigen(const DenseMatrix& m) {
  m.require_finite("sym_eigen");
  if (!m.is_symmetric()) throw InvalidInput("sym_eigen: matrix not symmetric");
  int n = m.rows();
  DenseMatrix a = m;
  DenseMatrix v = DenseMatrix::identity(n);

  auto offdiag = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  double scale = max_abs(a);
  if (scale == 0.0) scale = 1.0;
  const double tol = 1e-15 * scale * n;
  for (int sweep = 0; sweep < 100; ++sweep) {
    if (offdiag() <= tol) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = a(p, q);
        if (std::fabs(apq) <= 1e-18 * scale) continue;
        double app = a(p, p), aqq = a(q, q);
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        double tau = s / (1.0 + c);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          if (k != p && k != q) {
            double akp = a(k, p), akq = a(k, q);
            a(k, p) = a(p, k) = akp - s * (akq + tau * akp);
            a(k, q) = a(q, k) = akq + s * (akp - tau * akq);
          }
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp - s * (vkq + tau * vkp);
          v(k, q) = vkq + s * (vkp - tau * vkq);
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) > a(j, j); });
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = DenseMatrix(n, n);
  for (int k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (int i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
  }
  return out;
}

// ---------------------------------------------------------------- cholesky

DenseMatrix cholesky(const DenseMatrix& m) {
  m.require_finite("cholesky");
  if (!m.is_symmetric()) throw InvalidInput("cholesky: matrix not symmetric");
  int n = m.rows();
  DenseMatrix l(n, n);
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0)
      throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                    " is " + std::to_string(d),
                                j);
    double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      const double* li = l.data() + static_cast<size_t>(i) * n;
      const double* lj = l.data() + static_cast<size_t>(j) * n;
      for (int k = 0; k < j; ++k) s -= li[k] * lj[k];
      l(i, j) = s / ljj;
    }
  }
  return l;
}

double logdet_from_cholesky(const DenseMatrix& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

Vec forward_subst(const DenseMatrix& l, const Vec& b) {
  int n = l.rows();
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    const double* li = l.data() + static_cast<size_t>(i) * n;
    for (int k = 0; k < i; ++k) s -= li[k] * y[k];
    y[i] = s / li[i];
  }
  return y;
}

Vec backward_subst_transposed(const DenseMatrix& l, const Vec& b) {
  int n = l.rows();
  Vec x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
  return x;
}

Vec cholesky_solve(const DenseMatrix& l, const Vec& b) {
  return backward_subst_transposed(l, forward_subst(l, b));
}

DenseMatrix spd_inverse(const DenseMatrix& m) {
  DenseMatrix l = cholesky(m);
  int n = m.rows();
  DenseMatrix inv(n, n);
  Vec e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    e[j] = 1.0;
    Vec col = cholesky_solve(l, e);
    e[j] = 0.0;
    for (int i = 0; i < n; ++i) inv(i, j) = col[i];
  }
  // symmetrize away roundoff
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = inv(j, i) = v;
    }
  return inv;
}

DenseMatrix schur_complement(const DenseMatrix& m, const std::vector<int>& keep) {
  if (!m.is_symmetric()) throw InvalidInput("schur_complement: matrix not symmetric");
  int n = m.rows();
  std::vector<char> in_keep(n, 0);
  for (int k : keep) {
    if (k < 0 || k >= n) throw InvalidInput("schur_complement: keep index out of range");
    in_keep[k] = 1;
  }
  std::vector<int> drop;
  for (int i = 0; i < n; ++i)
    if (!in_keep[i]) drop.push_back(i);
  if (drop.empty()) return submatrix(m, keep, keep);

  DenseMatrix mbb = submatrix(m, drop, drop);
  DenseMatrix mkb = submatrix(m, keep, drop);
  DenseMatrix lbb = cholesky(mbb);  // NotPositiveDefinite if singular block
  int nk = static_cast<int>(keep.size());
  DenseMatrix out = submatrix(m, keep, keep);
  // out -= mkb mbb^{-1} mkb^T
  std::vector<Vec> solved(nk);
  for (int i = 0; i < nk; ++i) {
    Vec row(drop.size());
    for (size_t j = 0; j < drop.size(); ++j) row[j] = mkb(i, static_cast<int>(j));
    solved[i] = cholesky_solve(lbb, row);
  }
  for (int i = 0; i < nk; ++i)
    for (int j = 0; j < nk; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < drop.size(); ++k) s += mkb(i, static_cast<int>(k)) * solved[j][k];
      out(i, j) -= s;
    }
  for (int i = 0; i < nk; ++i)
    for (int j = i + 1; j < nk; ++j) {
      double v = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = out(j, i) = v;
    }
  return out;
}

// ---------------------------------------------------------------- power iteration

PowerPairResult power_pair(const DenseMatrix& m, double tol, int max_iter) {
  if (!m.is_symmetric()) throw InvalidInput("power_pair: matrix not symmetric");
  int n = m.rows();
  auto iterate = [&](const Vec& start, const Vec* deflate, double lam0,
                     double& lambda_out) {
    Vec v = start;
    double nv = norm2(v);
    for (double& x : v) x /= nv;
    double lam = 0.0, lam_prev = 1e300;
    int it = 0;
    for (; it < max_iter; ++it) {
      Vec w = matvec(m, v);
      if (deflate) {
        double c = dot(*deflate, v) * lam0;
        for (int i = 0; i < n; ++i) w[i] -= c * (*deflate)[i];
      }
      double nw = norm2(w);
      if (nw == 0.0) {
        lambda_out = 0.0;
        return v;
      }
      lam = dot(v, w);
      for (int i = 0; i < n; ++i) v[i] = w[i] / nw;
      if (std::fabs(lam - lam_prev) <= tol * std::max(1.0, std::fabs(lam))) break;
      lam_prev = lam;
    }
    if (it >= max_iter) {
      Vec w = matvec(m, v);
      double res = 0.0;
      for (int i = 0; i < n; ++i) res += (w[i] - lam * v[i]) * (w[i] - lam * v[i]);
      throw ConvergenceError("power_pair: no convergence", std::sqrt(res));
    }
    lambda_out = lam;
    return v;
  };

  Vec start(n, 1.0);
  PowerPairResult r;
  r.v0 = iterate(start, nullptr, 0.0, r.lambda0);
  // Perron vector sign: make it entrywise positive.
  double s = 0.0;
  for (double x : r.v0) s += x;
  if (s < 0)
    for (double& x : r.v0) x = -x;

  if (n == 1) {
    r.lambda1 = 0.0;
    return r;
  }
  // deflate and start from a vector orthogonal to v0
  Vec start1(n);
  for (int i = 0; i < n; ++i) start1[i] = (i % 2 ? 1.0 : -1.0) + 1e-3 * (i + 1) / n;
  double c = dot(start1, r.v0);
  for (int i = 0; i < n; ++i) start1[i] -= c * r.v0[i];
  if (norm2(start1) < 1e-12) {
    start1[0] += 1.0;
    c = dot(start1, r.v0);
    for (int i = 0; i < n; ++i) start1[i] -= c * r.v0[i];
  }
  iterate(start1, &r.v0, r.lambda0, r.lambda1);
  return r;
}

// ---------------------------------------------------------------- quadrature

double QuadratureGrid::gauss_weight(int i) const {
  return weights[i] * std::exp(-nodes[i] * nodes[i]);
}

QuadratureGrid gauss_hermite(int order) {
  if (order < 1) throw InvalidInput("gauss_hermite: order must be >= 1");
  if (order > 300)
    throw CapacityError("gauss_hermite: order > 300 would overflow the absorbed weights");
  int n = order;
  Vec x(n), w(n);
  Vec root((n + 1) / 2);  // positive roots, descending
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    // initial guesses, then Newton on the orthonormal recurrence
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(n, 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * root[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * root[1];
    else
      z = 2.0 * z - root[i - 2];
    double pp = 0.0;
    for (int its = 0; its < 200; ++its) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      double z1 = z;
      z = z1 - p1 / pp;
      if (std::fabs(z - z1) <= 1e-15 * std::max(1.0, std::fabs(z))) break;
    }
    root[i] = z;
    // absorbed weight 2 e^{z^2} / pp^2; rerun the recurrence scaled by
    // e^{-z^2/2} so nothing overflows
    double p1 = pim4 * std::exp(-0.5 * z * z), p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      double p3 = p2;
      p2 = p1;
      p1 = z * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
    }
    double pps = std::sqrt(2.0 * n) * p2;
    double wa = 2.0 / (pps * pps);
    x[i] = -z;          // fill ascending: most negative first
    x[n - 1 - i] = z;
    w[i] = wa;
    w[n - 1 - i] = wa;
  }
  QuadratureGrid g;
  g.nodes = std::move(x);
  g.weights = std::move(w);
  g.kind = QuadratureGrid::Kind::gauss_hermite;
  return g;
}

QuadratureGrid scaled_grid(const QuadratureGrid& g, double s) {
  if (s <= 0) throw InvalidInput("scaled_grid: scale must be positive");
  QuadratureGrid out = g;
  for (double& v : out.nodes) v *= s;
  for (double& v : out.weights) v *= s;
  return out;
}

QuadratureGrid uniform_truncated(int order, double half_width) {
  if (order < 2 || half_width <= 0)
    throw InvalidInput("uniform_truncated: need order >= 2 and positive width");
  QuadratureGrid g;
  g.kind = QuadratureGrid::Kind::uniform_truncated;
  g.nodes.resize(order);
  g.weights.resize(order);
  double h = 2.0 * half_width / (order - 1);
  for (int i = 0; i < order; ++i) {
    g.nodes[i] = -half_width + i * h;
    g.weights[i] = (i == 0 || i == order - 1) ? 0.5 * h : h;
  }
  return g;
}

// ---------------------------------------------------------------- rng

static inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t RngStream::next_u64() {
  std::uint64_t c = counter_++;
  return mix64(mix64(mix64(seed_) ^ stream_) ^ c);
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform(), u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 6.283185307179586476925287 * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

void RngStream::fill_normal(Vec& out) {
  for (double& v : out) v = normal();
}

// ---------------------------------------------------------------- helpers

static double simpson_rec(const std::function<double(double)>& f, double a,
                          double fa, double b, double fb, double fm, double whole,
                          double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return simpson_rec(f, a, fa, m, fm, flm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, fm, b, fb, frm, right, 0.5 * tol, depth - 1);
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, fa, b, fb, fm, whole, tol, max_depth);
}

LinearFit linear_fit(const Vec& x, const Vec& y) {
  size_t n = x.size();
  if (n < 2 || y.size() != n) throw InvalidInput("linear_fit: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double denom = n * sxx - sx * sx;
  LinearFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0, ymean = sy / n;
  for (size_t i = 0; i < n; ++i) {
    double pred = fit.slope * x[i] + fit.intercept;
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ymean) * (y[i] - ymean);
  }
  fit.r_squared = ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
  return fit;
}

double log_sum_signed_exp(const Vec& log_abs, const std::vector<int>& signs) {
  if (log_abs.empty()) throw InvalidInput("log_sum_signed_exp: empty");
  double mx = -1e300;
  for (double v : log_abs) mx = std::max(mx, v);
  double s = 0.0;
  for (size_t i = 0; i < log_abs.size(); ++i)
    s += signs[i] * std::exp(log_abs[i] - mx);
  if (s <= 0.0) throw Error("log_sum_signed_exp: non-positive total");
  return mx + std::log(s);
}

double poly_min(const Vec& c, double lo, double hi) {
  auto eval = [&](double x) {
    double v = 0.0;
    for (size_t k = c.size(); k-- > 0;) v = v * x + c[k];
    return v;
  };
  auto deriv = [&](double x) {
    double v = 0.0;
    for (size_t k = c.size(); k-- > 1;) v = v * x + k * c[k];
    return v;
  };
  const int grid = 2001;
  double best_x = lo, best = eval(lo);
  for (int i = 1; i < grid; ++i) {
    double x = lo + (hi - lo) * i / (grid - 1);
    double v = eval(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  // Newton polish on the derivative
  double x = best_x;
  for (int it = 0; it < 60; ++it) {
    double d1 = deriv(x);
    double h = 1e-6 * std::max(1.0, std::fabs(x));
    double d2 = (deriv(x + h) - deriv(x - h)) / (2.0 * h);
    if (d2 <= 0) break;
    double step = d1 / d2;
    x -= step;
    if (x < lo || x > hi) {
      x = best_x;
      break;
    }
    if (std::fabs(step) < 1e-14 * std::max(1.0, std::fabs(x))) break;
  }
  return std::min(best, eval(x));
}

}  // namespace qlab
