#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qlab {

using Vec = std::vector<double>;

// ---------------------------------------------------------------- errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};

struct NotPositiveDefinite : Error {
  int pivot;
  NotPositiveDefinite(const std::string& what, int pivot_index)
      : Error(what), pivot(pivot_index) {}
};

struct ConvergenceError : Error {
  double residual;
  ConvergenceError(const std::string& what, double res)
      : Error(what), residual(res) {}
};

struct CapacityError : Error {
  using Error::Error;
};

struct OutOfDomain : Error {
  using Error::Error;
};

// ---------------------------------------------------------------- matrix

class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}

  static DenseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }
  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  bool is_symmetric(double tol = 1e-12) const;
  void require_finite(const char* who) const;

 private:
  int rows_ = 0, cols_ = 0;
  Vec a_;
};

DenseMatrix operator*(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& m);
DenseMatrix scaled(const DenseMatrix& m, double c);
Vec matvec(const DenseMatrix& m, const Vec& x);
double dot(const Vec& x, const Vec& y);
double norm2(const Vec& x);
double max_abs(const DenseMatrix& m);
double frob_norm(const DenseMatrix& m);
DenseMatrix submatrix(const DenseMatrix& m, const std::vector<int>& rows,
                      const std::vector<int>& cols);

// ---------------------------------------------------------------- factorizations

struct EigenDecomposition {
  Vec values;          // descending
  DenseMatrix vectors; // orthonormal columns, vectors(:,k) pairs with values[k]
};

// Cyclic Jacobi for symmetric matrices. Throws InvalidInput on asymmetric or
// non-finite input.
EigenDecomposition sym_eigen(const DenseMatrix& m);

// Lower-triangular L with L L^T = m. Throws NotPositiveDefinite with the
// failing pivot index.
DenseMatrix cholesky(const DenseMatrix& m);

double logdet_from_cholesky(const DenseMatrix& chol_lower);

// Solves L y = b (forward) and L^T x = y (backward) for a Cholesky factor.
Vec cholesky_solve(const DenseMatrix& chol_lower, const Vec& b);
Vec forward_subst(const DenseMatrix& lower, const Vec& b);
Vec backward_subst_transposed(const DenseMatrix& lower, const Vec& b);

DenseMatrix spd_inverse(const DenseMatrix& m);

// m_KK - m_KB m_BB^{-1} m_BK for the index split keep / complement.
DenseMatrix schur_complement(const DenseMatrix& m, const std::vector<int>& keep);

struct PowerPairResult {
  double lambda0;
  Vec v0;        // entrywise positive, unit norm
  double lambda1;
};

// Top two eigenvalues of a symmetric matrix with nonnegative entries by power
// iteration plus one deflation step.
PowerPairResult power_pair(const DenseMatrix& m, double tol = 1e-12,
                           int max_iter = 100000);

// ---------------------------------------------------------------- quadrature

struct QuadratureGrid {
  enum class Kind { gauss_hermite, uniform_truncated };
  Vec nodes;
  Vec weights;  // absorbed weights: integral f(x) dx ~ sum w_i f(x_i)
  Kind kind = Kind::gauss_hermite;

  // weight against e^{-x^2}: w_i e^{-x_i^2}
  double gauss_weight(int i) const;
};

// Absorbed-weight Gauss-Hermite rule; order capped at 300 (weights would
// otherwise overflow the double range).
QuadratureGrid gauss_hermite(int order);

// Scaled copy: nodes*s, weights*s.
QuadratureGrid scaled_grid(const QuadratureGrid& g, double s);

// Trapezoid rule on [-half_width, half_width].
QuadratureGrid uniform_truncated(int order, double half_width);

// ---------------------------------------------------------------- rng

// Counter-based stream: every draw is a pure function of
// (seed, stream_id, counter), so chains are splittable and order-independent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }

  std::uint64_t next_u64();
  double uniform();       // strictly inside (0,1)
  double normal();        // standard normal, Box-Muller
  void fill_normal(Vec& out);

 private:
  std::uint64_t seed_, stream_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------- small helpers

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-13, int max_depth = 48);

struct LinearFit {
  double slope, intercept, r_squared;
};
LinearFit linear_fit(const Vec& x, const Vec& y);

// log(sum_i s_i exp(a_i)) with signs s_i; the total must be positive.
double log_sum_signed_exp(const Vec& log_abs, const std::vector<int>& signs);

double poly_min(const Vec& coeffs_constant_first, double lo, double hi);

}  // namespace qlab
