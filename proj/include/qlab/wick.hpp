#pragma once

#include "qlab/numerics.hpp"

#include <utility>

namespace qlab::wick {

// Coefficients with the constant term first.
struct Polynomial {
  Vec coeffs;

  Polynomial() = default;
  explicit Polynomial(Vec c) : coeffs(std::move(c)) { trim(); }

  double operator()(double x) const;
  int degree() const;
  bool bounded_below() const;  // constant, or even degree with positive lead
  void trim();
};

Polynomial operator+(const Polynomial& a, const Polynomial& b);
Polynomial scaled(const Polynomial& p, double c);

// Probabilists' Hermite polynomial, three-term recurrence
// h_{n+1} = x h_n - n h_{n-1}.
double hermite(int n, double x);

// min over the reals of h_n (finite for even n).
double hermite_min(int n);

struct WickPolynomial {
  Polynomial base;      // x^n
  double variance = 0;  // c
  Polynomial expanded;  // :x^n:_c in the monomial basis
};

// :x^n:_c = c^{n/2} h_n(x/sqrt(c)) = sum_j (-1)^j n!/((n-2j)! j! 2^j) c^j x^{n-2j}
WickPolynomial wick_power(int n, double c);

// Wick-order a whole polynomial term by term at variance c.
Polynomial wick_ordered(const Polynomial& p, double c);

// Sum over perfect matchings of products of covariance entries; zero for odd
// index count. Indices may repeat. Enforced limit: at most 16 indices.
double isserlis(const DenseMatrix& cov, const std::vector<int>& indices);

// E[:X^n: :Y^m:] = delta_{nm} n! cxy^n for Wick ordering at the true variances.
double wick_cov(int n, int m, double cxy, double cx, double cy);

// Coefficient table expressing :x^n:_{C1} = sum_j table[j] :x^{n-2j}:_{C2}
// with delta = c2 - c1: table[j] = n!/((n-2j)! j! 2^j) delta^j.
Vec change_ordering(int n, double delta);

struct PairingDiagram {
  int n = 0;                                 // number of legs, even
  std::vector<std::pair<int, int>> pairs;    // perfect matching on 0..n-1
  std::vector<int> labels;                   // leg -> covariance index
};

// Product of cov entries over the edges of a fully contracted diagram.
double diagram_value(const DenseMatrix& cov, const PairingDiagram& diagram);

// All perfect matchings of {0..n-1}; (n-1)!! of them.
std::vector<std::vector<std::pair<int, int>>> enumerate_matchings(int n);

double double_factorial(int n);

}  // namespace qlab::wick
