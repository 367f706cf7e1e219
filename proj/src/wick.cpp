#include "qlab/wick.hpp"

#include <cmath>

namespace qlab::wick {

double Polynomial::operator()(double x) const {
  double v = 0.0;
  for (size_t k = coeffs.size(); k-- > 0;) v = v * x + coeffs[k];
  return v;
}

int Polynomial::degree() const {
  for (size_t k = coeffs.size(); k-- > 0;)
    if (coeffs[k] != 0.0) return static_cast<int>(k);
  return 0;
}

bool Polynomial::bounded_below() const {
  int d = degree();
  if (d == 0) return true;
  return d % 2 == 0 && coeffs[d] > 0.0;
}

void Polynomial::trim() {
  while (coeffs.size() > 1 && coeffs.back() == 0.0) coeffs.pop_back();
}

Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  Vec c(std::max(a.coeffs.size(), b.coeffs.size()), 0.0);
  for (size_t i = 0; i < a.coeffs.size(); ++i) c[i] += a.coeffs[i];
  for (size_t i = 0; i < b.coeffs.size(); ++i) c[i] += b.coeffs[i];
  return Polynomial(std::move(c));
}

Polynomial scaled(const Polynomial& p, double c) {
  Vec out = p.coeffs;
  for (double& v : out) v *= c;
  return Polynomial(std::move(out));
}

double hermite(int n, double x) {
  if (n < 0) throw InvalidInput("hermite: negative order");
  double h0 = 1.0;
  if (n == 0) return h0;
  double h1 = x;
  for (int k = 1; k < n; ++k) {
    double h2 = x * h1 - k * h0;
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

double hermite_min(int n) {
  if (n % 2 != 0) throw InvalidInput("hermite_min: odd-degree Hermite is unbounded below");
  if (n == 0) return 1.0;
  // h_n has all its zeros in |x| <= sqrt(4n); the minimum sits between zeros.
  double hw = std::sqrt(4.0 * n) + 2.0;
  const int grid = 4001;
  double best = 1e300;
  for (int i = 0; i < grid; ++i) {
    double x = -hw + 2.0 * hw * i / (grid - 1);
    best = std::min(best, hermite(n, x));
  }
  // golden-section refine around the best grid point
  double lo = -hw, hi = hw, step = 2.0 * hw / (grid - 1);
  for (int i = 0; i < grid; ++i) {
    double x = -hw + 2.0 * hw * i / (grid - 1);
    if (hermite(n, x) == best) {
      lo = x - step;
      hi = x + step;
      break;
    }
  }
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  for (int it = 0; it < 120; ++it) {
    if (hermite(n, c1) < hermite(n, c2)) {
      b = c2;
    } else {
      a = c1;
    }
    c1 = b - gr * (b - a);
    c2 = a + gr * (b - a);
  }
  return std::min(best, hermite(n, 0.5 * (a + b)));
}

static double falling_coeff(int n, int j) {
  // n! / ((n-2j)! j! 2^j)
  double v = 1.0;
  for (int k = n - 2 * j + 1; k <= n; ++k) v *= k;
  for (int k = 1; k <= j; ++k) v /= 2.0 * k;
  return v;
}

WickPolynomial wick_power(int n, double c) {
  if (n < 0) throw InvalidInput("wick_power: negative power");
  if (c < 0) throw InvalidInput("wick_power: negative variance");
  WickPolynomial w;
  Vec base(n + 1, 0.0);
  base[n] = 1.0;
  w.base = Polynomial(base);
  w.variance = c;
  Vec e(n + 1, 0.0);
  for (int j = 0; 2 * j <= n; ++j) {
    double sign = (j % 2 == 0) ? 1.0 : -1.0;
    e[n - 2 * j] = sign * falling_coeff(n, j) * std::pow(c, j);
  }
  w.expanded = Polynomial(e);
  return w;
}

Polynomial wick_ordered(const Polynomial& p, double c) {
  Polynomial out;
  for (size_t k = 0; k < p.coeffs.size(); ++k) {
    if (p.coeffs[k] == 0.0) continue;
    out = out + scaled(wick_power(static_cast<int>(k), c).expanded, p.coeffs[k]);
  }
  if (out.coeffs.empty()) out.coeffs = {0.0};
  return out;
}

static double isserlis_rec(const DenseMatrix& cov, std::vector<int>& idx) {
  size_t n = idx.size();
  if (n == 0) return 1.0;
  int first = idx[0];
  double total = 0.0;
  for (size_t k = 1; k < n; ++k) {
    double c = cov(first, idx[k]);
    if (c != 0.0) {
      std::vector<int> rest;
      rest.reserve(n - 2);
      for (size_t j = 1; j < n; ++j)
        if (j != k) rest.push_back(idx[j]);
      total += c * isserlis_rec(cov, rest);
    }
  }
  return total;
}

double isserlis(const DenseMatrix& cov, const std::vector<int>& indices) {
  if (indices.size() % 2 != 0) return 0.0;
  if (indices.size() > 16)
    throw CapacityError("isserlis: more than 16 indices (matching count explodes)");
  for (int i : indices)
    if (i < 0 || i >= cov.rows()) throw InvalidInput("isserlis: index out of range");
  std::vector<int> idx = indices;
  return isserlis_rec(cov, idx);
}

double wick_cov(int n, int m, double cxy, double cx, double cy) {
  if (n < 0 || m < 0) throw InvalidInput("wick_cov: negative order");
  if (cx < 0 || cy < 0 || cxy * cxy > cx * cy * (1.0 + 1e-12))
    throw InvalidInput("wick_cov: covariance violates Cauchy-Schwarz");
  if (n != m) return 0.0;
  double fact = 1.0;
  for (int k = 2; k <= n; ++k) fact *= k;
  return fact * std::pow(cxy, n);
}

Vec change_ordering(int n, double delta) {
  if (n < 0) throw InvalidInput("change_ordering: negative order");
  Vec table(n / 2 + 1, 0.0);
  for (int j = 0; 2 * j <= n; ++j)
    table[j] = falling_coeff(n, j) * std::pow(delta, j);
  return table;
}

double diagram_value(const DenseMatrix& cov, const PairingDiagram& d) {
  if (d.n % 2 != 0 || static_cast<int>(d.pairs.size()) * 2 != d.n)
    throw InvalidInput("diagram_value: diagram has dangling legs");
  std::vector<char> seen(d.n, 0);
  for (auto [a, b] : d.pairs) {
    if (a < 0 || b < 0 || a >= d.n || b >= d.n || a == b || seen[a] || seen[b])
      throw InvalidInput("diagram_value: pairs are not a perfect matching");
    seen[a] = seen[b] = 1;
  }
  if (static_cast<int>(d.labels.size()) != d.n)
    throw InvalidInput("diagram_value: label count must equal leg count");
  double v = 1.0;
  for (auto [a, b] : d.pairs) v *= cov(d.labels[a], d.labels[b]);
  return v;
}

static void enumerate_rec(std::vector<int>& legs,
                          std::vector<std::pair<int, int>>& current,
                          std::vector<std::vector<std::pair<int, int>>>& out) {
  if (legs.empty()) {
    out.push_back(current);
    return;
  }
  int first = legs[0];
  for (size_t k = 1; k < legs.size(); ++k) {
    std::vector<int> rest;
    rest.reserve(legs.size() - 2);
    for (size_t j = 1; j < legs.size(); ++j)
      if (j != k) rest.push_back(legs[j]);
    current.emplace_back(first, legs[k]);
    enumerate_rec(rest, current, out);
    current.pop_back();
  }
}

std::vector<std::vector<std::pair<int, int>>> enumerate_matchings(int n) {
  if (n % 2 != 0) throw InvalidInput("enumerate_matchings: odd leg count");
  if (n > 16) throw CapacityError("enumerate_matchings: n > 16");
  std::vector<int> legs(n);
  for (int i = 0; i < n; ++i) legs[i] = i;
  std::vector<std::vector<std::pair<int, int>>> out;
  std::vector<std::pair<int, int>> current;
  if (n == 0) {
    out.push_back(current);
    return out;
  }
  enumerate_rec(legs, current, out);
  return out;
}

double double_factorial(int n) {
  double v = 1.0;
  for (int k = n; k > 1; k -= 2) v *= k;
  return v;
}

}  // namespace qlab::wick
