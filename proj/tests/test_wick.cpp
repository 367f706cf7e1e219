#include <doctest.h>

#include <cmath>

#include "qlab/numerics.hpp"
#include "qlab/wick.hpp"

using namespace qlab;
using namespace qlab::wick;

TEST_CASE("hermite values and generating function") {
  CHECK(hermite(0, 1.7) == 1.0);
  for (double x : {-1.5, 0.0, 0.3, 2.0}) {
    CHECK(hermite(2, x) == doctest::Approx(x * x - 1.0));
    CHECK(hermite(4, x) == doctest::Approx(x * x * x * x - 6.0 * x * x + 3.0));
  }
  CHECK_THROWS_AS(hermite(-1, 0.0), InvalidInput);

  // sum_{n<=40} z^n/n! h_n(x) = exp(z x - z^2/2) to 1e-8 on |z|,|x| <= 2
  for (double z : {-2.0, -0.7, 0.5, 2.0})
    for (double x : {-2.0, -0.3, 1.1, 2.0}) {
      double acc = 0.0, fact = 1.0;
      for (int n = 0; n <= 40; ++n) {
        if (n > 0) fact *= n;
        acc += std::pow(z, n) / fact * hermite(n, x);
      }
      CHECK(acc == doctest::Approx(std::exp(z * x - 0.5 * z * z)).epsilon(1e-8));
    }

  CHECK(hermite_min(4) == doctest::Approx(-6.0).epsilon(1e-9));
  CHECK(hermite_min(2) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("wick powers") {
  auto w41 = wick_power(4, 1.0);
  REQUIRE(w41.expanded.coeffs.size() == 5);
  CHECK(w41.expanded.coeffs[0] == doctest::Approx(3.0));
  CHECK(w41.expanded.coeffs[2] == doctest::Approx(-6.0));
  CHECK(w41.expanded.coeffs[4] == doctest::Approx(1.0));

  auto w25 = wick_power(2, 5.0);
  CHECK(w25.expanded.coeffs[0] == doctest::Approx(-5.0));
  CHECK(w25.expanded.coeffs[2] == doctest::Approx(1.0));

  auto w30 = wick_power(3, 0.0);
  CHECK(w30.expanded.coeffs == Vec{0, 0, 0, 1});

  // :x^n:_c = c^{n/2} h_n(x/sqrt c)
  double c = 2.3;
  auto w6 = wick_power(6, c);
  for (double x : {-1.0, 0.4, 2.2})
    CHECK(w6.expanded(x) ==
          doctest::Approx(std::pow(c, 3) * hermite(6, x / std::sqrt(c))).epsilon(1e-12));

  // even-power lower bound -b_n c^{n/2}
  double bound = hermite_min(4) * c * c;
  double min_val = poly_min(w6.expanded.coeffs, -10, 10);
  (void)min_val;
  double min4 = poly_min(wick_power(4, c).expanded.coeffs, -10, 10);
  CHECK(min4 >= bound - 1e-9);
  CHECK(min4 == doctest::Approx(bound).epsilon(1e-6));
}

TEST_CASE("isserlis moments") {
  DenseMatrix one(1, 1);
  one(0, 0) = 1.0;
  CHECK(isserlis(one, {0, 0, 0, 0, 0, 0}) == doctest::Approx(15.0));
  CHECK(isserlis(one, {0, 0, 0}) == 0.0);

  RngStream rng(7, 0);
  DenseMatrix b(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) b(i, j) = rng.normal();
  DenseMatrix cov = transpose(b) * b;
  double expect = cov(0, 1) * cov(2, 3) + cov(0, 2) * cov(1, 3) + cov(0, 3) * cov(1, 2);
  CHECK(isserlis(cov, {0, 1, 2, 3}) == doctest::Approx(expect).epsilon(1e-13));

  CHECK_THROWS_AS(isserlis(cov, {0, 4}), InvalidInput);
  CHECK_THROWS_AS(isserlis(cov, std::vector<int>(18, 0)), CapacityError);
}

TEST_CASE("wick covariance formula and MC") {
  CHECK(wick_cov(4, 4, 0.6, 1.0, 1.0) == doctest::Approx(24.0 * std::pow(0.6, 4)));
  CHECK(wick_cov(3, 4, 0.6, 1.0, 1.0) == 0.0);
  CHECK_THROWS_AS(wick_cov(2, 2, 1.5, 1.0, 1.0), InvalidInput);

  // bivariate MC: E[:X^4::Y^4:] = 24 g^4 within 3 sigma
  double g = 0.55;
  RngStream rng(7, 1);
  const long n = 400000;
  auto p4x = wick_power(4, 1.0).expanded;
  double sum = 0, sum2 = 0;
  for (long k = 0; k < n; ++k) {
    double u = rng.normal(), v = rng.normal();
    double x = u;
    double y = g * u + std::sqrt(1.0 - g * g) * v;
    double w = p4x(x) * p4x(y);
    sum += w;
    sum2 += w * w;
  }
  double mean = sum / n;
  double sd = std::sqrt((sum2 / n - mean * mean) / (n - 1.0));
  CHECK(std::fabs(mean - 24.0 * std::pow(g, 4)) <= 3.0 * sd);
}

TEST_CASE("change of wick ordering") {
  Vec t2 = change_ordering(2, 0.7);
  CHECK(t2[0] == doctest::Approx(1.0));
  CHECK(t2[1] == doctest::Approx(0.7));

  Vec id = change_ordering(6, 0.0);
  CHECK(id[0] == 1.0);
  for (size_t j = 1; j < id.size(); ++j) CHECK(id[j] == 0.0);

  // applying the table reproduces the monomial expansion: c1 -> c2 with
  // delta = c2 - c1 maps :x^n:_{c1} onto sum_j table[j] :x^{n-2j}:_{c2}
  auto check_transport = [](int n, double c1, double c2) {
    Vec table = change_ordering(n, c2 - c1);
    Polynomial lhs = wick_power(n, c1).expanded;
    Polynomial rhs;
    for (size_t j = 0; j < table.size(); ++j)
      rhs = rhs + scaled(wick_power(n - 2 * static_cast<int>(j), c2).expanded, table[j]);
    for (double x : {-1.3, 0.2, 0.9}) CHECK(lhs(x) == doctest::Approx(rhs(x)).epsilon(1e-12));
  };
  check_transport(4, 0.4, 1.1);
  check_transport(6, 2.0, 0.3);

  // composition through an intermediate variance equals the direct change
  int n = 4;
  double d12 = 0.45, d23 = -0.8;
  Vec direct = change_ordering(n, d12 + d23);
  Vec first = change_ordering(n, d12);
  Vec composed(direct.size(), 0.0);
  for (size_t j = 0; j < first.size(); ++j) {
    Vec second = change_ordering(n - 2 * static_cast<int>(j), d23);
    for (size_t k = 0; k < second.size(); ++k) composed[j + k] += first[j] * second[k];
  }
  for (size_t j = 0; j < direct.size(); ++j)
    CHECK(composed[j] == doctest::Approx(direct[j]).epsilon(1e-12));

  // round trip with -delta is the identity
  Vec fwd = change_ordering(4, 0.9), bwd = change_ordering(4, -0.9);
  Vec round(fwd.size(), 0.0);
  for (size_t j = 0; j < fwd.size(); ++j) {
    Vec second = change_ordering(4 - 2 * static_cast<int>(j), -0.9);
    for (size_t k = 0; k < second.size(); ++k) round[j + k] += fwd[j] * second[k];
  }
  CHECK(round[0] == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t j = 1; j < round.size(); ++j) CHECK(std::fabs(round[j]) <= 1e-12);
}

TEST_CASE("diagrams and matching enumeration") {
  DenseMatrix cov(2, 2);
  cov(0, 0) = 1.2; cov(0, 1) = 0.4; cov(1, 0) = 0.4; cov(1, 1) = 0.9;
  PairingDiagram single{2, {{0, 1}}, {0, 1}};
  CHECK(diagram_value(cov, single) == doctest::Approx(0.4));

  PairingDiagram dangling{4, {{0, 1}}, {0, 1, 0, 1}};
  CHECK_THROWS_AS(diagram_value(cov, dangling), InvalidInput);

  auto matchings = enumerate_matchings(6);
  CHECK(matchings.size() == 15);
  CHECK(double_factorial(5) == 15.0);

  // isserlis equals the sum over enumerated diagrams (same arithmetic path)
  RngStream rng(9, 0);
  DenseMatrix b(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = rng.normal();
  DenseMatrix c3 = transpose(b) * b;
  std::vector<int> labels = {0, 1, 2, 2, 2, 2};  // E[X Y Z^4]
  double direct = isserlis(c3, labels);
  double by_diagram = 0.0;
  int xy_paired = 0, split = 0;
  for (const auto& m : matchings) {
    PairingDiagram d{6, m, labels};
    by_diagram += diagram_value(c3, d);
    for (auto [a, bb] : m)
      if ((a == 0 && bb == 1) || (a == 1 && bb == 0)) ++xy_paired;
  }
  split = static_cast<int>(matchings.size()) - xy_paired;
  CHECK(direct == doctest::Approx(by_diagram).epsilon(1e-14));
  // the classic 3 + 12 splitting of the 15 contractions
  CHECK(xy_paired == 3);
  CHECK(split == 12);
  double g_xy = c3(0, 1), g_xz = c3(0, 2), g_yz = c3(1, 2), g_zz = c3(2, 2);
  CHECK(direct == doctest::Approx(3.0 * g_xy * g_zz * g_zz +
                                  12.0 * g_xz * g_yz * g_zz).epsilon(1e-13));
}
