#include <doctest.h>

#include <cmath>

#include "qlab/numerics.hpp"

using namespace qlab;

namespace {

DenseMatrix random_spd(int n, RngStream& rng, double diag_boost = 0.5) {
  DenseMatrix b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
  DenseMatrix m = transpose(b) * b;
  for (int i = 0; i < n; ++i) m(i, i) += diag_boost * n;
  return m;
}

DenseMatrix random_symmetric(int n, RngStream& rng) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double v = rng.normal();
      m(i, j) = v;
      m(j, i) = v;
    }
  return m;
}

}  // namespace

TEST_CASE("sym_eigen closed forms") {
  DenseMatrix m(2, 2);
  m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
  auto e = sym_eigen(m);
  CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-13));
  CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::fabs(e.vectors(0, 0)) == doctest::Approx(std::fabs(e.vectors(1, 0))).epsilon(1e-12));

  auto id = sym_eigen(DenseMatrix::identity(5));
  for (double v : id.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("sym_eigen reconstruction and orthonormality on random 50x50") {
  RngStream rng(1, 0);
  DenseMatrix m = random_symmetric(50, rng);
  auto e = sym_eigen(m);
  double scale = max_abs(m);
  // V Lambda V^T = m
  DenseMatrix vl = e.vectors;
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j) vl(i, j) *= e.values[j];
  DenseMatrix rec = vl * transpose(e.vectors);
  CHECK(max_abs(rec - m) <= 1e-9 * scale);
  DenseMatrix vtv = transpose(e.vectors) * e.vectors;
  CHECK(max_abs(vtv - DenseMatrix::identity(50)) <= 1e-10);
  // residual contract |m v - lambda v|
  for (int k = 0; k < 50; k += 7) {
    Vec v(50);
    for (int i = 0; i < 50; ++i) v[i] = e.vectors(i, k);
    Vec mv = matvec(m, v);
    double res = 0;
    for (int i = 0; i < 50; ++i) res += (mv[i] - e.values[k] * v[i]) * (mv[i] - e.values[k] * v[i]);
    CHECK(std::sqrt(res) <= 1e-9 * scale);
  }
}

TEST_CASE("sym_eigen input validation") {
  DenseMatrix m(2, 2);
  m(0, 1) = 1.0;  // not symmetric
  CHECK_THROWS_AS(sym_eigen(m), InvalidInput);
  DenseMatrix bad(2, 2);
  bad(0, 0) = std::nan("");
  bad(1, 1) = 1;
  CHECK_THROWS_AS(sym_eigen(bad), InvalidInput);
}

TEST_CASE("cholesky closed forms and failure pivot") {
  DenseMatrix m1(1, 1);
  m1(0, 0) = 4.0;
  CHECK(cholesky(m1)(0, 0) == doctest::Approx(2.0));
  CHECK(max_abs(cholesky(DenseMatrix::identity(4)) - DenseMatrix::identity(4)) < 1e-15);

  DenseMatrix m(2, 2);
  m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
  CHECK(logdet_from_cholesky(cholesky(m)) == doctest::Approx(std::log(3.0)).epsilon(1e-12));

  DenseMatrix npd(2, 2);
  npd(0, 0) = 1; npd(0, 1) = 2; npd(1, 0) = 2; npd(1, 1) = 1;
  try {
    cholesky(npd);
    CHECK(false);
  } catch (const NotPositiveDefinite& e) {
    CHECK(e.pivot == 1);
  }
}

TEST_CASE("cholesky factor property on random SPD") {
  RngStream rng(2, 0);
  for (int n : {3, 10, 30}) {
    DenseMatrix m = random_spd(n, rng);
    DenseMatrix l = cholesky(m);
    CHECK(max_abs(l * transpose(l) - m) <= 1e-10 * max_abs(m));
    // logdet via eigenvalues agrees
    double le = 0;
    for (double v : sym_eigen(m).values) le += std::log(v);
    CHECK(logdet_from_cholesky(l) == doctest::Approx(le).epsilon(1e-8));
  }
}

TEST_CASE("schur complement closed forms") {
  DenseMatrix m(2, 2);
  m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
  auto s = schur_complement(m, {0});
  CHECK(s(0, 0) == doctest::Approx(1.5).epsilon(1e-14));

  // block diagonal: keep inside one block leaves the computation in that block
  DenseMatrix bd(4, 4);
  bd(0, 0) = 2; bd(0, 1) = 1; bd(1, 0) = 1; bd(1, 1) = 2;
  bd(2, 2) = 5; bd(2, 3) = 2; bd(3, 2) = 2; bd(3, 3) = 5;
  auto s2 = schur_complement(bd, {0, 2, 3});
  CHECK(s2(0, 0) == doctest::Approx(1.5));
  CHECK(s2(1, 1) == doctest::Approx(5.0));
  CHECK(s2(1, 2) == doctest::Approx(2.0));
  CHECK(s2(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("schur complement block-inverse identity on random SPD") {
  RngStream rng(3, 0);
  DenseMatrix m = random_spd(20, rng);
  std::vector<int> keep = {0, 3, 4, 11, 19};
  DenseMatrix s = schur_complement(m, keep);
  DenseMatrix inv_kk = submatrix(spd_inverse(m), keep, keep);
  CHECK(max_abs(inv_kk * s - DenseMatrix::identity(5)) <= 1e-10);
}

TEST_CASE("schur determinant identity up to 64x64") {
  RngStream rng(4, 0);
  for (int n : {6, 17, 64}) {
    DenseMatrix m = random_spd(n, rng);
    std::vector<int> keep;
    for (int i = 0; i < n; i += 3) keep.push_back(i);
    std::vector<int> drop;
    std::vector<char> mark(n, 0);
    for (int k : keep) mark[k] = 1;
    for (int i = 0; i < n; ++i)
      if (!mark[i]) drop.push_back(i);
    double full = logdet_from_cholesky(cholesky(m));
    double bb = logdet_from_cholesky(cholesky(submatrix(m, drop, drop)));
    double sc = logdet_from_cholesky(cholesky(schur_complement(m, keep)));
    CHECK(std::fabs(full - bb - sc) <= 1e-10 * std::fabs(full));
  }
}

TEST_CASE("power_pair closed forms and oracle") {
  DenseMatrix m(2, 2);
  m(0, 0) = 2; m(0, 1) = 1; m(1, 0) = 1; m(1, 1) = 2;
  auto r = power_pair(m);
  CHECK(r.lambda0 == doctest::Approx(3.0).epsilon(1e-11));
  CHECK(r.lambda1 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(r.v0[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));

  DenseMatrix ones(4, 4, 1.0);
  auto r2 = power_pair(ones);
  CHECK(r2.lambda0 == doctest::Approx(4.0).epsilon(1e-11));
  CHECK(std::fabs(r2.lambda1) <= 1e-8);

  // 100x100 Gaussian kernel matrix vs full diagonalization
  int n = 100;
  DenseMatrix k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double x = -3.0 + 6.0 * i / (n - 1), y = -3.0 + 6.0 * j / (n - 1);
      k(i, j) = std::exp(-(x - y) * (x - y) - 0.1 * (x * x + y * y));
    }
  auto pd = power_pair(k);
  auto e = sym_eigen(k);
  CHECK(pd.lambda0 == doctest::Approx(e.values[0]).epsilon(1e-8));
  CHECK(std::fabs(pd.lambda1) == doctest::Approx(std::fabs(e.values[1])).epsilon(1e-6));
}

TEST_CASE("gauss-hermite grid invariants") {
  for (int order : {20, 64, 200}) {
    QuadratureGrid g = gauss_hermite(order);
    double s = 0.0;
    for (size_t i = 0; i < g.nodes.size(); ++i) {
      CHECK(g.weights[i] > 0.0);
      if (i > 0) CHECK(g.nodes[i] > g.nodes[i - 1]);
      s += g.gauss_weight(static_cast<int>(i));
    }
    CHECK(s == doctest::Approx(std::sqrt(3.14159265358979323846)).epsilon(1e-11));
  }
  // absorbed weights integrate Gaussian moments: int x^2 e^{-x^2} = sqrt(pi)/2
  QuadratureGrid g = gauss_hermite(40);
  double m2 = 0.0;
  for (size_t i = 0; i < g.nodes.size(); ++i)
    m2 += g.weights[i] * g.nodes[i] * g.nodes[i] * std::exp(-g.nodes[i] * g.nodes[i]);
  CHECK(m2 == doctest::Approx(0.5 * std::sqrt(3.14159265358979323846)).epsilon(1e-12));
  CHECK_THROWS_AS(gauss_hermite(301), CapacityError);
}

TEST_CASE("uniform truncated grid") {
  QuadratureGrid g = uniform_truncated(101, 3.0);
  double s = 0.0, sx = 0.0;
  for (size_t i = 0; i < g.nodes.size(); ++i) {
    s += g.weights[i];
    sx += g.weights[i] * g.nodes[i];
  }
  CHECK(s == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(std::fabs(sx) <= 1e-12);
}

TEST_CASE("rng streams are reproducible and interleaving-independent") {
  RngStream a1(42, 7), a2(42, 7);
  for (int i = 0; i < 100; ++i) CHECK(a1.next_u64() == a2.next_u64());

  // interleaving two streams does not change either sequence
  RngStream s1(9, 1), s2(9, 2), t1(9, 1), t2(9, 2);
  Vec seq1, seq2;
  for (int i = 0; i < 50; ++i) {
    seq1.push_back(s1.uniform());
    seq2.push_back(s2.uniform());
  }
  for (int i = 0; i < 50; ++i) {
    CHECK(t2.uniform() == seq2[i]);  // opposite order
    CHECK(t1.uniform() == seq1[i]);
  }

  RngStream n(3, 3);
  double sum = 0, sum2 = 0;
  const int big = 200000;
  for (int i = 0; i < big; ++i) {
    double x = n.normal();
    sum += x;
    sum2 += x * x;
  }
  CHECK(std::fabs(sum / big) < 0.01);
  CHECK(sum2 / big == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("small helpers") {
  double i1 = adaptive_simpson([](double x) { return x * x; }, 0.0, 1.0);
  CHECK(i1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  LinearFit f = linear_fit({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));

  // min of x^4 - 6x^2 + 3 is -6 at x = sqrt(3)
  CHECK(poly_min({3, 0, -6, 0, 1}, -5, 5) == doctest::Approx(-6.0).epsilon(1e-10));
}
