#include <doctest.h>

#include <cmath>

#include "qlab/chain.hpp"

using namespace qlab;
using namespace qlab::chain;

namespace {
const double kPi = 3.14159265358979323846;
}

TEST_CASE("kernel values") {
  ChainKernel k0 = ChainKernel::standard(Polynomial({0.0}));
  CHECK(k0(0, 0) == doctest::Approx(1.0));
  CHECK(k0(1, 0) == doctest::Approx(std::exp(-1.0)));

  ChainKernel km = ChainKernel::standard(Polynomial({0, 0, 1.0}));  // P = s^2
  CHECK(km(1, 0) == doctest::Approx(std::exp(-1.5)));

  CHECK_THROWS_AS(ChainKernel::standard(Polynomial({0, 0, 0, 1.0})), InvalidInput);
}

TEST_CASE("transfer matrix symmetry and positivity") {
  auto t = build_transfer(Polynomial({0, 0, 0, 0, 1.0}), gauss_hermite(60));
  double scale = max_abs(t.matrix);
  for (int i = 0; i < t.matrix.rows(); ++i)
    for (int j = 0; j < i; ++j) {
      CHECK(std::fabs(t.matrix(i, j) - t.matrix(j, i)) <= 1e-14 * scale);
      CHECK(t.matrix(i, j) > 0.0);
    }
}

TEST_CASE("normalized gaussian partition function at small N") {
  auto t = build_transfer(ChainKernel::normalized_gaussian(1.0), gauss_hermite(100));
  // Z(1) = 1/m = 1, Z(2) = 3^{-1/2}
  CHECK(partition_function(t, 1) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(partition_function(t, 2) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-10));
  CHECK(normalized_gaussian_log_z(1.0, 2) ==
        doctest::Approx(-0.5 * std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("trace of power equals trace of product of powers") {
  auto t = build_transfer(Polynomial({0, 0, 1.0}), gauss_hermite(48));
  DenseMatrix t2 = t.matrix * t.matrix;
  DenseMatrix t3 = t2 * t.matrix;
  DenseMatrix t5 = t3 * t2;
  double tr = 0;
  for (int i = 0; i < t5.rows(); ++i) tr += t5(i, i);
  CHECK(partition_function(t, 5) == doctest::Approx(tr).epsilon(1e-12));
}

TEST_CASE("conditioned kernel closed forms") {
  auto t = build_transfer(Polynomial({0.0}), gauss_hermite(120));
  CHECK(conditioned_kernel(t, 1, 0.3, -0.4) == doctest::Approx(t.kernel(-0.4, 0.3)));
  // n=2, P=0: K2(x,y) = sqrt(pi/2) exp(-(x-y)^2/2)
  for (double x : {-1.0, 0.0, 0.7})
    for (double y : {-0.5, 0.2, 1.3}) {
      double expect = std::sqrt(kPi / 2.0) * std::exp(-0.5 * (x - y) * (x - y));
      CHECK(conditioned_kernel(t, 2, x, y) == doctest::Approx(expect).epsilon(1e-9));
    }
  CHECK_THROWS_AS(conditioned_kernel(t, 2, 100.0, 0.0), OutOfDomain);
}

TEST_CASE("chapman-kolmogorov composition") {
  for (auto poly : {Polynomial({0.0}), Polynomial({0, 0, 0, 0, 1.0})}) {
    auto t = build_transfer(poly, gauss_hermite(100));
    for (auto [n1, n2] : std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {2, 2}}) {
      for (double a : {-0.8, 0.1, 0.9}) {
        for (double b : {-0.3, 0.6}) {
          double direct = conditioned_kernel(t, n1 + n2, a, b);
          double glued = 0.0;
          for (size_t j = 0; j < t.grid.nodes.size(); ++j)
            glued += t.grid.weights[j] *
                     conditioned_kernel(t, n2, t.grid.nodes[j], b) *
                     conditioned_kernel(t, n1, a, t.grid.nodes[j]);
          CHECK(std::fabs(glued - direct) <= 1e-8 * std::fabs(direct));
        }
      }
    }
  }
}

TEST_CASE("spectral report") {
  auto t = build_transfer(Polynomial({0.0}), gauss_hermite(80));
  auto rep = spectral_report(t);
  for (double v : rep.ground) CHECK(v > 0.0);
  CHECK(rep.alpha < 1.0);
  auto e = sym_eigen(t.matrix);
  CHECK(rep.lambda0 == doctest::Approx(e.values[0]).epsilon(1e-10));
  CHECK(rep.lambda0 - std::fabs(rep.lambda1) > 0.0);
}

TEST_CASE("free energy gaussian benchmark and rescale shift") {
  auto t = build_transfer(ChainKernel::normalized_gaussian(1.0), gauss_hermite(200));
  auto table = free_energy(t, {1, 16, 256, 2048, 4096});
  double limit = gaussian_free_energy_limit(1.0);
  CHECK(limit == doctest::Approx(-0.3119053581824357).epsilon(1e-12));
  CHECK(table.rows[3].free_energy == doctest::Approx(limit).epsilon(1e-9));
  CHECK(std::fabs(table.rows.back().free_energy - table.log_lambda0) <= 1e-6);
  // closed form equals the numeric integral of the circulant limit
  double integral = adaptive_simpson(
      [](double x) { return -0.5 * std::log(2.0 - std::cos(2.0 * kPi * x)); }, 0.0, 1.0,
      1e-13);
  CHECK(integral == doctest::Approx(limit).epsilon(1e-10));

  // rescaling the kernel by c shifts the free energy by log c exactly
  ChainKernel shifted = ChainKernel::normalized_gaussian(1.0);
  shifted.log_prefactor += std::log(2.5);
  auto t2 = build_transfer(shifted, gauss_hermite(200));
  auto table2 = free_energy(t2, {64});
  auto table1 = free_energy(t, {64});
  CHECK(table2.rows[0].free_energy - table1.rows[0].free_energy ==
        doctest::Approx(std::log(2.5)).epsilon(1e-12));
}

TEST_CASE("gibbs expectations") {
  auto t = build_transfer(ChainKernel::normalized_gaussian(1.0), gauss_hermite(64));
  CHECK(gibbs_expectation(t, {}, 12) == doctest::Approx(1.0));
  int m = t.matrix.rows();
  Vec f(m);
  for (int i = 0; i < m; ++i) f[i] = 1.0 / (1.0 + t.grid.nodes[i] * t.grid.nodes[i]);
  auto rep = spectral_report(t);
  double limit = gibbs_expectation(t, {{1, f}}, 0);
  double direct = 0.0;
  {
    Vec fo = rep.ground;
    for (int i = 0; i < m; ++i) fo[i] *= f[i];
    direct = dot(rep.ground, fo);
  }
  CHECK(limit == doctest::Approx(direct).epsilon(1e-12));
  // finite-n value approaches the limit at a gap-controlled rate
  double prev = 1e300;
  for (int n : {8, 16, 32, 64}) {
    double v = gibbs_expectation(t, {{n / 2, f}}, n);
    double err = std::fabs(v - limit);
    CHECK(err <= std::max(1e-13, prev));
    prev = err;
    if (n == 64) CHECK(err <= std::pow(rep.alpha, 30));
  }
  CHECK_THROWS_AS(gibbs_expectation(t, {{3, f}, {2, f}}, 8), InvalidInput);
  CHECK_THROWS_AS(gibbs_expectation(t, {{9, f}}, 8), InvalidInput);
}

TEST_CASE("mixing bound and eigenvector decay") {
  auto t = build_transfer(Polynomial({0, 0, 1.0}), gauss_hermite(60));
  auto rep = spectral_report(t);
  int m = t.matrix.rows();

  // f = g = ground vector: all values vanish
  auto rows0 = mixing_check(t, rep.ground, rep.ground, 10);
  for (const auto& r : rows0) CHECK(std::fabs(r.value) <= 1e-12);

  // f aligned with the second eigenvector decays like alpha^k exactly
  auto e = sym_eigen(t.matrix);
  Vec v1(m);
  for (int i = 0; i < m; ++i) v1[i] = e.vectors(i, 1);
  auto rows1 = mixing_check(t, v1, v1, 12);
  for (const auto& r : rows1) {
    double expect = std::pow(std::fabs(e.values[1]) / e.values[0], r.k);
    CHECK(r.value == doctest::Approx(expect).epsilon(1e-6));
  }

  // generic vectors satisfy the bound
  RngStream rng(5, 0);
  Vec f(m), g(m);
  for (auto& x : f) x = rng.normal();
  for (auto& x : g) x = rng.normal();
  for (const auto& r : mixing_check(t, f, g, 50)) CHECK(r.value <= r.bound + 1e-10);
}
