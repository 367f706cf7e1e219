#include <doctest.h>

#include <cmath>

#include "qlab/pphi2.hpp"

using namespace qlab;
using namespace qlab::pphi2;
using qlab::lattice::precision_operator;
using qlab::lattice::torus;
using qlab::lattice::VertexSet;

namespace {
PrecisionOperator one_vertex(double mass) {
  lattice::LatticeGraph g;
  g.kind = lattice::LatticeGraph::Kind::custom;
  g.n_vertices = 1;
  g.vertex_measure = {1.0};
  return precision_operator(g, mass);
}
}  // namespace

TEST_CASE("tadpole values") {
  auto q1 = one_vertex(2.0);
  CHECK(tadpole(q1).values[0] == doctest::Approx(0.25));

  // fast circulant path equals the dense inverse on a torus
  auto qt = precision_operator(torus(8, 8, 0.5), 1.2);
  auto fast = tadpole(qt);
  auto dense = spd_inverse(qt.q);
  for (int i = 0; i < 64; ++i) {
    CHECK(fast.values[i] == doctest::Approx(dense(i, i)).epsilon(1e-12));
    CHECK(std::fabs(fast.values[i] - fast.values[0]) <= 1e-12);
  }
}

TEST_CASE("tadpole log divergence on shrinking spacing") {
  Vec xs, ys;
  for (int n : {8, 16, 32}) {
    auto q = precision_operator(torus(n, n, 1.0 / n), 1.0);
    xs.push_back(std::log(static_cast<double>(n)));
    ys.push_back(tadpole(q).values[0]);
  }
  auto fit = linear_fit(xs, ys);
  double target = 1.0 / (2.0 * 3.14159265358979323846);
  CHECK(fit.r_squared >= 0.99);
  CHECK(std::fabs(fit.slope - target) <= 0.25 * target);
  CHECK(ys[1] - ys[0] == doctest::Approx(fit.slope * std::log(2.0)).epsilon(0.05));
}

TEST_CASE("wick action closed forms") {
  auto q = precision_operator(torus(4, 4, 1.0), 1.0);
  int n = 16;
  auto c = tadpole(q).values;

  // quadratic: S = lam sum measure (phi^2 - c)
  double lam = 0.8;
  auto spec2 = InteractionSpec::uniform(wick::Polynomial({0, 0, lam}), n);
  WickAction a2(spec2, q);
  RngStream rng(41, 0);
  Vec phi(n);
  for (auto& v : phi) v = rng.normal();
  double expect = 0.0;
  for (int i = 0; i < n; ++i)
    expect += q.graph.vertex_measure[i] * lam * (phi[i] * phi[i] - c[i]);
  CHECK(a2(phi) == doctest::Approx(expect).epsilon(1e-12));

  // phi = 0 with P = lam theta^4: S = 3 lam sum measure c^2
  auto spec4 = InteractionSpec::uniform(wick::Polynomial({0, 0, 0, 0, lam}), n);
  WickAction a4(spec4, q);
  double s0 = a4(Vec(n, 0.0));
  double expect0 = 0.0;
  for (int i = 0; i < n; ++i)
    expect0 += 3.0 * lam * q.graph.vertex_measure[i] * c[i] * c[i];
  CHECK(s0 == doctest::Approx(expect0).epsilon(1e-12));

  CHECK_THROWS_AS(WickAction(InteractionSpec::uniform(wick::Polynomial({0, 1.0}), n), q),
                  InvalidInput);
}

TEST_CASE("action variance formula") {
  auto q1 = one_vertex(2.0);
  auto spec = InteractionSpec::uniform(wick::Polynomial({0, 0, 1.0}), 1);
  double c = 0.25;
  CHECK(action_variance(spec, q1) == doctest::Approx(2.0 * c * c));

  auto specx = InteractionSpec::uniform(wick::Polynomial({0, 0, 1.0}), 1);
  specx.chi = {0.0};
  CHECK(action_variance(specx, q1) == 0.0);

  CHECK_THROWS_AS(
      action_variance(InteractionSpec::uniform(wick::Polynomial({0, 0, 1.0, 0, 1.0}), 1), q1),
      InvalidInput);

  // MC agreement for theta^4 on a small torus
  auto q = precision_operator(torus(4, 4, 1.0), 1.0);
  auto spec4 = InteractionSpec::uniform(wick::Polynomial({0, 0, 0, 0, 1.0}), 16);
  double exact = action_variance(spec4, q);
  WickAction action(spec4, q);
  DenseMatrix l = cholesky(q.q);
  const long nmc = 200000;
  auto acc = lattice::mc_accumulate(nmc, 5, 7, [&](RngStream& rng) {
    Vec z(16);
    rng.fill_normal(z);
    double s = action(backward_subst_transposed(l, z));
    return s * s;
  });
  double mean = acc.sum / acc.count;
  double sd = std::sqrt((acc.sum_sq / acc.count - mean * mean) / (acc.count - 1.0));
  CHECK(std::fabs(mean - exact) <= 3.0 * sd);
}

TEST_CASE("partition function monte carlo") {
  auto q = precision_operator(torus(4, 4, 1.0), 1.0);
  auto zero = InteractionSpec::uniform(wick::Polynomial({0.0}), 16);
  auto est0 = partition_mc(zero, q, 2000, 1, 0);
  CHECK(est0.estimate == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(est0.std_error <= 1e-14);

  // quadratic sector equals the determinant formula through quad_perturb
  auto q6 = precision_operator(torus(6, 6, 1.0), 1.0);
  int n = 36;
  double lam = 0.3;
  auto quad = InteractionSpec::uniform(wick::Polynomial({0, 0, lam}), n);
  auto est = partition_mc(quad, q6, 150000, 2, 0);
  DenseMatrix v(n, n);
  auto c = tadpole(q6).values;
  double shift = 0.0;
  for (int i = 0; i < n; ++i) {
    v(i, i) = 2.0 * lam * q6.graph.vertex_measure[i];
    shift += lam * q6.graph.vertex_measure[i] * c[i];
  }
  auto qp = lattice::quad_perturb(q6, v);
  double exact = std::exp(shift) * qp.z;
  CHECK(std::fabs(est.estimate - exact) <= 3.0 * est.std_error);
  CHECK(!est.degenerate_weights);
}

TEST_CASE("decoupling across a dissecting set") {
  auto q = precision_operator(torus(8, 8, 1.0), 1.0);
  std::vector<int> sigma;
  for (int c = 0; c < 8; ++c) sigma.push_back(q.graph.vertex_at(0, c));
  for (int c = 0; c < 8; ++c) sigma.push_back(q.graph.vertex_at(4, c));
  std::sort(sigma.begin(), sigma.end());
  auto spec = InteractionSpec::uniform(wick::Polynomial({0, 0, 0, 0, 1.0}), 64);
  RngStream rng(43, 0);
  auto rep = decouple_check(q, VertexSet::of(sigma), spec, 100, rng);
  CHECK(rep.components == 2);
  CHECK(rep.max_identity_error <= 1e-10);
  CHECK(rep.locality_error == 0.0);

  // one row does not dissect the torus
  std::vector<int> one_row;
  for (int c = 0; c < 8; ++c) one_row.push_back(q.graph.vertex_at(0, c));
  CHECK_THROWS_AS(decouple_check(q, VertexSet::of(one_row), spec, 4, rng), InvalidInput);
}

TEST_CASE("nelson lower bound holds on samples") {
  auto q = precision_operator(torus(6, 6, 0.5), 1.0);
  auto spec = InteractionSpec::uniform(wick::Polynomial({0, 0, 0, 0, 0.7}), 36);
  WickAction action(spec, q);
  double bound = action.lower_bound();
  RngStream rng(47, 0);
  auto samples = lattice::sample(q, 256, rng);
  Vec phi(36);
  for (int s = 0; s < 256; ++s) {
    for (int i = 0; i < 36; ++i) phi[i] = samples(s, i);
    CHECK(action(phi) >= bound - 1e-9);
  }
}

TEST_CASE("mollifier comparison") {
  auto q = precision_operator(torus(8, 8, 1.0), 1.0);
  auto spec = InteractionSpec::uniform(wick::Polynomial({0, 0, 0, 0, 1.0}), 64);

  auto rows = mollifier_compare(q, spec, {4.0, 2.0, 1.0, 0.0});
  CHECK(rows.back().l2_distance == 0.0);
  CHECK(rows[0].l2_distance > rows[2].l2_distance);
  for (size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].l2_distance <= rows[i - 1].l2_distance + 1e-12);

  // quadratic closed form matches Monte Carlo
  auto quad = InteractionSpec::uniform(wick::Polynomial({0, 0, 1.0}), 64);
  DenseMatrix k1 = box_mollifier(q, 2.0);
  DenseMatrix k2 = heat_mollifier(q, 2.0);
  double exact = mollified_action_distance(quad, q, k1, k2);
  DenseMatrix c = spd_inverse(q.q);
  DenseMatrix c11 = k1 * c * transpose(k1);
  DenseMatrix c22 = k2 * c * transpose(k2);
  Vec const1(64), const2(64);
  for (int i = 0; i < 64; ++i) {
    const1[i] = c11(i, i);
    const2[i] = c22(i, i);
  }
  WickAction a1(quad, q, const1), a2(quad, q, const2);
  DenseMatrix l = cholesky(q.q);
  const long nmc = 20000;
  auto acc = lattice::mc_accumulate(nmc, 7, 11, [&](RngStream& rng) {
    Vec z(64);
    rng.fill_normal(z);
    Vec phi = backward_subst_transposed(l, z);
    Vec p1 = matvec(k1, phi), p2 = matvec(k2, phi);
    double d = a1(p1) - a2(p2);
    return d * d;
  });
  double mean = acc.sum / acc.count;
  double sd = std::sqrt((acc.sum_sq / acc.count - mean * mean) / (acc.count - 1.0));
  CHECK(std::fabs(mean - exact * exact) <= 3.0 * sd);
}
