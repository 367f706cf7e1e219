#include "qlab/pphi2.hpp"

#include <algorithm>
#include <cmath>

namespace qlab::pphi2 {

InteractionSpec InteractionSpec::uniform(Polynomial p, int n_vertices) {
  InteractionSpec s;
  s.p = std::move(p);
  s.chi.assign(n_vertices, 1.0);
  return s;
}

static bool uniform_measure(const lattice::LatticeGraph& g) {
  for (double m : g.vertex_measure)
    if (m != g.vertex_measure[0]) return false;
  return true;
}

TadpoleField tadpole(const PrecisionOperator& q) {
  const auto& g = q.graph;
  TadpoleField t;
  if (g.kind == lattice::LatticeGraph::Kind::torus && uniform_measure(g)) {
    // Q is a 2D circulant; the diagonal of Q^{-1} is the mode average.
    double mu = g.vertex_measure[0];
    double inv_a2 = 1.0 / (g.spacing * g.spacing);
    double c = 0.0;
    const double two_pi = 6.283185307179586476925287;
    for (int k = 0; k < g.n1; ++k)
      for (int l = 0; l < g.n2; ++l) {
        double lam = (2.0 - 2.0 * std::cos(two_pi * k / g.n1) + 2.0 -
                      2.0 * std::cos(two_pi * l / g.n2)) * inv_a2 +
                     q.mass * q.mass;
        c += 1.0 / (mu * lam);
      }
    c /= g.n_vertices;
    t.values.assign(g.n_vertices, c);
    return t;
  }
  if (g.kind == lattice::LatticeGraph::Kind::cycle && uniform_measure(g)) {
    double mu = g.vertex_measure[0];
    double inv_a2 = 1.0 / (g.spacing * g.spacing);
    double c = 0.0;
    const double two_pi = 6.283185307179586476925287;
    for (int k = 0; k < g.n1; ++k) {
      double lam = (2.0 - 2.0 * std::cos(two_pi * k / g.n1)) * inv_a2 + q.mass * q.mass;
      c += 1.0 / (mu * lam);
    }
    c /= g.n_vertices;
    t.values.assign(g.n_vertices, c);
    return t;
  }
  DenseMatrix c = spd_inverse(q.q);
  t.values.resize(g.n_vertices);
  for (int i = 0; i < g.n_vertices; ++i) t.values[i] = c(i, i);
  return t;
}

WickAction::WickAction(InteractionSpec spec, const PrecisionOperator& q)
    : spec_(std::move(spec)), c_(tadpole(q).values) {
  weight_.resize(q.graph.n_vertices);
  if (spec_.chi.size() != weight_.size())
    throw InvalidInput("wick_action: chi size mismatch");
  for (size_t i = 0; i < weight_.size(); ++i) {
    if (spec_.chi[i] < 0) throw InvalidInput("wick_action: negative chi");
    weight_[i] = q.graph.vertex_measure[i] * spec_.chi[i];
  }
  build();
}

WickAction::WickAction(InteractionSpec spec, const PrecisionOperator& q,
                       Vec wick_constants)
    : spec_(std::move(spec)), c_(std::move(wick_constants)) {
  if (c_.size() != static_cast<size_t>(q.graph.n_vertices))
    throw InvalidInput("wick_action: constants size mismatch");
  weight_.resize(q.graph.n_vertices);
  if (spec_.chi.size() != weight_.size())
    throw InvalidInput("wick_action: chi size mismatch");
  for (size_t i = 0; i < weight_.size(); ++i)
    weight_[i] = q.graph.vertex_measure[i] * spec_.chi[i];
  build();
}

void WickAction::build() {
  if (!spec_.p.bounded_below())
    throw InvalidInput("wick_action: interaction polynomial not bounded below");
  per_vertex_.resize(c_.size());
  for (size_t i = 0; i < c_.size(); ++i) {
    if (i > 0 && c_[i] == c_[i - 1]) {
      per_vertex_[i] = per_vertex_[i - 1];
      continue;
    }
    per_vertex_[i] = wick::wick_ordered(spec_.p, c_[i]);
  }
}

double WickAction::operator()(const Vec& phi) const {
  if (phi.size() != per_vertex_.size())
    throw InvalidInput("wick_action: field dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < phi.size(); ++i) s += weight_[i] * per_vertex_[i](phi[i]);
  return s;
}

double WickAction::lower_bound() const {
  double s = 0.0;
  for (size_t i = 0; i < per_vertex_.size(); ++i) {
    if (weight_[i] == 0.0) continue;
    double hw = 4.0 * (per_vertex_[i].degree() + 1.0) *
                std::max(1.0, std::sqrt(std::max(c_[i], 1.0)));
    s += weight_[i] * poly_min(per_vertex_[i].coeffs, -hw, hw);
  }
  return s;
}

double wick_action(const InteractionSpec& spec, const PrecisionOperator& q,
                   const Vec& phi) {
  return WickAction(spec, q)(phi);
}

double action_variance(const InteractionSpec& spec, const PrecisionOperator& q) {
  const Polynomial& p = spec.p;
  int d = p.degree();
  if (d < 2 || d % 2 != 0) throw InvalidInput("action_variance: need a pure even power");
  for (int k = 0; k < d; ++k)
    if (k < static_cast<int>(p.coeffs.size()) && p.coeffs[k] != 0.0)
      throw InvalidInput("action_variance: need a pure even power");
  double lead = p.coeffs[d];
  DenseMatrix c = spd_inverse(q.q);
  double fact = 1.0;
  for (int k = 2; k <= d; ++k) fact *= k;
  double var = 0.0;
  int n = q.graph.n_vertices;
  for (int x = 0; x < n; ++x) {
    double wx = q.graph.vertex_measure[x] * spec.chi[x];
    if (wx == 0.0) continue;
    for (int y = 0; y < n; ++y) {
      double wy = q.graph.vertex_measure[y] * spec.chi[y];
      if (wy == 0.0) continue;
      var += wx * wy * std::pow(c(x, y), d);
    }
  }
  return lead * lead * fact * var;
}

PartitionEstimate partition_mc(const InteractionSpec& spec, const PrecisionOperator& q,
                               long n_samples, std::uint64_t seed,
                               std::uint64_t stream_base) {
  WickAction action(spec, q);
  DenseMatrix l = cholesky(q.q);
  int n = q.graph.n_vertices;
  auto one = [&](RngStream& rng) {
    Vec z(n);
    rng.fill_normal(z);
    Vec x = backward_subst_transposed(l, z);
    return std::exp(-action(x));
  };
  auto acc = lattice::mc_accumulate(n_samples, seed, stream_base, one);
  PartitionEstimate e;
  e.estimate = acc.sum / acc.count;
  double var = std::max(0.0, acc.sum_sq / acc.count - e.estimate * e.estimate) *
               acc.count / (acc.count - 1.0);
  e.std_error = std::sqrt(var / acc.count);
  e.ess = acc.sum * acc.sum / std::max(acc.sum_sq, 1e-300);
  e.degenerate_weights = e.ess < 0.01 * acc.count;
  return e;
}

static std::vector<int> component_labels(const lattice::LatticeGraph& g,
                                         const std::vector<char>& blocked, int& count) {
  std::vector<std::vector<int>> adj(g.n_vertices);
  for (const auto& e : g.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<int> label(g.n_vertices, -1);
  count = 0;
  for (int s = 0; s < g.n_vertices; ++s) {
    if (blocked[s] || label[s] >= 0) continue;
    std::vector<int> stack{s};
    label[s] = count;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u : adj[v])
        if (!blocked[u] && label[u] < 0) {
          label[u] = count;
          stack.push_back(u);
        }
    }
    ++count;
  }
  return label;
}

DecoupleReport decouple_check(const PrecisionOperator& q, const VertexSet& sigma,
                              const InteractionSpec& spec, int n_samples,
                              RngStream& rng) {
  int n = q.graph.n_vertices;
  std::vector<char> blocked(n, 0);
  for (int i : sigma.indices) blocked[i] = 1;
  int n_comp = 0;
  std::vector<int> label = component_labels(q.graph, blocked, n_comp);
  if (n_comp < 2)
    throw InvalidInput("decouple_check: sigma does not dissect the graph");

  WickAction action(spec, q);
  DenseMatrix pi = lattice::poisson_matrix(q, sigma);
  DenseMatrix samples = lattice::sample(q, n_samples, rng);

  double max_err = 0.0;
  Vec phi(n), phi_sigma(sigma.indices.size());
  for (int s = 0; s < n_samples; ++s) {
    for (int i = 0; i < n; ++i) phi[i] = samples(s, i);
    for (size_t k = 0; k < sigma.indices.size(); ++k)
      phi_sigma[k] = phi[sigma.indices[k]];
    Vec harmonic = matvec(pi, phi_sigma);
    // region fields: harmonic part plus the Dirichlet remainder of that region
    double total = action(phi);
    double split = 0.0;
    for (int r = 0; r < n_comp; ++r) {
      Vec psi = harmonic;
      for (int i = 0; i < n; ++i)
        if (!blocked[i] && label[i] == r) psi[i] = phi[i];
      // region action: same per-vertex terms, restricted by component
      double sr = 0.0;
      for (int i = 0; i < n; ++i)
        if (!blocked[i] && label[i] == r)
          sr += action.site_weights()[i] *
                wick::wick_ordered(spec.p, action.constants()[i])(psi[i]);
      split += sr;
    }
    for (int i : sigma.indices)
      split += action.site_weights()[i] *
               wick::wick_ordered(spec.p, action.constants()[i])(phi[i]);
    max_err = std::max(max_err, std::fabs(total - split));
  }

  // locality: chi inside component 0 -> perturbations elsewhere leave S unchanged
  InteractionSpec local = spec;
  local.chi.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (!blocked[i] && label[i] == 0) local.chi[i] = 1.0;
  WickAction local_action(local, q);
  Vec phi0(n);
  for (int i = 0; i < n; ++i) phi0[i] = samples(0, i);
  double s_before = local_action(phi0);
  Vec phi1 = phi0;
  for (int i = 0; i < n; ++i)
    if (!blocked[i] && label[i] != 0) phi1[i] += 7.25;
  double s_after = local_action(phi1);
  return {max_err, std::fabs(s_after - s_before), n_comp};
}

DenseMatrix box_mollifier(const PrecisionOperator& q, double eps) {
  int n = q.graph.n_vertices;
  if (eps == 0.0) return DenseMatrix::identity(n);
  int radius = static_cast<int>(std::lround(eps / q.graph.spacing));
  if (radius <= 0) return DenseMatrix::identity(n);
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : q.graph.edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  DenseMatrix k(n, n);
  std::vector<int> dist(n);
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    std::vector<int> frontier{s};
    dist[s] = 0;
    std::vector<int> ball{s};
    for (int d = 0; d < radius; ++d) {
      std::vector<int> next;
      for (int v : frontier)
        for (int u : adj[v])
          if (dist[u] < 0) {
            dist[u] = d + 1;
            next.push_back(u);
            ball.push_back(u);
          }
      frontier = std::move(next);
    }
    double w = 1.0 / ball.size();
    for (int v : ball) k(s, v) = w;
  }
  return k;
}

DenseMatrix heat_mollifier(const PrecisionOperator& q, double eps) {
  int n = q.graph.n_vertices;
  if (eps == 0.0) return DenseMatrix::identity(n);
  DenseMatrix lap(n, n);
  for (const auto& e : q.graph.edges) {
    lap(e.i, e.i) += e.w;
    lap(e.j, e.j) += e.w;
    lap(e.i, e.j) -= e.w;
    lap(e.j, e.i) -= e.w;
  }
  EigenDecomposition ed = sym_eigen(lap);
  DenseMatrix k(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        s += ed.vectors(a, j) * std::exp(-eps * ed.values[j]) * ed.vectors(b, j);
      k(a, b) = s;
    }
  return k;
}

double mollified_action_distance(const InteractionSpec& spec,
                                 const PrecisionOperator& q, const DenseMatrix& k1,
                                 const DenseMatrix& k2) {
  DenseMatrix c = spd_inverse(q.q);
  DenseMatrix c11 = k1 * c * transpose(k1);
  DenseMatrix c12 = k1 * c * transpose(k2);
  DenseMatrix c22 = k2 * c * transpose(k2);
  int n = q.graph.n_vertices;
  double total = 0.0;
  for (size_t k = 1; k < spec.p.coeffs.size(); ++k) {
    double a = spec.p.coeffs[k];
    if (a == 0.0) continue;
    double fact = 1.0;
    for (size_t j = 2; j <= k; ++j) fact *= j;
    double s = 0.0;
    for (int x = 0; x < n; ++x) {
      double wx = q.graph.vertex_measure[x] * spec.chi[x];
      if (wx == 0.0) continue;
      for (int y = 0; y < n; ++y) {
        double wy = q.graph.vertex_measure[y] * spec.chi[y];
        if (wy == 0.0) continue;
        s += wx * wy *
             (std::pow(c11(x, y), k) - 2.0 * std::pow(c12(x, y), k) +
              std::pow(c22(x, y), k));
      }
    }
    total += a * a * fact * s;
  }
  return std::sqrt(std::max(0.0, total));
}

std::vector<MollifierRow> mollifier_compare(const PrecisionOperator& q,
                                            const InteractionSpec& spec,
                                            const Vec& eps_list) {
  std::vector<MollifierRow> rows;
  for (double eps : eps_list) {
    DenseMatrix k1 = box_mollifier(q, eps);
    DenseMatrix k2 = heat_mollifier(q, eps);
    rows.push_back({eps, mollified_action_distance(spec, q, k1, k2)});
  }
  return rows;
}

}  // namespace qlab::pphi2
