#include "qlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace qlab::lattice {

bool LatticeGraph::connected() const {
  if (n_vertices == 0) return false;
  std::vector<std::vector<int>> adj(n_vertices);
  for (const auto& e : edges) {
    adj[e.i].push_back(e.j);
    adj[e.j].push_back(e.i);
  }
  std::vector<char> seen(n_vertices, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int u : adj[v])
      if (!seen[u]) {
        seen[u] = 1;
        ++visited;
        stack.push_back(u);
      }
  }
  return visited == n_vertices;
}

int LatticeGraph::vertex_at(int row, int col) const { return row * n2 + col; }

static void validate_graph(const LatticeGraph& g) {
  for (const auto& e : g.edges) {
    if (e.i == e.j) throw InvalidInput("lattice graph: self-loop");
    if (e.i < 0 || e.j < 0 || e.i >= g.n_vertices || e.j >= g.n_vertices)
      throw InvalidInput("lattice graph: edge endpoint out of range");
    if (e.w <= 0) throw InvalidInput("lattice graph: non-positive edge weight");
  }
  if (static_cast<int>(g.vertex_measure.size()) != g.n_vertices)
    throw InvalidInput("lattice graph: vertex measure size mismatch");
  for (double m : g.vertex_measure)
    if (m <= 0) throw InvalidInput("lattice graph: non-positive vertex measure");
  if (!g.connected()) throw InvalidInput("lattice graph: not connected");
}

LatticeGraph torus(int n1, int n2, double spacing, std::optional<double> measure) {
  if (n1 < 2 || n2 < 2) throw InvalidInput("torus: need at least 2 sites per direction");
  LatticeGraph g;
  g.kind = LatticeGraph::Kind::torus;
  g.n1 = n1;
  g.n2 = n2;
  g.spacing = spacing;
  g.n_vertices = n1 * n2;
  g.vertex_measure.assign(g.n_vertices, measure.value_or(spacing * spacing));
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < n2; ++c) {
      int v = r * n2 + c;
      int right = r * n2 + (c + 1) % n2;
      int down = ((r + 1) % n1) * n2 + c;
      if (n2 > 2 || c + 1 < n2) g.edges.push_back({v, right, 1.0});
      if (n1 > 2 || r + 1 < n1) g.edges.push_back({v, down, 1.0});
    }
  validate_graph(g);
  return g;
}

LatticeGraph cycle(int n, double spacing, std::optional<double> measure) {
  if (n < 2) throw InvalidInput("cycle: need at least 2 sites");
  LatticeGraph g;
  g.kind = LatticeGraph::Kind::cycle;
  g.n1 = n;
  g.n2 = 1;
  g.spacing = spacing;
  g.n_vertices = n;
  g.vertex_measure.assign(n, measure.value_or(spacing));
  for (int i = 0; i < n; ++i) {
    int j = (i + 1) % n;
    if (n == 2 && i == 1) break;  // avoid the duplicate edge on a 2-cycle
    g.edges.push_back({i, j, 1.0});
  }
  validate_graph(g);
  return g;
}

LatticeGraph from_edges(int n_vertices, std::vector<LatticeGraph::Edge> edges,
                        Vec vertex_measure, double spacing) {
  LatticeGraph g;
  g.kind = LatticeGraph::Kind::custom;
  g.n_vertices = n_vertices;
  g.edges = std::move(edges);
  g.spacing = spacing;
  g.vertex_measure = vertex_measure.empty() ? Vec(n_vertices, 1.0)
                                            : std::move(vertex_measure);
  validate_graph(g);
  return g;
}

LatticeGraph double_of_strip(int n1, int n2, double spacing, bool periodic_rows) {
  if (n1 < 1 || n2 < 2) throw InvalidInput("double_of_strip: need n1 >= 1, n2 >= 2");
  LatticeGraph g;
  g.kind = LatticeGraph::Kind::double_of_region;
  g.n1 = n1;
  g.n2 = 2 * n2 - 1;
  g.spacing = spacing;
  g.n_vertices = n1 * g.n2;
  g.vertex_measure.assign(g.n_vertices, spacing * spacing);
  auto at = [&](int r, int c) { return r * g.n2 + c; };
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < g.n2; ++c) {
      if (c + 1 < g.n2) g.edges.push_back({at(r, c), at(r, c + 1), 1.0});
      if (r + 1 < n1)
        g.edges.push_back({at(r, c), at(r + 1, c), 1.0});
      else if (periodic_rows && n1 > 2)
        g.edges.push_back({at(r, c), at(0, c), 1.0});
    }
  g.involution.resize(g.n_vertices);
  for (int r = 0; r < n1; ++r)
    for (int c = 0; c < g.n2; ++c) g.involution[at(r, c)] = at(r, g.n2 - 1 - c);
  for (int r = 0; r < n1; ++r) g.fixed_set.push_back(at(r, n2 - 1));
  validate_graph(g);
  return g;
}

PrecisionOperator precision_operator(LatticeGraph graph, double mass) {
  if (mass <= 0) throw InvalidInput("precision_operator: mass must be positive");
  validate_graph(graph);
  int n = graph.n_vertices;
  DenseMatrix q(n, n);
  double inv_a2 = 1.0 / (graph.spacing * graph.spacing);
  for (const auto& e : graph.edges) {
    double w = e.w * inv_a2;
    q(e.i, e.i) += w;
    q(e.j, e.j) += w;
    q(e.i, e.j) -= w;
    q(e.j, e.i) -= w;
  }
  for (int i = 0; i < n; ++i) q(i, i) += mass * mass;
  for (int i = 0; i < n; ++i) {
    double si = std::sqrt(graph.vertex_measure[i]);
    for (int j = 0; j < n; ++j) {
      double sj = std::sqrt(graph.vertex_measure[j]);
      q(i, j) *= si * sj;
    }
  }
  PrecisionOperator op;
  op.graph = std::move(graph);
  op.mass = mass;
  op.q = std::move(q);
  return op;
}

VertexSet VertexSet::of(std::vector<int> idx) {
  for (size_t k = 1; k < idx.size(); ++k)
    if (idx[k] <= idx[k - 1])
      throw InvalidInput("vertex set: indices must be strictly increasing");
  VertexSet s;
  s.indices = std::move(idx);
  return s;
}

std::vector<int> VertexSet::complement(int n) const {
  std::vector<char> in(n, 0);
  for (int i : indices) {
    if (i < 0 || i >= n) throw InvalidInput("vertex set: index out of range");
    in[i] = 1;
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

GaussianLaw green(const PrecisionOperator& q) {
  GaussianLaw law;
  law.covariance = spd_inverse(q.q);
  law.mean.assign(q.q.rows(), 0.0);
  return law;
}

DenseMatrix sample(const PrecisionOperator& q, int count, RngStream& rng) {
  if (count < 1) throw InvalidInput("sample: count must be >= 1");
  int n = q.q.rows();
  DenseMatrix l = cholesky(q.q);
  DenseMatrix out(count, n);
  Vec z(n);
  for (int r = 0; r < count; ++r) {
    rng.fill_normal(z);
    Vec x = backward_subst_transposed(l, z);  // cov (L L^T)^{-1} = Q^{-1}
    for (int i = 0; i < n; ++i) out(r, i) = x[i];
  }
  return out;
}

DenseMatrix dn_map(const PrecisionOperator& q, const VertexSet& sigma) {
  if (sigma.indices.empty()) throw InvalidInput("dn_map: empty vertex set");
  return schur_complement(q.q, sigma.indices);
}

DenseMatrix poisson_matrix(const PrecisionOperator& q, const VertexSet& sigma) {
  int n = q.q.rows();
  std::vector<int> comp = sigma.complement(n);
  int ns = static_cast<int>(sigma.indices.size());
  DenseMatrix pi(n, ns);
  for (int k = 0; k < ns; ++k) pi(sigma.indices[k], k) = 1.0;
  if (comp.empty()) return pi;
  DenseMatrix qcc = submatrix(q.q, comp, comp);
  DenseMatrix qcs = submatrix(q.q, comp, sigma.indices);
  DenseMatrix l = cholesky(qcc);
  for (int k = 0; k < ns; ++k) {
    Vec b(comp.size());
    for (size_t i = 0; i < comp.size(); ++i) b[i] = qcs(static_cast<int>(i), k);
    Vec u = cholesky_solve(l, b);
    for (size_t i = 0; i < comp.size(); ++i) pi(comp[i], k) = -u[i];
  }
  return pi;
}

Vec poisson_extend(const PrecisionOperator& q, const VertexSet& sigma, const Vec& f) {
  if (f.size() != sigma.indices.size())
    throw InvalidInput("poisson_extend: boundary data size mismatch");
  for (double v : f)
    if (!std::isfinite(v)) throw InvalidInput("poisson_extend: non-finite boundary data");
  DenseMatrix pi = poisson_matrix(q, sigma);
  return matvec(pi, f);
}

MarkovDecomposition markov_decompose(const PrecisionOperator& q, const VertexSet& sigma) {
  int n = q.q.rows();
  MarkovDecomposition md;
  md.sigma_part.mean.assign(n, 0.0);
  md.dirichlet_part.mean.assign(n, 0.0);
  if (sigma.indices.empty()) {
    md.sigma_part.covariance = DenseMatrix(n, n);
    md.dirichlet_part.covariance = green(q).covariance;
    return md;
  }
  std::vector<int> comp = sigma.complement(n);
  if (comp.empty()) {
    md.sigma_part.covariance = green(q).covariance;
    md.dirichlet_part.covariance = DenseMatrix(n, n);
    return md;
  }
  DenseMatrix dn = schur_complement(q.q, sigma.indices);
  DenseMatrix dn_inv = spd_inverse(dn);
  DenseMatrix pi = poisson_matrix(q, sigma);
  md.sigma_part.covariance = pi * dn_inv * transpose(pi);
  DenseMatrix cd = spd_inverse(submatrix(q.q, comp, comp));
  DenseMatrix embed(n, n);
  for (size_t i = 0; i < comp.size(); ++i)
    for (size_t j = 0; j < comp.size(); ++j)
      embed(comp[i], comp[j]) = cd(static_cast<int>(i), static_cast<int>(j));
  md.dirichlet_part.covariance = embed;
  return md;
}

// log density of N(mean, C) with C given by its precision P and log det P
static double log_gaussian_density_prec(const Vec& x, const Vec& mean,
                                        const DenseMatrix& prec, double logdet_prec) {
  int n = static_cast<int>(x.size());
  Vec d(n);
  for (int i = 0; i < n; ++i) d[i] = x[i] - mean[i];
  Vec pd = matvec(prec, d);
  double quad = dot(d, pd);
  return 0.5 * logdet_prec - 0.5 * quad -
         0.5 * n * std::log(2.0 * 3.14159265358979323846);
}

BayesReport bayes_check(const PrecisionOperator& q, const VertexSet& s1,
                        const VertexSet& s2, int n_points, RngStream& rng) {
  if (s1.indices.empty() || s2.indices.empty())
    throw InvalidInput("bayes_check: both vertex sets must be nonempty");
  for (int a : s1.indices)
    for (int b : s2.indices)
      if (a == b) throw InvalidInput("bayes_check: vertex sets overlap");

  int n = q.q.rows();
  DenseMatrix c = spd_inverse(q.q);
  int n1 = static_cast<int>(s1.indices.size());
  int n2 = static_cast<int>(s2.indices.size());

  std::vector<int> joint = s1.indices;
  joint.insert(joint.end(), s2.indices.begin(), s2.indices.end());
  std::sort(joint.begin(), joint.end());
  VertexSet js = VertexSet::of(joint);
  // position of s1/s2 entries inside the sorted joint set
  std::vector<int> pos1(n1), pos2(n2);
  for (int k = 0; k < n1; ++k)
    pos1[k] = static_cast<int>(std::lower_bound(joint.begin(), joint.end(), s1.indices[k]) -
                               joint.begin());
  for (int k = 0; k < n2; ++k)
    pos2[k] = static_cast<int>(std::lower_bound(joint.begin(), joint.end(), s2.indices[k]) -
                               joint.begin());

  DenseMatrix joint_prec = schur_complement(q.q, joint);  // DN on s1 u s2
  double joint_logdet = logdet_from_cholesky(cholesky(joint_prec));

  struct Side {
    DenseMatrix marg_prec;  // of the conditioning set
    double marg_logdet;
    DenseMatrix trans;      // conditional mean matrix M
    DenseMatrix cond_prec;  // conditional precision (DN of the other set, grounded)
    double cond_logdet;
  };

  auto build_side = [&](const VertexSet& a, const VertexSet& b) {
    Side s;
    DenseMatrix ca = submatrix(c, a.indices, a.indices);
    s.marg_prec = spd_inverse(ca);
    s.marg_logdet = logdet_from_cholesky(cholesky(s.marg_prec));
    // transition via the harmonic extension restricted to b
    DenseMatrix pi = poisson_matrix(q, a);
    std::vector<int> cols(a.indices.size());
    for (size_t k = 0; k < cols.size(); ++k) cols[k] = static_cast<int>(k);
    s.trans = submatrix(pi, b.indices, cols);
    // grounded Schur: delete a, Schur onto b
    std::vector<int> comp_a = a.complement(n);
    std::vector<int> b_in_comp(b.indices.size());
    for (size_t k = 0; k < b.indices.size(); ++k)
      b_in_comp[k] = static_cast<int>(std::lower_bound(comp_a.begin(), comp_a.end(), b.indices[k]) -
                                      comp_a.begin());
    DenseMatrix q_ground = submatrix(q.q, comp_a, comp_a);
    s.cond_prec = schur_complement(q_ground, b_in_comp);
    s.cond_logdet = logdet_from_cholesky(cholesky(s.cond_prec));
    return s;
  };

  Side side12 = build_side(s1, s2);  // condition on s1, predict s2
  Side side21 = build_side(s2, s1);

  // transition vs Gaussian conditional mean C_{ba} C_{aa}^{-1}
  double trans_err = 0.0;
  {
    DenseMatrix c21 = submatrix(c, s2.indices, s1.indices);
    DenseMatrix m = c21 * side12.marg_prec;
    trans_err = max_abs(m - side12.trans);
  }

  double max_disc = 0.0;
  Vec x1(n1), x2(n2), xj(n1 + n2), zero_mean(n1 + n2, 0.0);
  Vec zero1(n1, 0.0), zero2(n2, 0.0);
  for (int p = 0; p < n_points; ++p) {
    for (double& v : x1) v = 2.0 * rng.normal();
    for (double& v : x2) v = 2.0 * rng.normal();
    for (int k = 0; k < n1; ++k) xj[pos1[k]] = x1[k];
    for (int k = 0; k < n2; ++k) xj[pos2[k]] = x2[k];
    double lj = log_gaussian_density_prec(xj, zero_mean, joint_prec, joint_logdet);
    Vec mean2 = matvec(side12.trans, x1);
    double l12 = log_gaussian_density_prec(x1, zero1, side12.marg_prec, side12.marg_logdet) +
                 log_gaussian_density_prec(x2, mean2, side12.cond_prec, side12.cond_logdet);
    Vec mean1 = matvec(side21.trans, x2);
    double l21 = log_gaussian_density_prec(x2, zero2, side21.marg_prec, side21.marg_logdet) +
                 log_gaussian_density_prec(x1, mean1, side21.cond_prec, side21.cond_logdet);
    max_disc = std::max({max_disc, std::fabs(lj - l12), std::fabs(lj - l21),
                         std::fabs(l12 - l21)});
  }
  return {max_disc, trans_err, n_points};
}

RpReport rp_check(const PrecisionOperator& q) {
  const LatticeGraph& g = q.graph;
  if (g.kind != LatticeGraph::Kind::double_of_region || g.involution.empty())
    throw InvalidInput("rp_check: graph is not a double-of-region with involution");
  int n = g.n_vertices;

  VertexSet sigma = VertexSet::of(g.fixed_set);
  std::vector<char> on_sigma(n, 0);
  for (int i : sigma.indices) on_sigma[i] = 1;
  // region = sigma plus one side of the involution
  std::vector<int> region, interior;
  for (int i = 0; i < n; ++i) {
    if (on_sigma[i]) {
      region.push_back(i);
    } else if (i < g.involution[i]) {
      region.push_back(i);
      interior.push_back(i);
    }
  }
  std::sort(region.begin(), region.end());

  DenseMatrix c = spd_inverse(q.q);
  DenseMatrix dn_double = schur_complement(q.q, sigma.indices);
  DenseMatrix dn_region = scaled(dn_double, 0.5);  // method of images
  DenseMatrix dn_region_inv = spd_inverse(dn_region);
  DenseMatrix pi_full = poisson_matrix(q, sigma);
  std::vector<int> all_cols(sigma.indices.size());
  for (size_t k = 0; k < all_cols.size(); ++k) all_cols[k] = static_cast<int>(k);
  DenseMatrix pi = submatrix(pi_full, region, all_cols);

  // C_D on the region interior, embedded over the region
  DenseMatrix q_int = submatrix(q.q, interior, interior);
  DenseMatrix cd_small = spd_inverse(q_int);
  int nr = static_cast<int>(region.size());
  DenseMatrix cd(nr, nr);
  std::vector<int> pos_of(n, -1);
  for (int k = 0; k < nr; ++k) pos_of[region[k]] = k;
  for (size_t i = 0; i < interior.size(); ++i)
    for (size_t j = 0; j < interior.size(); ++j)
      cd(pos_of[interior[i]], pos_of[interior[j]]) =
          cd_small(static_cast<int>(i), static_cast<int>(j));

  DenseMatrix cn_minus_cd = pi * dn_region_inv * transpose(pi);

  // (i) Markov identity restricted to the region: (Q^{-1})_{RR} = C_D + PI (2 DN_region)^{-1} PI^T
  DenseMatrix c_rr = submatrix(c, region, region);
  DenseMatrix markov = c_rr - cd - scaled(cn_minus_cd, 0.5);
  double err_markov = max_abs(markov);

  // (ii) 2 Pi+ theta C = C_N - C_D on the region
  DenseMatrix theta_c(nr, nr);
  for (int a = 0; a < nr; ++a)
    for (int b = 0; b < nr; ++b)
      theta_c(a, b) = c(g.involution[region[a]], region[b]);
  double err_image = max_abs(scaled(theta_c, 2.0) - cn_minus_cd);

  // (iii) positivity of C_N - C_D
  EigenDecomposition e = sym_eigen(cn_minus_cd);
  return {err_markov, err_image, e.values.back()};
}

QuadPerturbation quad_perturb(const PrecisionOperator& q, const DenseMatrix& v) {
  if (!v.is_symmetric()) throw InvalidInput("quad_perturb: V not symmetric");
  if (v.rows() != q.q.rows()) throw InvalidInput("quad_perturb: dimension mismatch");
  DenseMatrix qv = q.q + v;
  DenseMatrix l_qv = cholesky(qv);  // NotPositiveDefinite when Q+V is not PD
  DenseMatrix l_q = cholesky(q.q);
  QuadPerturbation out;
  out.log_z = 0.5 * (logdet_from_cholesky(l_q) - logdet_from_cholesky(l_qv));
  out.z = std::exp(out.log_z);
  out.gibbs.covariance = spd_inverse(qv);
  out.gibbs.mean.assign(q.q.rows(), 0.0);
  return out;
}

McEstimate quad_perturb_mc(const PrecisionOperator& q, const DenseMatrix& v,
                           long n_samples, RngStream& rng) {
  int n = q.q.rows();
  DenseMatrix l = cholesky(q.q);
  Vec z(n);
  double sum = 0, sum_sq = 0;
  for (long s = 0; s < n_samples; ++s) {
    rng.fill_normal(z);
    Vec x = backward_subst_transposed(l, z);
    Vec vx = matvec(v, x);
    double w = std::exp(-0.5 * dot(x, vx));
    sum += w;
    sum_sq += w * w;
  }
  McEstimate e;
  e.estimate = sum / n_samples;
  double sample_var =
      std::max(0.0, sum_sq / n_samples - e.estimate * e.estimate) *
      n_samples / (n_samples - 1.0);
  e.std_error = std::sqrt(sample_var / n_samples);
  e.ess = sum * sum / std::max(sum_sq, 1e-300);
  e.degenerate_weights = e.ess < 0.01 * n_samples;
  return e;
}

double TraceLawDensity::log_density(const Vec& phi) const {
  Vec d1 = matvec(dn, phi);
  Vec d2 = matvec(ref_precision, phi);
  return log_norm - 0.5 * (dot(phi, d1) - dot(phi, d2));
}

double TraceLawDensity::log_integral_against_reference() const {
  // integral e^{-phi (DN - R^{-1}) phi / 2} dN(0,R) = det(R^{-1})^{1/2} det(DN)^{-1/2},
  // so with the prefactor the total is 1. The log dets here go through the
  // eigenvalue route, independent of the Cholesky route in log_norm.
  auto logdet_eigen = [](const DenseMatrix& m) {
    double s = 0.0;
    for (double l : sym_eigen(m).values) s += std::log(l);
    return s;
  };
  return log_norm + 0.5 * logdet_eigen(ref_precision) - 0.5 * logdet_eigen(dn);
}

TraceLawDensity trace_law_density(const PrecisionOperator& q, const VertexSet& sigma,
                                  const GaussianLaw& reference) {
  TraceLawDensity d;
  d.dn = dn_map(q, sigma);
  d.ref_precision = spd_inverse(reference.covariance);
  double logdet_ref_prec = logdet_from_cholesky(cholesky(d.ref_precision));
  double logdet_dn = logdet_from_cholesky(cholesky(d.dn));
  // (det R^{-1})^{-1/2} (det DN)^{1/2}
  d.log_norm = -0.5 * logdet_ref_prec + 0.5 * logdet_dn;
  return d;
}

ChainedAccumulator mc_accumulate(long n_samples, std::uint64_t seed,
                                 std::uint64_t stream_base,
                                 const std::function<double(RngStream&)>& one_sample,
                                 int chains) {
  if (chains < 1) chains = 1;
  std::vector<long> counts(chains, n_samples / chains);
  for (long r = 0; r < n_samples % chains; ++r) ++counts[r];

  int threads = 1;
  if (const char* env = std::getenv("QLAB_THREADS")) {
    threads = std::max(1, std::atoi(env));
    threads = std::min<int>(threads, chains);
  }
  std::vector<double> sums(chains, 0.0), sqs(chains, 0.0);
  auto run_chain = [&](int cindex) {
    RngStream rng(seed, stream_base + static_cast<std::uint64_t>(cindex));
    double s = 0, s2 = 0;
    for (long k = 0; k < counts[cindex]; ++k) {
      double v = one_sample(rng);
      s += v;
      s2 += v * v;
    }
    sums[cindex] = s;
    sqs[cindex] = s2;
  };
  if (threads == 1) {
    for (int cidx = 0; cidx < chains; ++cidx) run_chain(cidx);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t]() {
        for (int cidx = t; cidx < chains; cidx += threads) run_chain(cidx);
      });
    for (auto& th : pool) th.join();
  }
  ChainedAccumulator acc;
  for (int cidx = 0; cidx < chains; ++cidx) {  // fixed reduction order
    acc.sum += sums[cidx];
    acc.sum_sq += sqs[cidx];
  }
  acc.count = n_samples;
  return acc;
}

}  // namespace qlab::lattice
