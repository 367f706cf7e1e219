#pragma once

#include "qlab/numerics.hpp"

#include <optional>

namespace qlab::lattice {

struct LatticeGraph {
  enum class Kind { torus, cycle, double_of_region, custom };

  struct Edge {
    int i, j;
    double w;
  };

  int n_vertices = 0;
  std::vector<Edge> edges;
  Vec vertex_measure;
  double spacing = 1.0;
  Kind kind = Kind::custom;

  // torus metadata
  int n1 = 0, n2 = 0;

  // double-of-region metadata: mirror involution and the fixed set
  std::vector<int> involution;
  std::vector<int> fixed_set;

  bool connected() const;
  int vertex_at(int row, int col) const;  // torus/grid indexing (row*n2+col)
};

// Uniform vertex measure spacing^2 unless overridden.
LatticeGraph torus(int n1, int n2, double spacing = 1.0,
                   std::optional<double> measure = std::nullopt);
// Uniform vertex measure spacing unless overridden.
LatticeGraph cycle(int n, double spacing = 1.0,
                   std::optional<double> measure = std::nullopt);
LatticeGraph from_edges(int n_vertices, std::vector<LatticeGraph::Edge> edges,
                        Vec vertex_measure, double spacing = 1.0);

// Mirror an open n1 x n2 grid region across its last column. The double is an
// n1 x (2 n2 - 1) grid; the shared column is the fixed set of the involution.
// periodic_rows closes the first grid direction into a cycle.
LatticeGraph double_of_strip(int n1, int n2, double spacing = 1.0,
                             bool periodic_rows = false);

// Q = D^{1/2} (L_w / spacing^2 + m^2 I) D^{1/2}, D = diag(vertex measure).
struct PrecisionOperator {
  LatticeGraph graph;
  double mass = 1.0;
  DenseMatrix q;
};

PrecisionOperator precision_operator(LatticeGraph graph, double mass);

struct VertexSet {
  std::vector<int> indices;  // strictly increasing

  static VertexSet of(std::vector<int> idx);
  std::vector<int> complement(int n) const;
};

struct GaussianLaw {
  DenseMatrix covariance;
  Vec mean;
};

// Q^{-1} as a mean-zero law.
GaussianLaw green(const PrecisionOperator& q);

// count i.i.d. samples with covariance Q^{-1}; row r is sample r.
DenseMatrix sample(const PrecisionOperator& q, int count, RngStream& rng);

// Schur complement of Q onto sigma; (DN)^{-1} = (Q^{-1})_{sigma sigma}.
DenseMatrix dn_map(const PrecisionOperator& q, const VertexSet& sigma);

// Harmonic extension: u|_sigma = f, (Q u)|_complement = 0.
Vec poisson_extend(const PrecisionOperator& q, const VertexSet& sigma, const Vec& f);

// Extension matrix (n x |sigma|): column k extends the k-th unit boundary datum.
DenseMatrix poisson_matrix(const PrecisionOperator& q, const VertexSet& sigma);

struct MarkovDecomposition {
  GaussianLaw sigma_part;      // law of PI (phi|_sigma), covariance PI DN^{-1} PI^T
  GaussianLaw dirichlet_part;  // (Q_BB)^{-1} embedded with zeros on sigma
};

MarkovDecomposition markov_decompose(const PrecisionOperator& q, const VertexSet& sigma);

struct BayesReport {
  double max_log_density_discrepancy;  // over sampled points, both orders
  double transition_matrix_error;      // |M21 - C21 C11^{-1}|_max
  int points;
};

BayesReport bayes_check(const PrecisionOperator& q, const VertexSet& s1,
                        const VertexSet& s2, int n_points, RngStream& rng);

struct RpReport {
  double markov_identity_error;   // (Q^{-1})_{OO} - C_D - PI DN^{-1} PI^T on the region
  double image_identity_error;    // 2 Pi+ theta C  vs  C_N - C_D
  double min_eigenvalue;          // of C_N - C_D restricted to the region
};

RpReport rp_check(const PrecisionOperator& q);

struct QuadPerturbation {
  double z;            // det(1 + C^{1/2} V C^{1/2})^{-1/2}
  double log_z;
  GaussianLaw gibbs;   // covariance (Q + V)^{-1}
};

QuadPerturbation quad_perturb(const PrecisionOperator& q, const DenseMatrix& v);

struct McEstimate {
  double estimate;
  double std_error;
  double ess;  // effective sample size
  bool degenerate_weights;
};

// Monte-Carlo E_C[e^{-x^T V x / 2}] against the determinant formula.
McEstimate quad_perturb_mc(const PrecisionOperator& q, const DenseMatrix& v,
                           long n_samples, RngStream& rng);

// Radon-Nikodym density of the sigma trace law against a reference Gaussian:
// phi -> det(R^{-1})^{-1/2} det(DN)^{1/2} exp(-phi^T (DN - R^{-1}) phi / 2).
struct TraceLawDensity {
  DenseMatrix dn;
  DenseMatrix ref_precision;
  double log_norm;  // (log det R + log det DN) / 2

  double log_density(const Vec& phi) const;
  // log of the exact Gaussian integral of the density against the reference law;
  // zero when the bookkeeping is consistent.
  double log_integral_against_reference() const;
};

TraceLawDensity trace_law_density(const PrecisionOperator& q, const VertexSet& sigma,
                                  const GaussianLaw& reference);

// Fixed-order chained Monte-Carlo: runs `chains` independent streams
// (stream ids base..base+chains-1), optionally on threads, reducing partial
// sums in chain order so the result is independent of the thread count.
struct ChainedAccumulator {
  double sum = 0, sum_sq = 0;
  long count = 0;
};

ChainedAccumulator mc_accumulate(long n_samples, std::uint64_t seed,
                                 std::uint64_t stream_base,
                                 const std::function<double(RngStream&)>& one_sample,
                                 int chains = 64);

}  // namespace qlab::lattice
