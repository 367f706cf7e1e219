#pragma once

#include "qlab/lattice.hpp"
#include "qlab/wick.hpp"

namespace qlab::pphi2 {

using lattice::PrecisionOperator;
using lattice::VertexSet;
using wick::Polynomial;

struct InteractionSpec {
  Polynomial p;
  Vec chi;  // nonnegative cutoff weights, one per vertex

  static InteractionSpec uniform(Polynomial p, int n_vertices);
};

struct TadpoleField {
  Vec values;  // c_x = (Q^{-1})_{xx}
};

// Exact Green diagonal. Vertex-transitive tori go through the Fourier symbol
// sum; everything else is a dense inverse.
TadpoleField tadpole(const PrecisionOperator& q);

// Per-vertex Wick-ordered interaction, built once and evaluated many times.
// S(phi) = sum_x measure_x chi_x :P:_{c_x}(phi_x).
class WickAction {
 public:
  WickAction(InteractionSpec spec, const PrecisionOperator& q);
  WickAction(InteractionSpec spec, const PrecisionOperator& q, Vec wick_constants);

  double operator()(const Vec& phi) const;
  // analytic lower bound: sum_x weight_x min(:P:_{c_x})
  double lower_bound() const;
  const Vec& constants() const { return c_; }
  const Vec& site_weights() const { return weight_; }

 private:
  void build();
  InteractionSpec spec_;
  Vec c_;
  Vec weight_;  // measure * chi
  std::vector<Polynomial> per_vertex_;
};

double wick_action(const InteractionSpec& spec, const PrecisionOperator& q,
                   const Vec& phi);

// Var(S) = (2n)! sum_{x,y} w_x w_y ((Q^{-1})_{xy})^{2n} for P = theta^{2n}.
double action_variance(const InteractionSpec& spec, const PrecisionOperator& q);

struct PartitionEstimate {
  double estimate;
  double std_error;
  double ess;
  bool degenerate_weights;
};

PartitionEstimate partition_mc(const InteractionSpec& spec, const PrecisionOperator& q,
                               long n_samples, std::uint64_t seed,
                               std::uint64_t stream_base = 0);

struct DecoupleReport {
  double max_identity_error;   // |S_M - S_Omega - S_Omega^c - S_sigma| over samples
  double locality_error;       // exact-zero check for a perturbation outside Omega u sigma
  int components;
};

// sigma must dissect the graph; all pieces share the same per-vertex constants.
DecoupleReport decouple_check(const PrecisionOperator& q, const VertexSet& sigma,
                              const InteractionSpec& spec, int n_samples,
                              RngStream& rng);

struct MollifierRow {
  double eps;
  double l2_distance;  // between box-average and heat-flow mollified actions
};

// Row-normalized average over the graph ball of radius round(eps/spacing).
DenseMatrix box_mollifier(const PrecisionOperator& q, double eps);
// exp(-eps L) with the dimensionless combinatorial Laplacian.
DenseMatrix heat_mollifier(const PrecisionOperator& q, double eps);

// L2(mu) distance between the two mollified Wick actions, each ordered at its
// own mollified variance; exact via E[:X^k::Y^k:] = k! E[XY]^k.
double mollified_action_distance(const InteractionSpec& spec,
                                 const PrecisionOperator& q, const DenseMatrix& k1,
                                 const DenseMatrix& k2);

std::vector<MollifierRow> mollifier_compare(const PrecisionOperator& q,
                                            const InteractionSpec& spec,
                                            const Vec& eps_list);

}  // namespace qlab::pphi2
