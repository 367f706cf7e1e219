#pragma once

#include "qlab/numerics.hpp"
#include "qlab/wick.hpp"

namespace qlab::chain {

using wick::Polynomial;

// One-step kernel exp(log_prefactor - kinetic (x-y)^2 - (P(x)+P(y))/2).
// standard() is the bare convention (kinetic 1, prefactor 1). The normalized
// Gaussian convention rescales so that tr T^N reproduces the circulant
// determinant with symbol 1 + m^2 - cos(2 pi k / N).
struct ChainKernel {
  Polynomial p;
  double kinetic = 1.0;
  double log_prefactor = 0.0;

  static ChainKernel standard(Polynomial p);
  static ChainKernel normalized_gaussian(double mass);

  double operator()(double x, double y) const;
};

struct TransferOperator {
  QuadratureGrid grid;
  ChainKernel kernel;
  DenseMatrix matrix;  // sqrt(w_i) K(x_i,x_j) sqrt(w_j)
};

struct SpectralReport {
  double lambda0 = 0;
  double lambda1 = 0;
  double alpha = 0;  // |lambda1| / lambda0
  Vec ground;        // entrywise positive, unit norm
};

TransferOperator build_transfer(const Polynomial& p, const QuadratureGrid& grid);
TransferOperator build_transfer(const ChainKernel& kernel, const QuadratureGrid& grid);

// tr(T^n) = sum_i lambda_i^n, in log space.
double log_partition_function(const TransferOperator& t, int n);
double partition_function(const TransferOperator& t, int n);

// Same two, computed from a precomputed spectrum (free_energy reuses it).
double log_trace_power(const Vec& eigenvalues, int n);

// K_n(sigma_out, sigma_in) by n-1 quadrature contractions. Endpoints must lie
// within the grid hull.
double conditioned_kernel(const TransferOperator& t, int n, double sigma_in,
                          double sigma_out);

SpectralReport spectral_report(const TransferOperator& t);

struct FreeEnergyRow {
  int n;
  double log_z;
  double free_energy;  // log_z / n
};

struct FreeEnergyTable {
  std::vector<FreeEnergyRow> rows;
  double log_lambda0;
  double alpha;
};

FreeEnergyTable free_energy(const TransferOperator& t, const std::vector<int>& n_list);

struct Insertion {
  int site;      // 1-based
  Vec values;    // diagonal grid functional
};

// Finite n: tr(T^{n+1-i_k} F_k ... F_1 T^{i_1-1}) / tr(T^n).
// n = 0 requests the thermodynamic limit via the ground state.
double gibbs_expectation(const TransferOperator& t,
                         const std::vector<Insertion>& insertions, int n);

struct MixingRow {
  int k;
  double value;  // |<f, That^k g> - <f,O><O,g>|
  double bound;  // alpha^k |f| |g|
};

std::vector<MixingRow> mixing_check(const TransferOperator& t, const Vec& f,
                                    const Vec& g, int k_max);

// Circulant benchmark: log det(A_N)^{-1/2} with symbol 1+m^2-cos(2 pi k/N).
double normalized_gaussian_log_z(double mass, int n);

// Closed form of the free-energy limit: -1/2 log((a + sqrt(a^2-1))/2), a = 1+m^2.
double gaussian_free_energy_limit(double mass);

}  // namespace qlab::chain
