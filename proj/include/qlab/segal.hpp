#pragma once

#include "qlab/chain.hpp"
#include "qlab/lattice.hpp"
#include "qlab/wick.hpp"

#include <optional>

namespace qlab::segal {

struct SlabInteraction {
  wick::Polynomial p;
  Vec wick_constants;  // per slab vertex; empty means zero (plain ordering)
  Vec chi;             // per slab vertex, before boundary halving; empty means 1
};

// A flat lattice slab: transverse circle of n_transverse sites, n_layers
// interior layers, two boundary circles. On-circle terms (transverse edges and
// mass) carry weight 1/2 on the boundary layers so that glued slabs reassemble
// the torus action exactly.
struct CylinderSlab {
  int n_transverse = 1;
  int n_layers = 0;
  double spacing = 1.0;
  double time_spacing = 0.0;  // 0: same as spacing
  double mass = 1.0;
  std::optional<SlabInteraction> interaction;
  int quadrature_order = 16;
  double grid_scale = 0.0;  // 0: auto from the boundary reference operator

  double kt() const { return 1.0 / ((time_spacing > 0 ? time_spacing : spacing) *
                                    (time_spacing > 0 ? time_spacing : spacing)); }
  double ks() const { return 1.0 / (spacing * spacing); }
  int n_sites() const { return n_transverse * (n_layers + 2); }
  int site(int layer, int s) const { return layer * n_transverse + s; }
};

struct AmplitudeOperator {
  int n_transverse = 0;
  QuadratureGrid grid1d;   // per-dimension grid, already scaled
  DenseMatrix dhat;        // boundary reference operator (Delta_Sigma + m^2)^{1/2}
  DenseMatrix matrix;      // sqrt-weight symmetrized kernel, det constant included
  double log_constant = 0; // -1/2 logdet(Q_II), carried for projective gluing
  bool interacting = false;

  int n_nodes() const { return matrix.rows(); }
};

// Full slab quadratic form and its boundary reduction.
struct SlabForm {
  DenseMatrix q;               // n_sites x n_sites
  std::vector<int> boundary;   // in-layer sites then out-layer sites
  std::vector<int> interior;
  DenseMatrix dn;              // Schur complement onto the boundary
  double logdet_interior = 0;  // logdet Q_II (0 when no interior)
  DenseMatrix poisson;         // n_sites x boundary extension matrix
};

SlabForm slab_form(const CylinderSlab& slab);

// (Delta_Sigma + m^2)^{1/2} on the transverse circle.
DenseMatrix boundary_reference(const CylinderSlab& slab);

// Transverse circulant eigenvalues l_j = 2 ks (1 - cos(2 pi j / n)) + m^2.
Vec transverse_symbol(const CylinderSlab& slab);

AmplitudeOperator build_amplitude(const CylinderSlab& slab);

// compose(u1, u2) applies u1 first: U_{glued} = U2 o U1.
AmplitudeOperator compose(const AmplitudeOperator& u1, const AmplitudeOperator& u2);

double trace(const AmplitudeOperator& u, int n);

struct AdjointReport {
  double asymmetry;  // |M - M^T|_max / |M|_max
};
AdjointReport adjoint_check(const AmplitudeOperator& u);

struct SpectralSuite {
  double lambda0, lambda1, alpha;
  Vec ground;
  struct TraceRow {
    int n;
    double value;      // (1/n) log tr U^n
    double deviation;  // value - log lambda0
  };
  std::vector<TraceRow> trace_rows;
  double trace_fit_rate;  // fitted decay rate of |deviation * n| in n
  struct GibbsRow {
    int n;
    double ratio;  // tr(U^{n-L} F) / tr(U^n)
    double error;  // against <O, F O> / lambda0^L
  };
  std::vector<GibbsRow> gibbs_rows;
  double gibbs_limit;
  double gibbs_fit_rate;
  double mixing_max_excess;  // max_k value_k - alpha^k |f||g|
};

SpectralSuite spectral_suite(const AmplitudeOperator& u, const Vec& observable,
                             int gibbs_l, const std::vector<int>& n_list,
                             int k_max);

struct DensityCheckReport {
  double max_log_discrepancy;  // over random boundary points
  int points;
};

// Finite-dimensional amplitude identity on the slab double:
// |A(phi)|^2 rho_{2D}(phi) det(2D)^{-1/2} = rho_{DN_double}(phi) det(Q_double)^{-1/2},
// determinants assembled through the discrete Schur (BFK) identity.
DensityCheckReport amplitude_density_check(const CylinderSlab& slab, int n_points,
                                           RngStream& rng);

// The closed torus obtained by gluing n copies of the slab, as a lattice
// precision operator (unit vertex measure).
lattice::PrecisionOperator glued_torus(const CylinderSlab& slab, int n_copies);

// -1/2 logdet of the glued torus by its 2D circulant symbol (free slabs).
double glued_torus_log_z(const CylinderSlab& slab, int n_copies);

// Per-Fourier-mode reduction of a free slab.
struct ModeAmplitude {
  double omega;           // sqrt of the transverse symbol
  double dn00, dn01;      // 2x2 boundary reduction of the 1D path
  double logdet_interior;
};
std::vector<ModeAmplitude> mode_amplitudes(const CylinderSlab& slab);

}  // namespace qlab::segal
