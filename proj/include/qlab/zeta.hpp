#pragma once

#include "qlab/numerics.hpp"

namespace qlab::zeta {

// Positive eigenvalue family lambda_0 <= lambda_1 <= ... with multiplicities,
// plus what the Mellin continuation needs: the small-t heat trace model
// theta(t) ~ sum_j coeff_j t^{exp_j} and (optionally) an exact small-t
// evaluator such as a theta-function modular form.
struct EigenvalueFamily {
  std::function<std::pair<double, double>(std::int64_t)> eigen;  // k -> (lambda, mult)
  double growth_exponent = 2.0;  // lambda_k ~ k^s
  double lambda_min = 1.0;       // smallest eigenvalue, sets the internal split
  struct ExpTerm {
    double coeff;
    double exponent;
  };
  std::vector<ExpTerm> small_t;                 // may be empty (then fitted)
  std::function<double(double)> heat_small_t;   // exact theta for small t
  // theta(t) - model(t), computed in a cancellation-free form when available
  std::function<double(double)> heat_residual;

  double heat_direct(double t) const;  // eigenvalue sum with adaptive cutoff
};

EigenvalueFamily circle_helmholtz_family(double mass, double circumference);
// the square of the scaled first-order family: eigenvalues c^2 ((2 pi k/L)^2 + m^2)
EigenvalueFamily scaled_circle_family(double mass, double circumference, double c);
EigenvalueFamily harmonic_family();                 // n^2, n >= 1
EigenvalueFamily single_eigenvalue_family(double lambda);

struct ZetaResult {
  double zeta0 = 0;
  double zeta_prime0 = 0;
  double logdet = 0;  // -zeta'(0)
  double error_estimate = 0;
};

// zeta(s) by Mellin split at t_split; value at a regular point, or finite
// part + residue at a simple pole of the continuation.
struct ZetaValue {
  double value = 0;     // value, or finite part at a pole
  double residue = 0;
  bool at_pole = false;
};

ZetaResult zeta_continue(const EigenvalueFamily& fam, double t_split);
ZetaValue zeta_at(const EigenvalueFamily& fam, double s, double t_split);

// Zeta determinant of -d^2/dtheta^2 + m^2 on the circumference-L circle;
// closed form 4 sinh^2(mL/2) for cross-checking.
ZetaResult detzeta_circle(double mass, double circumference, double t_split = 1.0);
double detzeta_circle_closed_form(double mass, double circumference);

// Flat-cylinder mode data, omega_k = sqrt((2 pi k / L)^2 + m^2).
struct CylinderMode {
  int k;
  double omega;
  double dn00, dn01;    // two-boundary DN: omega [[coth, -csch], [-csch, coth]]
  double jumpy;         // 2 omega tanh(omega T / 2)
  double transition;    // e^{-omega T}
};

struct CylinderReport {
  std::vector<CylinderMode> modes;  // k = 0, 1, 2, ... (|k| mode, mult 2 for k>0)
  double trace_class_sum;           // sum_k mult |jumpy_k - 2 omega_k|
  double tail_bound;                // last included increment
};

CylinderReport dn_cylinder(double mass, double circumference, double height,
                           int max_modes = 4096);

struct BfkTorusReport {
  double logdet_torus;
  double logdet_cylinder_dirichlet;
  double logdet_dn_jumpy;
  double bfk_error;            // torus - (cylinder + dn)
  double per_mode_ratio;       // (2 sinh wT / w)(2 w tanh(wT/2)) / (4 sinh^2(wT/2))
  double zeta_omega_zero;      // regularized transverse count, should vanish
  double swap_error;           // torus logdet minus the (L,T)-swapped value
};

BfkTorusReport bfk_torus_check(double mass, double circumference, double height);

// prod (1 + z lambda_k) over a finite diagonal family in log-safe form.
double fredholm_det(const Vec& eigenvalues, double z);
// Plemelj recursion from power traces tr(A^k), k = 1..K.
double fredholm_det_from_traces(const Vec& power_traces, double z);
double fredholm_det_matrix(const DenseMatrix& a, double z);

struct RnIdentityReport {
  double logdet_2d;        // zeta det of 2 D
  double log_fredholm;     // log det_F(1 + (2D)^{-1}(DN - 2D)) = sum log tanh
  double logdet_dn;        // zeta det of the jumpy DN family
  double identity_error;   // logdet_2d + log_fredholm - logdet_dn
  double tanh_factor_tail; // last increment of the absolutely convergent product
};

RnIdentityReport rn_det_identity(double mass, double circumference, double height);

double digamma(double x);

}  // namespace qlab::zeta
