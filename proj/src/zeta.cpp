#include "qlab/zeta.hpp"

#include <cmath>

namespace qlab::zeta {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kEuler = 0.57721566490153286061;
}  // namespace

double EigenvalueFamily::heat_direct(double t) const {
  double total = 0.0;
  for (std::int64_t k = 0;; ++k) {
    auto [lam, mult] = eigen(k);
    double term = mult * std::exp(-t * lam);
    total += term;
    if (term < 1e-22 * (1.0 + total) && k > 4) break;
    if (k > 100000000) throw Error("heat_direct: eigenvalue sum did not converge");
  }
  return total;
}

EigenvalueFamily circle_helmholtz_family(double mass, double circumference) {
  return scaled_circle_family(mass, circumference, 1.0);
}

EigenvalueFamily scaled_circle_family(double mass, double circumference, double c) {
  if (mass <= 0 || circumference <= 0 || c <= 0)
    throw InvalidInput("circle family: mass, circumference, scale must be positive");
  double m = mass, el = circumference, c2 = c * c;
  EigenvalueFamily f;
  f.growth_exponent = 2.0;
  f.lambda_min = c2 * m * m;
  f.eigen = [m, el, c2](std::int64_t k) {
    double w = 2.0 * kPi * static_cast<double>(k) / el;
    return std::pair<double, double>(c2 * (w * w + m * m), k == 0 ? 1.0 : 2.0);
  };
  // theta(t) = e^{-c^2 m^2 t} (L / sqrt(4 pi c^2 t)) sum_j e^{-j^2 L^2/(4 c^2 t)}
  // expansion: sum_j [L/sqrt(4 pi c^2)] (-c^2 m^2)^j / j!  t^{j - 1/2}
  double base = el / std::sqrt(4.0 * kPi * c2);
  double coeff = base;
  for (int j = 0; j < 220; ++j) {
    f.small_t.push_back({coeff, j - 0.5});
    coeff *= -c2 * m * m / (j + 1.0);
    if (std::fabs(coeff) < 1e-24 && j > 8) break;
  }
  f.heat_small_t = [m, el, c2, base](double t) {
    double s = 1.0;
    for (int j = 1; j < 200; ++j) {
      double term = 2.0 * std::exp(-j * j * el * el / (4.0 * c2 * t));
      s += term;
      if (term < 1e-22) break;
    }
    return std::exp(-c2 * m * m * t) * base / std::sqrt(t) * s;
  };
  // theta - leading term: only the theta-function images survive
  f.heat_residual = [m, el, c2, base](double t) {
    double s = 0.0;
    for (int j = 1; j < 200; ++j) {
      double term = 2.0 * std::exp(-j * j * el * el / (4.0 * c2 * t));
      s += term;
      if (term < 1e-22) break;
    }
    return std::exp(-c2 * m * m * t) * base / std::sqrt(t) * s;
  };
  return f;
}

EigenvalueFamily harmonic_family() {
  EigenvalueFamily f;
  f.growth_exponent = 2.0;
  f.lambda_min = 1.0;
  f.eigen = [](std::int64_t k) {
    double n = static_cast<double>(k + 1);
    return std::pair<double, double>(n * n, 1.0);
  };
  f.small_t = {{0.5 * std::sqrt(kPi), -0.5}, {-0.5, 0.0}};
  f.heat_small_t = [](double t) {
    double s = 1.0;
    for (int j = 1; j < 200; ++j) {
      double term = 2.0 * std::exp(-kPi * kPi * j * j / t);
      s += term;
      if (term < 1e-22) break;
    }
    return 0.5 * (std::sqrt(kPi / t) * s - 1.0);
  };
  f.heat_residual = [](double t) {
    double s = 0.0;
    for (int j = 1; j < 200; ++j) {
      double term = 2.0 * std::exp(-kPi * kPi * j * j / t);
      s += term;
      if (term < 1e-22) break;
    }
    return 0.5 * std::sqrt(kPi / t) * s;
  };
  return f;
}

EigenvalueFamily single_eigenvalue_family(double lambda) {
  if (lambda <= 0) throw InvalidInput("single_eigenvalue_family: lambda must be positive");
  EigenvalueFamily f;
  f.growth_exponent = 1.0;
  f.lambda_min = lambda;
  f.eigen = [lambda](std::int64_t k) {
    return std::pair<double, double>(k == 0 ? lambda : 1e300, k == 0 ? 1.0 : 0.0);
  };
  double coeff = 1.0;
  for (int j = 0; j < 200; ++j) {
    f.small_t.push_back({coeff, static_cast<double>(j)});
    coeff *= -lambda / (j + 1.0);
    if (std::fabs(coeff) < 1e-24 && j > 8) break;
  }
  f.heat_small_t = [lambda](double t) { return std::exp(-lambda * t); };
  f.heat_residual = [](double) { return 0.0; };  // the series is the exact theta
  return f;
}

double digamma(double x) {
  // reflection for negative arguments, recurrence up to the asymptotic range
  if (x < 0.0 && x == std::floor(x)) throw InvalidInput("digamma: pole");
  double result = 0.0;
  if (x < 0.0) return digamma(1.0 - x) - kPi / std::tan(kPi * x);
  while (x < 12.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 -
                    inv2 * (1.0 / 120.0 -
                            inv2 * (1.0 / 252.0 -
                                    inv2 * (1.0 / 240.0 - inv2 / 132.0))));
  return result;
}

namespace {

struct MellinParts {
  // B(s) = sum_j c_j t0^{s+e_j}/(s+e_j) + residual + tail, possibly with one
  // pole term c_p/(s+e_p) split off.
  double regular = 0;   // everything except a pole term, with t^epsilon expanded
  double pole_coeff = 0;
  bool has_pole = false;
};

// Model fit when no expansion is supplied: theta(t) ~ a t^{-1/2} + b + c t^{1/2}.
std::vector<EigenvalueFamily::ExpTerm> fit_small_t(const EigenvalueFamily& fam,
                                                   double t0) {
  Vec ts, ys;
  for (int i = 0; i < 24; ++i) {
    double t = t0 * (0.02 + 0.03 * i);
    ts.push_back(t);
    double th = fam.heat_small_t ? fam.heat_small_t(t) : fam.heat_direct(t);
    ys.push_back(th);
  }
  // least squares on [t^-1/2, 1, t^1/2]
  double a00 = 0, a01 = 0, a02 = 0, a11 = 0, a12 = 0, a22 = 0;
  double b0 = 0, b1 = 0, b2 = 0;
  for (size_t i = 0; i < ts.size(); ++i) {
    double f0 = 1.0 / std::sqrt(ts[i]), f1 = 1.0, f2 = std::sqrt(ts[i]);
    a00 += f0 * f0; a01 += f0 * f1; a02 += f0 * f2;
    a11 += f1 * f1; a12 += f1 * f2; a22 += f2 * f2;
    b0 += f0 * ys[i]; b1 += f1 * ys[i]; b2 += f2 * ys[i];
  }
  DenseMatrix a(3, 3);
  a(0, 0) = a00; a(0, 1) = a01; a(0, 2) = a02;
  a(1, 0) = a01; a(1, 1) = a11; a(1, 2) = a12;
  a(2, 0) = a02; a(2, 1) = a12; a(2, 2) = a22;
  Vec coef = cholesky_solve(cholesky(a), {b0, b1, b2});
  // validate
  double max_rel = 0.0;
  for (size_t i = 0; i < ts.size(); ++i) {
    double pred = coef[0] / std::sqrt(ts[i]) + coef[1] + coef[2] * std::sqrt(ts[i]);
    max_rel = std::max(max_rel, std::fabs(pred - ys[i]) / std::max(1.0, std::fabs(ys[i])));
  }
  if (max_rel > 1e-8)
    throw Error("zeta_continue: no small-t expansion and the fallback fit residual is too large");
  return {{coef[0], -0.5}, {coef[1], 0.0}, {coef[2], 0.5}};
}

double model_eval(const std::vector<EigenvalueFamily::ExpTerm>& terms, double t) {
  double s = 0.0;
  for (const auto& term : terms) s += term.coeff * std::pow(t, term.exponent);
  return s;
}

// B(s) pieces used by both zeta'(0) and zeta_at.
struct SplitEval {
  std::vector<EigenvalueFamily::ExpTerm> terms;
  double residual_integral;  // int_0^t0 t^{s-1} (theta - model)
  double tail_integral;      // int_t0^inf t^{s-1} theta
};

SplitEval mellin_split(const EigenvalueFamily& fam, double s, double t0) {
  SplitEval ev;
  ev.terms = fam.small_t.empty() ? fit_small_t(fam, t0) : fam.small_t;
  auto theta_small = [&](double t) {
    return fam.heat_small_t ? fam.heat_small_t(t) : fam.heat_direct(t);
  };
  const auto& terms = ev.terms;
  auto residual = [&](double t) {
    if (fam.heat_residual) return fam.heat_residual(t);
    return theta_small(t) - model_eval(terms, t);
  };
  ev.residual_integral = adaptive_simpson(
      [&](double t) {
        if (t <= 0.0) return 0.0;
        return std::pow(t, s - 1.0) * residual(t);
      },
      0.0, t0, 1e-14);
  double lam0 = fam.eigen(0).first;
  double t_max = std::max(2.0 * t0, 60.0 / lam0);
  ev.tail_integral = adaptive_simpson(
      [&](double t) { return std::pow(t, s - 1.0) * fam.heat_direct(t); }, t0,
      t_max, 1e-14);
  return ev;
}

// The analytic series in the split is alternating with scale lambda_min, so the
// split point is clamped where the series stays cancellation-free.
double clamp_split(const EigenvalueFamily& fam, double t_split) {
  return std::min(t_split, 2.0 / fam.lambda_min);
}

}  // namespace

static ZetaResult zeta_once(const EigenvalueFamily& fam, double t0) {
  SplitEval ev = mellin_split(fam, 0.0, t0);
  double c0 = 0.0;        // coefficient at t^0
  double b_reg = 0.0;     // sum over nonzero exponents + c0 log t0
  for (const auto& term : ev.terms) {
    if (std::fabs(term.exponent) < 1e-12) {
      c0 += term.coeff;
      b_reg += term.coeff * std::log(t0);
    } else {
      b_reg += term.coeff * std::pow(t0, term.exponent) / term.exponent;
    }
  }
  b_reg += ev.residual_integral + ev.tail_integral;
  ZetaResult r;
  r.zeta0 = c0;
  r.zeta_prime0 = kEuler * c0 + b_reg;
  r.logdet = -r.zeta_prime0;
  return r;
}

ZetaResult zeta_continue(const EigenvalueFamily& fam, double t_split) {
  if (t_split <= 0) throw InvalidInput("zeta_continue: t_split must be positive");
  double t_base = clamp_split(fam, t_split);
  ZetaResult r = zeta_once(fam, t_base);
  ZetaResult lo = zeta_once(fam, 0.5 * t_base);
  ZetaResult hi = zeta_once(fam, 2.0 * t_base);
  r.error_estimate = std::max(std::fabs(lo.logdet - r.logdet),
                              std::fabs(hi.logdet - r.logdet));
  return r;
}

ZetaValue zeta_at(const EigenvalueFamily& fam, double s, double t_split) {
  if (t_split <= 0) throw InvalidInput("zeta_at: t_split must be positive");
  double t0 = clamp_split(fam, t_split);
  if (std::fabs(s) < 1e-12) {
    ZetaResult r = zeta_once(fam, t0);
    return {r.zeta0, 0.0, false};
  }
  SplitEval ev = mellin_split(fam, s, t0);
  double b_regular = ev.residual_integral + ev.tail_integral;
  double pole_coeff = 0.0;
  bool has_pole = false;
  for (const auto& term : ev.terms) {
    double denom = s + term.exponent;
    if (std::fabs(denom) < 1e-12) {
      // c t0^(s+e)/(s+e): residue c, finite part c log t0
      has_pole = true;
      pole_coeff += term.coeff;
      b_regular += term.coeff * std::log(t0);
    } else {
      b_regular += term.coeff * std::pow(t0, denom) / denom;
    }
  }
  double g = 1.0 / std::tgamma(s);  // 1/Gamma, finite away from s = 0, -1, ...
  ZetaValue out;
  if (!has_pole) {
    out.value = b_regular * g;
    return out;
  }
  // zeta(s+eps) = pole_coeff g(s)/eps + [B0 g(s) + pole_coeff g'(s)] + O(eps)
  double gp = -digamma(s) * g;
  out.at_pole = true;
  out.residue = pole_coeff * g;
  out.value = b_regular * g + pole_coeff * gp;
  return out;
}

ZetaResult detzeta_circle(double mass, double circumference, double t_split) {
  return zeta_continue(circle_helmholtz_family(mass, circumference), t_split);
}

double detzeta_circle_closed_form(double mass, double circumference) {
  double s = 2.0 * std::sinh(0.5 * mass * circumference);
  return s * s;  // det, caller takes log
}

CylinderReport dn_cylinder(double mass, double circumference, double height,
                           int max_modes) {
  if (mass <= 0 || circumference <= 0 || height <= 0)
    throw InvalidInput("dn_cylinder: mass, circumference, height must be positive");
  CylinderReport rep;
  rep.trace_class_sum = 0.0;
  rep.tail_bound = 0.0;
  for (int k = 0; k < max_modes; ++k) {
    double w = std::sqrt(std::pow(2.0 * kPi * k / circumference, 2) + mass * mass);
    CylinderMode mode;
    mode.k = k;
    mode.omega = w;
    double wt = w * height;
    mode.dn00 = w / std::tanh(wt);
    mode.dn01 = -w / std::sinh(wt);
    mode.jumpy = 2.0 * w * std::tanh(0.5 * wt);
    mode.transition = std::exp(-wt);
    rep.modes.push_back(mode);
    double mult = k == 0 ? 1.0 : 2.0;
    double increment = mult * std::fabs(mode.jumpy - 2.0 * w);
    rep.trace_class_sum += increment;
    rep.tail_bound = increment;
    if (increment < 1e-16 && k > 4) break;
  }
  return rep;
}

namespace {

struct OmegaFamilyParts {
  double zeta_prime0_w;   // zeta'_omega(0) = zeta'_{omega^2}(0) / 2
  double zeta0;           // zeta_omega(0) = zeta_{omega^2}(0)
  double regularized_sum; // FP zeta_omega(-1) + (1 - log 2) Res_{-1} zeta_omega
};

OmegaFamilyParts omega_parts(double m, double el) {
  EigenvalueFamily fam = circle_helmholtz_family(m, el);
  ZetaResult z = zeta_continue(fam, 1.0);
  ZetaValue at = zeta_at(fam, -0.5, 1.0);  // zeta_{omega^2}(-1/2)
  OmegaFamilyParts p;
  p.zeta_prime0_w = 0.5 * z.zeta_prime0;
  p.zeta0 = z.zeta0;
  // zeta_omega near -1: value = FP_{omega^2}(-1/2), residue = 2 Res_{omega^2}(-1/2)
  double fp = at.value;
  double res = 2.0 * at.residue;
  p.regularized_sum = fp + (1.0 - std::log(2.0)) * res;
  return p;
}

// absolutely convergent transverse sums over k in Z (mult 2 for k > 0)
template <typename F>
double mode_sum(double m, double el, F per_omega) {
  double total = 0.0;
  for (int k = 0; k < 2000000; ++k) {
    double w = std::sqrt(std::pow(2.0 * kPi * k / el, 2) + m * m);
    double mult = k == 0 ? 1.0 : 2.0;
    double term = mult * per_omega(w);
    total += term;
    if (std::fabs(term) < 1e-18 && k > 4) break;
  }
  return total;
}

double logdet_torus_assembled(double m, double el, double height) {
  OmegaFamilyParts p = omega_parts(m, el);
  double s = mode_sum(m, el, [&](double w) { return std::log1p(-std::exp(-w * height)); });
  return height * p.regularized_sum + 2.0 * s;
}

}  // namespace

BfkTorusReport bfk_torus_check(double mass, double circumference, double height) {
  double m = mass, el = circumference, t = height;
  OmegaFamilyParts p = omega_parts(m, el);

  BfkTorusReport rep;
  rep.logdet_torus = logdet_torus_assembled(m, el, t);
  rep.logdet_cylinder_dirichlet =
      t * p.regularized_sum + p.zeta_prime0_w +
      mode_sum(m, el, [&](double w) { return std::log1p(-std::exp(-2.0 * w * t)); });
  rep.logdet_dn_jumpy =
      -p.zeta_prime0_w +
      mode_sum(m, el, [&](double w) { return std::log(std::tanh(0.5 * w * t)); });
  rep.bfk_error =
      rep.logdet_torus - (rep.logdet_cylinder_dirichlet + rep.logdet_dn_jumpy);
  double w0 = m;
  rep.per_mode_ratio = (2.0 * std::sinh(w0 * t) / w0) * (2.0 * w0 * std::tanh(0.5 * w0 * t)) /
                       (4.0 * std::pow(std::sinh(0.5 * w0 * t), 2));
  rep.zeta_omega_zero = p.zeta0;
  rep.swap_error = rep.logdet_torus - logdet_torus_assembled(m, t, el);
  return rep;
}

double fredholm_det(const Vec& eigenvalues, double z) {
  double trace_norm = 0.0;
  double log_abs = 0.0;
  int sign = 1;
  for (double lam : eigenvalues) {
    trace_norm += std::fabs(lam);
    double f = 1.0 + z * lam;
    if (f == 0.0) return 0.0;
    if (f < 0) sign = -sign;
    log_abs += std::log(std::fabs(f));
  }
  double det = sign * std::exp(log_abs);
  if (std::fabs(det) > std::exp(std::fabs(z) * trace_norm) * (1.0 + 1e-10))
    throw Error("fredholm_det: trace-norm bound violated");
  return det;
}

double fredholm_det_from_traces(const Vec& power_traces, double z) {
  // char-poly style recursion: c_0 = 1, c_n = (1/n) sum_{k=1..n} (-1)^{k-1} T_k c_{n-k}
  size_t kmax = power_traces.size();
  Vec c(kmax + 1, 0.0);
  c[0] = 1.0;
  for (size_t n = 1; n <= kmax; ++n) {
    double s = 0.0;
    for (size_t k = 1; k <= n; ++k)
      s += ((k % 2) ? 1.0 : -1.0) * power_traces[k - 1] * c[n - k];
    c[n] = s / static_cast<double>(n);
  }
  double det = 0.0, zp = 1.0;
  for (size_t n = 0; n <= kmax; ++n) {
    det += c[n] * zp;
    zp *= z;
  }
  return det;
}

double fredholm_det_matrix(const DenseMatrix& a, double z) {
  if (a.rows() != a.cols()) throw InvalidInput("fredholm_det_matrix: square input required");
  int n = a.rows();
  Vec traces(n, 0.0);
  DenseMatrix p = a;
  for (int k = 1; k <= n; ++k) {
    double tr = 0.0;
    for (int i = 0; i < n; ++i) tr += p(i, i);
    traces[k - 1] = tr;
    if (k < n) p = p * a;
  }
  return fredholm_det_from_traces(traces, z);
}

RnIdentityReport rn_det_identity(double mass, double circumference, double height) {
  double m = mass, el = circumference, t = height;
  OmegaFamilyParts p = omega_parts(m, el);
  RnIdentityReport rep;
  // det(2D): eigenvalues 2 omega, zeta_{2w}(s) = 2^{-s} zeta_w(s)
  rep.logdet_2d = std::log(2.0) * p.zeta0 - p.zeta_prime0_w;
  // Fredholm factor over the diagonal family K = tanh(w T/2) - 1, truncated
  // where the trace norm tail is negligible
  Vec k_eigs;
  for (int k = 0;; ++k) {
    double w = std::sqrt(std::pow(2.0 * kPi * k / el, 2) + m * m);
    double lam = std::tanh(0.5 * w * t) - 1.0;
    k_eigs.push_back(lam);
    if (k > 0) k_eigs.push_back(lam);
    if (std::fabs(lam) < 1e-18 && k > 4) break;
  }
  rep.log_fredholm = std::log(fredholm_det(k_eigs, 1.0));
  // jumpy DN family: zeta_DN(s) = zeta_{2w}(s) + entire correction;
  // logdet = -zeta'_{2w}(0) + sum log tanh
  rep.logdet_dn =
      std::log(2.0) * p.zeta0 - p.zeta_prime0_w +
      mode_sum(m, el, [&](double w) { return std::log(std::tanh(0.5 * w * t)); });
  rep.identity_error = rep.logdet_2d + rep.log_fredholm - rep.logdet_dn;
  // absolute convergence indicator for the tanh product
  double prev = 0.0, cur = 0.0;
  for (int k = 0;; ++k) {
    double w = std::sqrt(std::pow(2.0 * kPi * k / el, 2) + m * m);
    double mult = k == 0 ? 1.0 : 2.0;
    prev = mult * std::fabs(std::log(std::tanh(0.5 * w * t)));
    cur += prev;
    if (prev < 1e-18 && k > 4) break;
  }
  rep.tanh_factor_tail = prev;
  return rep;
}

}  // namespace qlab::zeta
