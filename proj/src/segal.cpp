#include "qlab/segal.hpp"

#include <algorithm>
#include <cmath>

namespace qlab::segal {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

DenseMatrix transverse_operator(const CylinderSlab& slab) {
  int n = slab.n_transverse;
  DenseMatrix m(n, n);
  if (n >= 2) {
    double w = slab.ks();
    for (int s = 0; s < n; ++s) {
      int t = (s + 1) % n;
      m(s, s) += w;
      m(t, t) += w;
      m(s, t) -= w;
      m(t, s) -= w;
    }
  }
  for (int s = 0; s < n; ++s) m(s, s) += slab.mass * slab.mass;
  return m;
}

}  // namespace

Vec transverse_symbol(const CylinderSlab& slab) {
  Vec l(slab.n_transverse);
  for (int j = 0; j < slab.n_transverse; ++j)
    l[j] = 2.0 * slab.ks() * (1.0 - std::cos(kTwoPi * j / slab.n_transverse)) +
           slab.mass * slab.mass;
  return l;
}

DenseMatrix boundary_reference(const CylinderSlab& slab) {
  DenseMatrix m = transverse_operator(slab);
  EigenDecomposition e = sym_eigen(m);
  int n = m.rows();
  DenseMatrix d(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int j = 0; j < n; ++j)
        s += e.vectors(a, j) * std::sqrt(e.values[j]) * e.vectors(b, j);
      d(a, b) = s;
    }
  return d;
}

SlabForm slab_form(const CylinderSlab& slab) {
  if (slab.n_transverse < 1 || slab.n_layers < 0 || slab.spacing <= 0 || slab.mass <= 0)
    throw InvalidInput("slab_form: invalid slab geometry");
  int nt = slab.n_transverse, nl = slab.n_layers;
  int n = slab.n_sites();
  DenseMatrix msig = transverse_operator(slab);
  SlabForm f;
  f.q = DenseMatrix(n, n);
  double kt = slab.kt();
  for (int l = 0; l < nl + 2; ++l) {
    double wl = (l == 0 || l == nl + 1) ? 0.5 : 1.0;
    for (int a = 0; a < nt; ++a)
      for (int b = 0; b < nt; ++b)
        f.q(slab.site(l, a), slab.site(l, b)) += wl * msig(a, b);
  }
  for (int l = 0; l < nl + 1; ++l)
    for (int s = 0; s < nt; ++s) {
      int i = slab.site(l, s), j = slab.site(l + 1, s);
      f.q(i, i) += kt;
      f.q(j, j) += kt;
      f.q(i, j) -= kt;
      f.q(j, i) -= kt;
    }
  for (int s = 0; s < nt; ++s) f.boundary.push_back(slab.site(0, s));
  for (int s = 0; s < nt; ++s) f.boundary.push_back(slab.site(nl + 1, s));
  for (int l = 1; l <= nl; ++l)
    for (int s = 0; s < nt; ++s) f.interior.push_back(slab.site(l, s));
  f.dn = schur_complement(f.q, f.boundary);
  if (!f.interior.empty())
    f.logdet_interior = logdet_from_cholesky(cholesky(submatrix(f.q, f.interior, f.interior)));
  // extension matrix
  int nb = static_cast<int>(f.boundary.size());
  f.poisson = DenseMatrix(n, nb);
  for (int k = 0; k < nb; ++k) f.poisson(f.boundary[k], k) = 1.0;
  if (!f.interior.empty()) {
    DenseMatrix qii = submatrix(f.q, f.interior, f.interior);
    DenseMatrix qib = submatrix(f.q, f.interior, f.boundary);
    DenseMatrix l = cholesky(qii);
    for (int k = 0; k < nb; ++k) {
      Vec b(f.interior.size());
      for (size_t i = 0; i < f.interior.size(); ++i) b[i] = qib(static_cast<int>(i), k);
      Vec u = cholesky_solve(l, b);
      for (size_t i = 0; i < f.interior.size(); ++i) f.poisson(f.interior[i], k) = -u[i];
    }
  }
  return f;
}

namespace {

struct InteractionPieces {
  bool active = false;
  std::vector<wick::Polynomial> per_vertex;  // expanded, with site weight folded out
  Vec weight;                                // chi * boundary halving
};

InteractionPieces interaction_pieces(const CylinderSlab& slab) {
  InteractionPieces ip;
  if (!slab.interaction) return ip;
  const SlabInteraction& si = *slab.interaction;
  if (!si.p.bounded_below())
    throw InvalidInput("slab interaction: polynomial not bounded below");
  int n = slab.n_sites();
  ip.active = si.p.degree() > 0 || (si.p.coeffs.size() && si.p.coeffs[0] != 0.0);
  ip.weight.assign(n, 1.0);
  if (!si.chi.empty()) {
    if (static_cast<int>(si.chi.size()) != n)
      throw InvalidInput("slab interaction: chi size mismatch");
    ip.weight = si.chi;
  }
  for (int l = 0; l < slab.n_layers + 2; ++l) {
    double wl = (l == 0 || l == slab.n_layers + 1) ? 0.5 : 1.0;
    for (int s = 0; s < slab.n_transverse; ++s) ip.weight[slab.site(l, s)] *= wl;
  }
  Vec c(n, 0.0);
  if (!si.wick_constants.empty()) {
    if (si.wick_constants.size() == 1) {
      c.assign(n, si.wick_constants[0]);
    } else if (static_cast<int>(si.wick_constants.size()) == n) {
      c = si.wick_constants;
    } else {
      throw InvalidInput("slab interaction: wick constants must be scalar or per vertex");
    }
  }
  ip.per_vertex.resize(n);
  for (int i = 0; i < n; ++i) ip.per_vertex[i] = wick::wick_ordered(si.p, c[i]);
  return ip;
}

std::vector<Vec> tensor_nodes(const QuadratureGrid& g, int dims, Vec* log_weights) {
  int q = static_cast<int>(g.nodes.size());
  long total = 1;
  for (int d = 0; d < dims; ++d) total *= q;
  std::vector<Vec> pts(total, Vec(dims));
  log_weights->assign(total, 0.0);
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int d = 0; d < dims; ++d) {
      int digit = static_cast<int>(rem % q);
      rem /= q;
      pts[idx][d] = g.nodes[digit];
      (*log_weights)[idx] += std::log(g.weights[digit]);
    }
  }
  return pts;
}

}  // namespace

AmplitudeOperator build_amplitude(const CylinderSlab& slab) {
  if (slab.n_transverse > 4)
    throw CapacityError("build_amplitude: tensor quadrature supports at most 4 transverse sites");
  if (slab.quadrature_order < 2) throw InvalidInput("build_amplitude: quadrature order too small");
  long n_nodes = 1;
  for (int d = 0; d < slab.n_transverse; ++d) n_nodes *= slab.quadrature_order;
  if (n_nodes > 4096)
    throw CapacityError("build_amplitude: boundary grid exceeds 4096 tensor nodes");

  SlabForm form = slab_form(slab);
  int nt = slab.n_transverse;
  DenseMatrix dhat = boundary_reference(slab);

  double scale = slab.grid_scale;
  if (scale <= 0) {
    double mean = 0.0;
    for (int i = 0; i < nt; ++i) mean += dhat(i, i);
    mean /= nt;
    scale = 1.0 / std::sqrt(mean);
  }
  QuadratureGrid grid = scaled_grid(gauss_hermite(slab.quadrature_order), scale);

  // exponent matrix E = DN - diag(Dhat, Dhat)
  int nb = 2 * nt;
  DenseMatrix expo = form.dn;
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nt; ++b) {
      expo(a, b) -= dhat(a, b);
      expo(nt + a, nt + b) -= dhat(a, b);
    }

  InteractionPieces ip = interaction_pieces(slab);
  int ni = static_cast<int>(form.interior.size());
  // interior quadrature data for the interacting factor
  DenseMatrix transform;  // interior sampling map U diag(sqrt(2/lambda))
  std::vector<Vec> int_pts;
  Vec int_logw;
  DenseMatrix pi_int;  // interior rows of the extension matrix
  if (ip.active && ni > 0) {
    if (ni > 8)
      throw CapacityError("build_amplitude: interacting interior limited to 8 sites");
    long m = 1;
    for (int d = 0; d < ni; ++d) {
      m *= slab.quadrature_order;
      if (m > 200000)
        throw CapacityError("build_amplitude: interior tensor quadrature exceeds 200000 nodes");
    }
    DenseMatrix qii = submatrix(form.q, form.interior, form.interior);
    EigenDecomposition e = sym_eigen(qii);
    transform = DenseMatrix(ni, ni);
    for (int a = 0; a < ni; ++a)
      for (int j = 0; j < ni; ++j)
        transform(a, j) = e.vectors(a, j) * std::sqrt(2.0 / e.values[j]);
    QuadratureGrid raw = gauss_hermite(slab.quadrature_order);
    Vec logv(raw.nodes.size());
    for (size_t i = 0; i < raw.nodes.size(); ++i) logv[i] = std::log(raw.gauss_weight(i));
    // tensor points in u-space with raw weights
    int q = static_cast<int>(raw.nodes.size());
    long total = 1;
    for (int d = 0; d < ni; ++d) total *= q;
    int_pts.assign(total, Vec(ni));
    int_logw.assign(total, 0.0);
    for (long idx = 0; idx < total; ++idx) {
      long rem = idx;
      for (int d = 0; d < ni; ++d) {
        int digit = static_cast<int>(rem % q);
        rem /= q;
        int_pts[idx][d] = raw.nodes[digit];
        int_logw[idx] += logv[digit];
      }
    }
    std::vector<int> cols(nb);
    for (int k = 0; k < nb; ++k) cols[k] = k;
    pi_int = submatrix(form.poisson, form.interior, cols);
  }

  auto interacting_factor = [&](const Vec& phi_bdry) {
    if (!ip.active) return 1.0;
    double s_bdry = 0.0;
    for (int k = 0; k < nb; ++k)
      s_bdry += ip.weight[form.boundary[k]] *
                ip.per_vertex[form.boundary[k]](phi_bdry[k]);
    if (ni == 0) return std::exp(-s_bdry);
    Vec mean = matvec(pi_int, phi_bdry);
    double acc = 0.0;
    Vec phi_i(ni);
    for (size_t idx = 0; idx < int_pts.size(); ++idx) {
      for (int a = 0; a < ni; ++a) {
        double x = mean[a];
        for (int j = 0; j < ni; ++j) x += transform(a, j) * int_pts[idx][j];
        phi_i[a] = x;
      }
      double s_int = 0.0;
      for (int a = 0; a < ni; ++a)
        s_int += ip.weight[form.interior[a]] * ip.per_vertex[form.interior[a]](phi_i[a]);
      acc += std::exp(int_logw[idx] - s_int);
    }
    return std::exp(-s_bdry) * acc / std::pow(kPi, 0.5 * ni);
  };

  // boundary tensor nodes and sqrt factors
  Vec logw;
  std::vector<Vec> pts = tensor_nodes(grid, nt, &logw);
  long total = static_cast<long>(pts.size());
  Vec log_s(total);
  const double log2pi = std::log(2.0 * kPi);
  for (long i = 0; i < total; ++i) {
    Vec dphi = matvec(dhat, pts[i]);
    double log_density = -0.5 * nt * log2pi - dot(pts[i], dphi);
    log_s[i] = 0.5 * (logw[i] + log_density);
  }

  AmplitudeOperator op;
  op.n_transverse = nt;
  op.grid1d = grid;
  op.dhat = dhat;
  op.log_constant = -0.5 * form.logdet_interior;
  op.interacting = ip.active;
  op.matrix = DenseMatrix(static_cast<int>(total), static_cast<int>(total));
  Vec phi(nb);
  for (long out = 0; out < total; ++out) {
    for (long in = 0; in < total; ++in) {
      for (int a = 0; a < nt; ++a) {
        phi[a] = pts[in][a];
        phi[nt + a] = pts[out][a];
      }
      Vec ephi = matvec(expo, phi);
      double log_kernel = op.log_constant - 0.5 * dot(phi, ephi);
      double value = std::exp(log_kernel + log_s[out] + log_s[in]);
      if (ip.active) value *= interacting_factor(phi);
      op.matrix(static_cast<int>(out), static_cast<int>(in)) = value;
    }
  }
  return op;
}

AmplitudeOperator compose(const AmplitudeOperator& u1, const AmplitudeOperator& u2) {
  if (u1.n_transverse != u2.n_transverse || u1.n_nodes() != u2.n_nodes())
    throw InvalidInput("compose: operators live on different grids");
  double scale = std::max(1e-300, std::fabs(u1.grid1d.nodes.back()));
  for (size_t i = 0; i < u1.grid1d.nodes.size(); ++i)
    if (std::fabs(u1.grid1d.nodes[i] - u2.grid1d.nodes[i]) > 1e-12 * scale)
      throw InvalidInput("compose: grid nodes differ");
  if (max_abs(u1.dhat - u2.dhat) > 1e-12 * std::max(1.0, max_abs(u1.dhat)))
    throw InvalidInput("compose: boundary reference measures differ");
  AmplitudeOperator out;
  out.n_transverse = u1.n_transverse;
  out.grid1d = u1.grid1d;
  out.dhat = u1.dhat;
  out.log_constant = u1.log_constant + u2.log_constant;
  out.interacting = u1.interacting || u2.interacting;
  out.matrix = u2.matrix * u1.matrix;
  return out;
}

double trace(const AmplitudeOperator& u, int n) {
  if (n < 1) throw InvalidInput("trace: power must be >= 1");
  int m = u.matrix.rows();
  DenseMatrix acc = DenseMatrix::identity(m);
  DenseMatrix base = u.matrix;
  int p = n;
  while (p > 0) {
    if (p & 1) acc = acc * base;
    base = base * base;
    p >>= 1;
    if (p == 0) break;
  }
  double tr = 0.0;
  for (int i = 0; i < m; ++i) tr += acc(i, i);
  return tr;
}

AdjointReport adjoint_check(const AmplitudeOperator& u) {
  double denom = max_abs(u.matrix);
  double num = max_abs(u.matrix - transpose(u.matrix));
  return {denom == 0.0 ? 0.0 : num / denom};
}

SpectralSuite spectral_suite(const AmplitudeOperator& u, const Vec& observable,
                             int gibbs_l, const std::vector<int>& n_list, int k_max) {
  if (!u.matrix.is_symmetric(1e-9))
    throw InvalidInput("spectral_suite: operator matrix is not symmetric");
  if (static_cast<int>(observable.size()) != u.n_nodes())
    throw InvalidInput("spectral_suite: observable size mismatch");
  PowerPairResult pp = power_pair(u.matrix);
  EigenDecomposition e = sym_eigen(u.matrix);

  SpectralSuite out;
  out.lambda0 = pp.lambda0;
  out.lambda1 = pp.lambda1;
  out.alpha = std::fabs(pp.lambda1) / pp.lambda0;
  out.ground = pp.v0;

  int m = u.n_nodes();
  double log_l0 = std::log(e.values[0]);
  Vec fi(m, 0.0);  // <v_i, F v_i>
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += e.vectors(k, i) * e.vectors(k, i) * observable[k];
    fi[i] = s;
  }
  double f_ground = fi[0];
  out.gibbs_limit = f_ground / std::pow(e.values[0], gibbs_l);

  Vec fit_n, fit_loge, gfit_n, gfit_loge;
  for (int n : n_list) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < m; ++i) {
      double r = e.values[i] / e.values[0];
      double rn = std::pow(std::fabs(r), n) * (r < 0 && n % 2 ? -1.0 : 1.0);
      den += rn;
      if (n > gibbs_l) {
        double rl = std::pow(std::fabs(r), n - gibbs_l) *
                    (r < 0 && (n - gibbs_l) % 2 ? -1.0 : 1.0);
        num += rl * fi[i];
      }
    }
    double fe = log_l0 + std::log(den) / n;
    out.trace_rows.push_back({n, fe, fe - log_l0});
    if (std::fabs(fe - log_l0) > 1e-14) {
      fit_n.push_back(n);
      fit_loge.push_back(std::log(std::fabs(fe - log_l0) * n));
    }
    if (n > gibbs_l) {
      double ratio = num / (std::pow(e.values[0], gibbs_l) * den);
      double err = std::fabs(ratio - out.gibbs_limit);
      out.gibbs_rows.push_back({n, ratio, err});
      if (err > 1e-14) {
        gfit_n.push_back(n);
        gfit_loge.push_back(std::log(err));
      }
    }
  }
  out.trace_fit_rate =
      fit_n.size() >= 2 ? std::exp(linear_fit(fit_n, fit_loge).slope) : 0.0;
  out.gibbs_fit_rate =
      gfit_n.size() >= 2 ? std::exp(linear_fit(gfit_n, gfit_loge).slope) : 0.0;

  // mixing with f = g = observable
  double fo = 0.0;
  for (int k = 0; k < m; ++k) fo += observable[k] * pp.v0[k];
  double nf = norm2(observable);
  double excess = -1e300;
  for (int k = 1; k <= k_max; ++k) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      double r = e.values[i] / e.values[0];
      double proj = 0.0;
      for (int a = 0; a < m; ++a) proj += e.vectors(a, i) * observable[a];
      s += std::pow(std::fabs(r), k) * (r < 0 && k % 2 ? -1.0 : 1.0) * proj * proj;
    }
    double value = std::fabs(s - fo * fo);
    double bound = std::pow(out.alpha, k) * nf * nf;
    excess = std::max(excess, value - bound);
  }
  out.mixing_max_excess = excess;
  return out;
}

DensityCheckReport amplitude_density_check(const CylinderSlab& slab, int n_points,
                                           RngStream& rng) {
  if (slab.interaction)
    throw InvalidInput("amplitude_density_check: free slabs only");
  SlabForm form = slab_form(slab);
  int nt = slab.n_transverse;
  int nb = 2 * nt;
  int n = slab.n_sites();
  int ni = static_cast<int>(form.interior.size());

  // double of the slab: side A is the slab, side B mirrors the interior
  int nd = n + ni;
  DenseMatrix qd(nd, nd);
  std::vector<int> map_b(n);
  for (int i = 0; i < n; ++i) map_b[i] = i;
  for (int k = 0; k < ni; ++k) map_b[form.interior[k]] = n + k;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      qd(i, j) += form.q(i, j);
      qd(map_b[i], map_b[j]) += form.q(i, j);
    }
  DenseMatrix dn_double = schur_complement(qd, form.boundary);
  double logdet_dn_double = logdet_from_cholesky(cholesky(dn_double));
  // BFK bookkeeping: logdet Q_double = 2 logdet Q_II + logdet DN_double
  double logdet_qd = 2.0 * form.logdet_interior + logdet_dn_double;

  DenseMatrix dhat = boundary_reference(slab);
  DenseMatrix two_dhat_block(nb, nb);
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nt; ++b) {
      two_dhat_block(a, b) = 2.0 * dhat(a, b);
      two_dhat_block(nt + a, nt + b) = 2.0 * dhat(a, b);
    }
  double logdet_2dhat = logdet_from_cholesky(cholesky(two_dhat_block));

  DenseMatrix expo = form.dn;
  for (int a = 0; a < nt; ++a)
    for (int b = 0; b < nt; ++b) {
      expo(a, b) -= dhat(a, b);
      expo(nt + a, nt + b) -= dhat(a, b);
    }
  const double log2pi = std::log(2.0 * kPi);
  double log_constant = -0.5 * form.logdet_interior;

  double worst = 0.0;
  Vec phi(nb);
  for (int p = 0; p < n_points; ++p) {
    for (double& v : phi) v = rng.normal();
    Vec ephi = matvec(expo, phi);
    double log_a = log_constant - 0.5 * dot(phi, ephi);
    Vec tphi = matvec(two_dhat_block, phi);
    double log_rho_ref = 0.5 * logdet_2dhat - 0.5 * nb * log2pi - 0.5 * dot(phi, tphi);
    double lhs = 2.0 * log_a + log_rho_ref - 0.5 * logdet_2dhat;
    Vec dphi = matvec(dn_double, phi);
    double log_rho_dn = 0.5 * logdet_dn_double - 0.5 * nb * log2pi - 0.5 * dot(phi, dphi);
    double rhs = log_rho_dn - 0.5 * logdet_qd;
    worst = std::max(worst, std::fabs(lhs - rhs));
  }
  return {worst, n_points};
}

lattice::PrecisionOperator glued_torus(const CylinderSlab& slab, int n_copies) {
  if (n_copies < 1) throw InvalidInput("glued_torus: need at least one copy");
  int nt = slab.n_transverse;
  int layers = n_copies * (slab.n_layers + 1);
  int n = layers * nt;
  std::vector<lattice::LatticeGraph::Edge> edges;
  double kt = slab.kt(), ks = slab.ks();
  auto at = [&](int l, int s) { return (l % layers) * nt + s; };
  for (int l = 0; l < layers; ++l) {
    if (nt >= 3) {
      for (int s = 0; s < nt; ++s) edges.push_back({at(l, s), at(l, (s + 1) % nt), ks});
    } else if (nt == 2) {
      edges.push_back({at(l, 0), at(l, 1), 2.0 * ks});
    }
    if (layers >= 3) {
      for (int s = 0; s < nt; ++s) edges.push_back({at(l, s), at(l + 1, s), kt});
    } else if (layers == 2 && l == 0) {
      for (int s = 0; s < nt; ++s) edges.push_back({at(0, s), at(1, s), 2.0 * kt});
    }
  }
  lattice::LatticeGraph g =
      lattice::from_edges(n, std::move(edges), Vec(n, 1.0), 1.0);
  return lattice::precision_operator(std::move(g), slab.mass);
}

double glued_torus_log_z(const CylinderSlab& slab, int n_copies) {
  int layers = n_copies * (slab.n_layers + 1);
  Vec l = transverse_symbol(slab);
  double kt = slab.kt();
  double s = 0.0;
  for (int tau = 0; tau < layers; ++tau) {
    double time_part = 2.0 * kt * (1.0 - std::cos(kTwoPi * tau / layers));
    for (double lj : l) s += std::log(time_part + lj);
  }
  return -0.5 * s;
}

std::vector<ModeAmplitude> mode_amplitudes(const CylinderSlab& slab) {
  if (slab.interaction)
    throw InvalidInput("mode_amplitudes: free slabs only");
  Vec symbol = transverse_symbol(slab);
  double kt = slab.kt();
  int nl = slab.n_layers;
  std::vector<ModeAmplitude> out;
  for (double lj : symbol) {
    // 1D path: layers 0..nl+1, on-layer weight lj (halved at the ends)
    int n = nl + 2;
    DenseMatrix q(n, n);
    for (int l = 0; l < n; ++l)
      q(l, l) += (l == 0 || l == n - 1) ? 0.5 * lj : lj;
    for (int l = 0; l + 1 < n; ++l) {
      q(l, l) += kt;
      q(l + 1, l + 1) += kt;
      q(l, l + 1) -= kt;
      q(l + 1, l) -= kt;
    }
    ModeAmplitude ma;
    ma.omega = std::sqrt(lj);
    DenseMatrix dn = schur_complement(q, {0, n - 1});
    ma.dn00 = dn(0, 0);
    ma.dn01 = dn(0, 1);
    ma.logdet_interior = 0.0;
    if (nl > 0) {
      std::vector<int> interior(nl);
      for (int l = 1; l <= nl; ++l) interior[l - 1] = l;
      ma.logdet_interior =
          logdet_from_cholesky(cholesky(submatrix(q, interior, interior)));
    }
    out.push_back(ma);
  }
  return out;
}

}  // namespace qlab::segal
