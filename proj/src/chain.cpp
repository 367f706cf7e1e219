#include "qlab/chain.hpp"

#include <cmath>

namespace qlab::chain {

ChainKernel ChainKernel::standard(Polynomial p) {
  if (!p.bounded_below())
    throw InvalidInput("chain kernel: interaction polynomial not bounded below");
  ChainKernel k;
  k.p = std::move(p);
  return k;
}

ChainKernel ChainKernel::normalized_gaussian(double mass) {
  if (mass <= 0) throw InvalidInput("normalized_gaussian: mass must be positive");
  ChainKernel k;
  k.p = Polynomial({0.0, 0.0, 0.5 * mass * mass});
  k.kinetic = 0.25;
  k.log_prefactor = -0.5 * std::log(2.0 * 3.14159265358979323846);
  return k;
}

double ChainKernel::operator()(double x, double y) const {
  double d = x - y;
  return std::exp(log_prefactor - kinetic * d * d - 0.5 * (p(x) + p(y)));
}

TransferOperator build_transfer(const Polynomial& p, const QuadratureGrid& grid) {
  return build_transfer(ChainKernel::standard(p), grid);
}

TransferOperator build_transfer(const ChainKernel& kernel, const QuadratureGrid& grid) {
  if (!kernel.p.bounded_below())
    throw InvalidInput("build_transfer: interaction polynomial not bounded below");
  int n = static_cast<int>(grid.nodes.size());
  if (n == 0) throw InvalidInput("build_transfer: empty grid");
  TransferOperator t;
  t.grid = grid;
  t.kernel = kernel;
  t.matrix = DenseMatrix(n, n);
  Vec sw(n);
  for (int i = 0; i < n; ++i) sw[i] = std::sqrt(grid.weights[i]);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double v = sw[i] * kernel(grid.nodes[i], grid.nodes[j]) * sw[j];
      t.matrix(i, j) = v;
      t.matrix(j, i) = v;
    }
  return t;
}

double log_trace_power(const Vec& lambda, int n) {
  if (n < 1) throw InvalidInput("trace power: n must be >= 1");
  Vec log_abs;
  std::vector<int> signs;
  log_abs.reserve(lambda.size());
  for (double l : lambda) {
    if (l == 0.0) continue;
    log_abs.push_back(n * std::log(std::fabs(l)));
    signs.push_back(l > 0 || n % 2 == 0 ? 1 : -1);
  }
  return log_sum_signed_exp(log_abs, signs);
}

double log_partition_function(const TransferOperator& t, int n) {
  return log_trace_power(sym_eigen(t.matrix).values, n);
}

double partition_function(const TransferOperator& t, int n) {
  return std::exp(log_partition_function(t, n));
}

double conditioned_kernel(const TransferOperator& t, int n, double sigma_in,
                          double sigma_out) {
  if (n < 1) throw InvalidInput("conditioned_kernel: n must be >= 1");
  const Vec& x = t.grid.nodes;
  double lo = x.front(), hi = x.back();
  if (sigma_in < lo || sigma_in > hi || sigma_out < lo || sigma_out > hi)
    throw OutOfDomain("conditioned_kernel: endpoint outside the grid hull");
  if (n == 1) return t.kernel(sigma_out, sigma_in);
  int m = static_cast<int>(x.size());
  Vec v(m);
  for (int j = 0; j < m; ++j) v[j] = t.kernel(x[j], sigma_in);
  for (int step = 0; step < n - 2; ++step) {
    Vec w(m, 0.0);
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) s += t.grid.weights[j] * t.kernel(x[i], x[j]) * v[j];
      w[i] = s;
    }
    v = std::move(w);
  }
  double out = 0.0;
  for (int j = 0; j < m; ++j)
    out += t.grid.weights[j] * t.kernel(sigma_out, x[j]) * v[j];
  return out;
}

SpectralReport spectral_report(const TransferOperator& t) {
  PowerPairResult pp = power_pair(t.matrix);
  SpectralReport r;
  r.lambda0 = pp.lambda0;
  r.lambda1 = pp.lambda1;
  r.alpha = std::fabs(pp.lambda1) / pp.lambda0;
  r.ground = pp.v0;
  bool positive = true;
  for (double v : r.ground)
    if (v <= 0) positive = false;
  if (!positive)
    throw ConvergenceError("spectral_report: ground vector not entrywise positive", 0.0);
  return r;
}

FreeEnergyTable free_energy(const TransferOperator& t, const std::vector<int>& n_list) {
  if (n_list.empty()) throw InvalidInput("free_energy: empty n list");
  EigenDecomposition e = sym_eigen(t.matrix);
  FreeEnergyTable table;
  table.log_lambda0 = std::log(e.values[0]);
  table.alpha = e.values.size() > 1
                    ? std::fabs(e.values[1]) / e.values[0]
                    : 0.0;
  for (int n : n_list) {
    double lz = log_trace_power(e.values, n);
    table.rows.push_back({n, lz, lz / n});
  }
  return table;
}

double gibbs_expectation(const TransferOperator& t,
                         const std::vector<Insertion>& insertions, int n) {
  for (size_t k = 1; k < insertions.size(); ++k)
    if (insertions[k].site <= insertions[k - 1].site)
      throw InvalidInput("gibbs_expectation: sites must be strictly increasing");
  int m = t.matrix.rows();
  for (const auto& ins : insertions)
    if (static_cast<int>(ins.values.size()) != m)
      throw InvalidInput("gibbs_expectation: functional dimension mismatch");

  if (n == 0) {  // thermodynamic limit
    SpectralReport rep = spectral_report(t);
    if (insertions.empty()) return 1.0;
    DenseMatrix that = scaled(t.matrix, 1.0 / rep.lambda0);
    Vec v = rep.ground;
    int prev_site = insertions.front().site;
    // v = F_1 O; then propagate T^{gap} and apply the next insertion
    for (size_t k = 0; k < insertions.size(); ++k) {
      if (k > 0) {
        int gap = insertions[k].site - prev_site;
        for (int s = 0; s < gap; ++s) v = matvec(that, v);
      }
      for (int i = 0; i < m; ++i) v[i] *= insertions[k].values[i];
      prev_site = insertions[k].site;
    }
    double numer = dot(rep.ground, v);
    // denominator <O, That^{i_k - 1} O> = 1 since O is the unit eigenvector
    return numer;
  }

  if (n < 0) throw InvalidInput("gibbs_expectation: n must be >= 1 (or 0 for the limit)");
  for (const auto& ins : insertions)
    if (ins.site < 1 || ins.site > n)
      throw InvalidInput("gibbs_expectation: site outside [1, n]");
  if (insertions.empty()) return 1.0;

  // tr(T^{n+1-i_k} F_k ... F_1 T^{i_1-1}) / tr(T^n), accumulated right to left
  EigenDecomposition e = sym_eigen(t.matrix);
  double lam0 = e.values[0];
  DenseMatrix that = scaled(t.matrix, 1.0 / lam0);
  auto that_power = [&](int p) {
    DenseMatrix r = DenseMatrix::identity(m);
    DenseMatrix base = that;
    while (p > 0) {
      if (p & 1) r = r * base;
      base = base * base;
      p >>= 1;
    }
    return r;
  };
  DenseMatrix acc = that_power(insertions.front().site - 1);
  int prev = insertions.front().site;
  for (size_t k = 0; k < insertions.size(); ++k) {
    if (k > 0) {
      acc = that_power(insertions[k].site - prev) * acc;
      prev = insertions[k].site;
    }
    DenseMatrix f(m, m);
    for (int i = 0; i < m; ++i) f(i, i) = insertions[k].values[i];
    acc = f * acc;
  }
  acc = that_power(n + 1 - insertions.back().site) * acc;
  double tr_num = 0.0;
  for (int i = 0; i < m; ++i) tr_num += acc(i, i);
  Vec ratios(e.values.size());
  double tr_den = 0.0;
  for (double l : e.values) tr_den += std::pow(l / lam0, n);
  return tr_num / tr_den;
}

std::vector<MixingRow> mixing_check(const TransferOperator& t, const Vec& f,
                                    const Vec& g, int k_max) {
  if (k_max < 1) throw InvalidInput("mixing_check: k_max must be >= 1");
  SpectralReport rep = spectral_report(t);
  DenseMatrix that = scaled(t.matrix, 1.0 / rep.lambda0);
  double fo = dot(f, rep.ground), go = dot(rep.ground, g);
  double bound_scale = norm2(f) * norm2(g);
  std::vector<MixingRow> rows;
  Vec v = g;
  for (int k = 1; k <= k_max; ++k) {
    v = matvec(that, v);
    rows.push_back({k, std::fabs(dot(f, v) - fo * go),
                    std::pow(rep.alpha, k) * bound_scale});
  }
  return rows;
}

double normalized_gaussian_log_z(double mass, int n) {
  if (n < 1) throw InvalidInput("normalized_gaussian_log_z: n must be >= 1");
  double a = 1.0 + mass * mass;
  double s = 0.0;
  for (int k = 0; k < n; ++k)
    s += std::log(a - std::cos(2.0 * 3.14159265358979323846 * k / n));
  return -0.5 * s;
}

double gaussian_free_energy_limit(double mass) {
  double a = 1.0 + mass * mass;
  return -0.5 * std::log(0.5 * (a + std::sqrt(a * a - 1.0)));
}

}  // namespace qlab::chain
