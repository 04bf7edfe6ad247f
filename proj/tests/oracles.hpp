#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's numerical routines; only the Block container is shared.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "mjacobi/matlin.hpp"
#include "mjacobi/opmodel.hpp"

namespace oracle {

using mjacobi::Block;
using mjacobi::cplx;

inline Block random_block(std::mt19937_64& rng, int l, bool complex_entries = true) {
  std::normal_distribution<double> g(0.0, 1.0);
  Block b(l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) b(i, j) = cplx(g(rng), complex_entries ? g(rng) : 0.0);
  return b;
}

inline Block random_symmetric(std::mt19937_64& rng, int l, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Block b(l);
  for (int i = 0; i < l; ++i)
    for (int j = i; j < l; ++j) b(i, j) = b(j, i) = u(rng);
  return b;
}

inline Block mul(const Block& a, const Block& b) {
  const int l = a.dim();
  Block c(l);
  for (int i = 0; i < l; ++i)
    for (int k = 0; k < l; ++k)
      for (int j = 0; j < l; ++j) c(i, j) += a(i, k) * b(k, j);
  return c;
}

inline Block adjoint(const Block& a) {
  Block c(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) c(i, j) = std::conj(a(j, i));
  return c;
}

inline double entry_norm(const Block& a) {
  double s = 0.0;
  for (const auto& v : a.data()) s += std::norm(v);
  return std::sqrt(s);
}

/// Classical Jacobi eigenvalue iteration on a dense real symmetric matrix
/// (largest off-diagonal pivot each step). Returns eigenvalues descending.
inline std::vector<double> symmetric_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int iter = 0; iter < 10000; ++iter) {
    std::size_t p = 0, q = 1;
    double big = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (std::abs(a[i][j]) > big) {
          big = std::abs(a[i][j]);
          p = i;
          q = j;
        }
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a[i][i]));
    if (n < 2 || big <= 1e-300 || big < 1e-17 * scale) break;
    const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
    const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
    for (std::size_t k = 0; k < n; ++k) {
      const double akp = a[k][p], akq = a[k][q];
      a[k][p] = c * akp - s * akq;
      a[k][q] = s * akp + c * akq;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double apk = a[p][k], aqk = a[q][k];
      a[p][k] = c * apk - s * aqk;
      a[q][k] = s * apk + c * aqk;
    }
  }
  std::vector<double> ev;
  for (std::size_t i = 0; i < n; ++i) ev.push_back(a[i][i]);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

/// Eigenvalues of a Hermitian block through its real 2l x 2l embedding
/// [[Re, -Im], [Im, Re]], whose spectrum is that of H with multiplicity two.
inline std::vector<double> hermitian_eigenvalues(const Block& h) {
  const int l = h.dim();
  std::vector<std::vector<double>> r(2 * l, std::vector<double>(2 * l));
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) {
      const cplx v = 0.5 * (h(i, j) + std::conj(h(j, i)));
      r[i][j] = r[i + l][j + l] = v.real();
      r[i + l][j] = v.imag();
      r[i][j + l] = -v.imag();
    }
  const auto all = symmetric_eigenvalues(r);
  std::vector<double> out;
  for (int i = 0; i < l; ++i) out.push_back(all[2 * i]);
  return out;
}

inline std::vector<double> singular_values(const Block& a) {
  auto ev = hermitian_eigenvalues(mul(adjoint(a), a));
  for (auto& v : ev) v = std::sqrt(std::max(v, 0.0));
  return ev;
}

/// Herglotz branch of the free scalar M-function, m = (-z + sqrt(z^2 - 4)) / 2.
inline cplx free_m(cplx z) {
  const cplx r = std::sqrt(z * z - 4.0);
  cplx m = 0.5 * (-z + r);
  if (m.imag() < 0.0 || (m.imag() == 0.0 && std::abs(m) > 1.0)) m = 0.5 * (-z - r);
  return m;
}

/// Dense complex Gaussian elimination with partial pivoting, solving A X = B
/// for column-major right-hand sides.
inline std::vector<std::vector<cplx>> dense_solve(std::vector<std::vector<cplx>> a,
                                                  std::vector<std::vector<cplx>> b) {
  const std::size_t n = a.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
    std::swap(a[k], a[piv]);
    for (auto& col : b) std::swap(col[k], col[piv]);
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx f = a[i][k] / a[k][k];
      if (f == cplx(0.0)) continue;
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
      for (auto& col : b) col[i] -= f * col[k];
    }
  }
  for (auto& col : b)
    for (std::size_t k = n; k-- > 0;) {
      cplx s = col[k];
      for (std::size_t j = k + 1; j < n; ++j) s -= a[k][j] * col[j];
      col[k] = s / a[k][k];
    }
  return b;
}

inline Block inverse(const Block& a) {
  const int l = a.dim();
  std::vector<std::vector<cplx>> m(l, std::vector<cplx>(l)), id(l, std::vector<cplx>(l));
  for (int i = 0; i < l; ++i) {
    id[i][i] = 1.0;
    for (int j = 0; j < l; ++j) m[i][j] = a(i, j);
  }
  const auto x = dense_solve(m, id);
  Block out(l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) out(i, j) = x[j][i];
  return out;
}

/// Dense matrix of H_N - z on sites 1..N (Dirichlet truncation), size N l.
inline std::vector<std::vector<cplx>> truncated_operator(const mjacobi::OperatorSpec& spec, int n,
                                                         cplx z) {
  const int l = spec.dim();
  std::vector<std::vector<cplx>> a(n * l, std::vector<cplx>(n * l));
  for (int site = 1; site <= n; ++site) {
    const auto c = spec.coefficient_at(site);
    const int o = (site - 1) * l;
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) {
        a[o + i][o + j] = c.v(i, j) - (i == j ? z : cplx(0.0));
        if (site < n) {
          a[o + i][o + l + j] = c.d(i, j);
          a[o + l + i][o + j] = c.d(j, i);
        }
      }
  }
  return a;
}

/// (1,1) block of (H_N - z)^{-1} by dense elimination.
inline Block dense_m(const mjacobi::OperatorSpec& spec, int n, cplx z) {
  const int l = spec.dim();
  std::vector<std::vector<cplx>> rhs(l, std::vector<cplx>(n * l));
  for (int j = 0; j < l; ++j) rhs[j][j] = 1.0;
  const auto x = dense_solve(truncated_operator(spec, n, z), rhs);
  Block m(l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) m(i, j) = x[j][i];
  return m;
}

/// Direct block recursion u_{n+1} = D_n^{-1}((z - V_n) u_n - D_{n-1} u_{n-1})
/// with D_n^{-1} applied by dense elimination (no rescaling).
inline std::vector<Block> recurse(const mjacobi::OperatorSpec& spec, cplx z, const Block& u0,
                                  const Block& u1, int n_max) {
  const int l = spec.dim();
  std::vector<Block> u{u0, u1};
  for (int n = 1; n < n_max; ++n) {
    const auto c = spec.coefficient_at(n);
    const auto prev = spec.coefficient_at(n - 1);
    Block rhs = mul(Block::scalar(l, z) - c.v, u[n]) - mul(prev.d, u[n - 1]);
    std::vector<std::vector<cplx>> a(l, std::vector<cplx>(l));
    std::vector<std::vector<cplx>> b(l, std::vector<cplx>(l));
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) {
        a[i][j] = c.d(i, j);
        b[j][i] = rhs(i, j);
      }
    const auto x = dense_solve(a, b);
    Block next(l);
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) next(i, j) = x[j][i];
    u.push_back(next);
  }
  return u;
}

}  // namespace oracle
