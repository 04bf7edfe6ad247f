#include "mjacobi/matlin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mjacobi {

namespace {

constexpr int kMaxSweeps = 80;

void require_same_dim(const Block& a, const Block& b) {
  if (a.dim() != b.dim()) {
    std::ostringstream os;
    os << "block dimension mismatch: " << a.dim() << " vs " << b.dim();
    throw Error(ErrorKind::invalid_input, os.str());
  }
}

void require_finite(const Block& a, const char* op) {
  if (!a.is_finite()) {
    throw Error(ErrorKind::invalid_input, std::string(op) + ": non-finite block entry");
  }
}

}  // namespace

Block::Block(int dim) : dim_(dim) {
  if (dim < 1) throw Error(ErrorKind::invalid_input, "block dimension must be >= 1");
  a_.assign(static_cast<std::size_t>(dim) * dim, cplx{});
}

Block Block::identity(int dim) { return scalar(dim, 1.0); }

Block Block::scalar(int dim, cplx value) {
  Block b(dim);
  for (int i = 0; i < dim; ++i) b(i, i) = value;
  return b;
}

Block Block::diagonal(std::span<const double> entries) {
  Block b(static_cast<int>(entries.size()));
  for (int i = 0; i < b.dim(); ++i) b(i, i) = entries[static_cast<std::size_t>(i)];
  return b;
}

Block Block::diagonal(std::initializer_list<double> entries) {
  return diagonal(std::span<const double>(entries.begin(), entries.size()));
}

Block Block::from_rows(std::initializer_list<std::initializer_list<cplx>> rows) {
  Block b(static_cast<int>(rows.size()));
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != b.dim()) {
      throw Error(ErrorKind::invalid_input, "from_rows: block must be square");
    }
    int j = 0;
    for (const auto& v : row) b(i, j++) = v;
    ++i;
  }
  return b;
}

Block& Block::operator+=(const Block& other) {
  require_same_dim(*this, other);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += other.a_[i];
  return *this;
}

Block& Block::operator-=(const Block& other) {
  require_same_dim(*this, other);
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= other.a_[i];
  return *this;
}

Block& Block::operator*=(cplx factor) {
  for (auto& v : a_) v *= factor;
  return *this;
}

Block Block::transpose() const {
  Block t(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Block Block::adjoint() const {
  Block t(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) t(j, i) = std::conj((*this)(i, j));
  return t;
}

Block Block::conj() const {
  Block t(*this);
  for (auto& v : t.a_) v = std::conj(v);
  return t;
}

Block Block::real_part() const {
  Block t(*this);
  for (auto& v : t.a_) v = v.real();
  return t;
}

Block Block::imag_part() const {
  Block t(*this);
  for (auto& v : t.a_) v = v.imag();
  return t;
}

bool Block::is_finite() const {
  return std::all_of(a_.begin(), a_.end(), [](const cplx& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

double Block::max_abs() const {
  double m = 0.0;
  for (const auto& v : a_) m = std::max(m, std::abs(v));
  return m;
}

Block operator+(Block lhs, const Block& rhs) { return lhs += rhs; }
Block operator-(Block lhs, const Block& rhs) { return lhs -= rhs; }
Block operator-(Block value) { return value *= -1.0; }
Block operator*(cplx factor, Block value) { return value *= factor; }
Block operator*(Block value, cplx factor) { return value *= factor; }

Block operator*(const Block& lhs, const Block& rhs) {
  require_same_dim(lhs, rhs);
  const int n = lhs.dim();
  Block out(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      const cplx a = lhs(i, k);
      if (a == cplx{}) continue;
      for (int j = 0; j < n; ++j) out(i, j) += a * rhs(k, j);
    }
  }
  return out;
}

SingularSpectrum singular_values(const Block& a) {
  require_finite(a, "singular_values");
  const int n = a.dim();
  // Work on columns of a scaled copy so that huge or tiny entries do not
  // over/underflow the squared column norms.
  const double scale = a.max_abs();
  if (scale == 0.0) return SingularSpectrum(std::vector<double>(static_cast<std::size_t>(n), 0.0));
  Block w = a * cplx(1.0 / scale);

  auto col_dot = [&](int p, int q) {
    cplx s{};
    for (int i = 0; i < n; ++i) s += std::conj(w(i, p)) * w(i, q);
    return s;
  };

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double alpha = col_dot(p, p).real();
        const double beta = col_dot(q, q).real();
        const cplx gamma = col_dot(p, q);
        const double g = std::abs(gamma);
        if (g == 0.0 || g <= 1e-16 * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const cplx phase = gamma / g;
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (int i = 0; i < n; ++i) {
          const cplx wp = w(i, p);
          const cplx wq = w(i, q) * std::conj(phase);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> s(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::norm(w(i, j));
    s[static_cast<std::size_t>(j)] = std::sqrt(acc) * scale;
  }
  std::stable_sort(s.begin(), s.end(), std::greater<>());
  return SingularSpectrum(std::move(s));
}

double frobenius_norm(const Block& a) {
  const double scale = a.max_abs();
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double acc = 0.0;
  for (const auto& v : a.data()) acc += std::norm(v / scale);
  return std::sqrt(acc) * scale;
}

double operator_norm(const Block& a) { return singular_values(a).largest(); }

HermitianEigen hermitian_eigen(const Block& input) {
  require_finite(input, "hermitian_eigen");
  const int n = input.dim();
  Block a = (input + input.adjoint()) * cplx(0.5);
  Block v = Block::identity(n);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (int i = 0; i < n; ++i) {
      diag += std::norm(a(i, i));
      for (int j = 0; j < n; ++j)
        if (i != j) off += std::norm(a(i, j));
    }
    if (off <= 1e-32 * diag || off == 0.0) break;

    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double g = std::abs(a(p, q));
        if (g == 0.0) continue;
        const cplx e = a(p, q) / g;
        const double tau = (a(q, q).real() - a(p, p).real()) / (2.0 * g);
        const double t = std::copysign(1.0, tau) / (std::abs(tau) + std::hypot(1.0, tau));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        // G = diag(1, conj(e)) * [[c, s], [-s, c]] restricted to (p, q).
        const cplx gpp = c;
        const cplx gpq = s;
        const cplx gqp = -s * std::conj(e);
        const cplx gqq = c * std::conj(e);
        for (int k = 0; k < n; ++k) {
          const cplx akp = a(k, p);
          const cplx akq = a(k, q);
          a(k, p) = akp * gpp + akq * gqp;
          a(k, q) = akp * gpq + akq * gqq;
        }
        for (int k = 0; k < n; ++k) {
          const cplx apk = a(p, k);
          const cplx aqk = a(q, k);
          a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
          a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (int k = 0; k < n; ++k) {
          const cplx vkp = v(k, p);
          const cplx vkq = v(k, q);
          v(k, p) = vkp * gpp + vkq * gqp;
          v(k, q) = vkp * gpq + vkq * gqq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i).real() > a(j, j).real(); });
  HermitianEigen out{std::vector<double>(static_cast<std::size_t>(n)), Block(n)};
  for (int j = 0; j < n; ++j) {
    const int src = order[static_cast<std::size_t>(j)];
    out.values[static_cast<std::size_t>(j)] = a(src, src).real();
    for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, src);
  }
  return out;
}

Block psd_sqrt(const Block& a, double tolerance) {
  require_finite(a, "psd_sqrt");
  if (hermitian_defect(a) > 1e-10 * std::max(1.0, frobenius_norm(a))) {
    throw Error(ErrorKind::domain, "psd_sqrt: input is not Hermitian");
  }
  const HermitianEigen eig = hermitian_eigen(a);
  if (eig.values.back() < -tolerance) {
    std::ostringstream os;
    os << "psd_sqrt: negative eigenvalue " << eig.values.back();
    throw Error(ErrorKind::domain, os.str());
  }
  const int n = a.dim();
  Block b(n);
  for (int k = 0; k < n; ++k) {
    const double root = std::sqrt(std::max(0.0, eig.values[static_cast<std::size_t>(k)]));
    if (root == 0.0) continue;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        b(i, j) += root * eig.vectors(i, k) * std::conj(eig.vectors(j, k));
  }
  return b;
}

namespace {

// In-place LU with partial pivoting applied to the augmented right-hand side.
Block lu_solve_impl(Block lu, Block rhs) {
  const int n = lu.dim();
  const double scale = lu.max_abs();
  if (scale == 0.0) throw Error(ErrorKind::singular_block, "LU: zero block");
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    double best = std::abs(lu(col, col));
    for (int r = col + 1; r < n; ++r) {
      const double cand = std::abs(lu(r, col));
      if (cand > best) {
        best = cand;
        pivot = r;
      }
    }
    if (best <= 1e-15 * scale) {
      std::ostringstream os;
      os << "LU: vanishing pivot " << best << " at column " << col;
      throw Error(ErrorKind::singular_block, os.str());
    }
    if (pivot != col) {
      for (int j = 0; j < n; ++j) {
        std::swap(lu(col, j), lu(pivot, j));
        std::swap(rhs(col, j), rhs(pivot, j));
      }
    }
    const cplx inv = 1.0 / lu(col, col);
    for (int r = col + 1; r < n; ++r) {
      const cplx f = lu(r, col) * inv;
      if (f == cplx{}) continue;
      for (int j = col; j < n; ++j) lu(r, j) -= f * lu(col, j);
      for (int j = 0; j < n; ++j) rhs(r, j) -= f * rhs(col, j);
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    const cplx inv = 1.0 / lu(r, r);
    for (int j = 0; j < n; ++j) {
      cplx acc = rhs(r, j);
      for (int k = r + 1; k < n; ++k) acc -= lu(r, k) * rhs(k, j);
      rhs(r, j) = acc * inv;
    }
  }
  return rhs;
}

}  // namespace

Block lu_inverse(const Block& a) {
  if (a.dim() == 1) {
    if (a(0, 0) == cplx{}) throw Error(ErrorKind::singular_block, "LU: zero block");
    return Block::scalar(1, 1.0 / a(0, 0));
  }
  return lu_solve_impl(a, Block::identity(a.dim()));
}

Block lu_solve(const Block& a, const Block& b) {
  require_same_dim(a, b);
  return lu_solve_impl(a, b);
}

Block invert(const Block& a) {
  require_finite(a, "invert");
  const SingularSpectrum s = singular_values(a);
  if (!(s.smallest() > kSingularRatio * s.largest())) {
    std::ostringstream os;
    os << "invert: near-singular block, s_l = " << s.smallest() << ", s_1 = " << s.largest();
    throw Error(ErrorKind::singular_block, os.str());
  }
  return lu_solve_impl(a, Block::identity(a.dim()));
}

double symmetry_defect(const Block& a) { return frobenius_norm(a - a.transpose()); }

double hermitian_defect(const Block& a) { return frobenius_norm(a - a.adjoint()); }

Block hermitian_imag(const Block& m) {
  return (m - m.adjoint()) * cplx(0.0, -0.5);
}

}  // namespace mjacobi
