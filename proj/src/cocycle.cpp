#include "mjacobi/cocycle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mjacobi {

namespace {

constexpr std::int64_t kMaxCachedPeriod = 4096;

Block ldexp_block(const Block& m, int e) {
  if (e == 0) return m;
  Block out(m);
  for (auto& v : out.data()) v = cplx(std::ldexp(v.real(), e), std::ldexp(v.imag(), e));
  return out;
}

// Kahan-compensated running sum of blocks.
class CompensatedBlockSum {
 public:
  explicit CompensatedBlockSum(int dim) : sum_(dim), comp_(dim) {}

  void add(const Block& term) {
    auto s = sum_.data();
    auto c = comp_.data();
    auto t = term.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const cplx y = t[i] - c[i];
      const cplx next = s[i] + y;
      c[i] = (next - s[i]) - y;
      s[i] = next;
    }
  }

  const Block& value() const noexcept { return sum_; }

 private:
  Block sum_;
  Block comp_;
};

}  // namespace

// ---- SolutionTrack --------------------------------------------------------

SolutionTrack SolutionTrack::from_blocks(cplx energy, std::vector<Block> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::invalid_input, "from_blocks: empty sequence");
  SolutionTrack t(energy, blocks.front().dim());
  for (auto& b : blocks) t.push_back(std::move(b), 0);
  return t;
}

void SolutionTrack::push_back(Block mantissa, int exponent) {
  if (mantissa.dim() != dim_) throw Error(ErrorKind::invalid_input, "track: block size mismatch");
  if (exponent != 0) rescaled_ = true;
  spectra_.push_back(singular_values(mantissa));
  mantissas_.push_back(std::move(mantissa));
  exponents_.push_back(exponent);
}

void SolutionTrack::check_index(std::int64_t n) const {
  if (n < 0 || n >= size()) {
    std::ostringstream os;
    os << "track index " << n << " outside 0.." << last_index();
    throw Error(ErrorKind::index_range, os.str());
  }
}

const Block& SolutionTrack::mantissa(std::int64_t n) const {
  check_index(n);
  return mantissas_[static_cast<std::size_t>(n)];
}

int SolutionTrack::exponent(std::int64_t n) const {
  check_index(n);
  return exponents_[static_cast<std::size_t>(n)];
}

const SingularSpectrum& SolutionTrack::mantissa_singular(std::int64_t n) const {
  check_index(n);
  return spectra_[static_cast<std::size_t>(n)];
}

Block SolutionTrack::block(std::int64_t n) const {
  const Block out = ldexp_block(mantissa(n), exponent(n));
  if (!out.is_finite()) {
    std::ostringstream os;
    os << "track block " << n << " exceeds double range (exponent " << exponent(n) << ")";
    throw Error(ErrorKind::overflow, os.str());
  }
  return out;
}

double SolutionTrack::frobenius(std::int64_t n) const {
  return std::ldexp(frobenius_norm(mantissa(n)), exponent(n));
}

double SolutionTrack::singular_value(std::int64_t n, int k) const {
  if (k < 1 || k > dim_) throw Error(ErrorKind::index_range, "singular index out of 1..l");
  return std::ldexp(mantissa_singular(n).s(k), exponent(n));
}

double SolutionTrack::log_frobenius(std::int64_t n) const {
  return std::log(frobenius_norm(mantissa(n))) + exponent(n) * std::log(2.0);
}

// ---- coefficient stream / recurrence ------------------------------------

CoefficientStream::CoefficientStream(const OperatorSpec& spec) : spec_(&spec) {
  const auto p = spec.period();
  if (p && *p <= kMaxCachedPeriod) {
    cache_.reserve(static_cast<std::size_t>(*p));
    for (std::int64_t n = 0; n < *p; ++n) {
      Coefficients c = spec.coefficient_at(n);
      Block inv = lu_inverse(c.d);
      cache_.push_back({std::move(c.d), std::move(inv), std::move(c.v)});
    }
  }
}

CoefficientStream::Entry CoefficientStream::at(std::int64_t n) const {
  if (!cache_.empty() && n >= 0) {
    return cache_[static_cast<std::size_t>(n % static_cast<std::int64_t>(cache_.size()))];
  }
  Coefficients c = spec_->coefficient_at(n);
  Block inv = lu_inverse(c.d);
  return {std::move(c.d), std::move(inv), std::move(c.v)};
}

Recurrence::Recurrence(const OperatorSpec& spec, cplx z, Block u0, Block u1)
    : coeffs_(spec), z_(z), prev_(std::move(u0)), cur_(std::move(u1)),
      d_prev_(spec.coefficient_at(0).d) {
  if (prev_.dim() != spec.dim() || cur_.dim() != spec.dim()) {
    throw Error(ErrorKind::invalid_input, "recurrence: initial data size mismatch");
  }
}

void Recurrence::step() {
  CoefficientStream::Entry c = coeffs_.at(n_);
  Block rhs = cur_ * z_;
  rhs -= c.v * cur_;
  rhs -= d_prev_ * prev_;
  Block next = c.d_inverse * rhs;
  prev_ = std::move(cur_);
  cur_ = std::move(next);
  d_prev_ = std::move(c.d);
  ++n_;
  const double norm = frobenius_norm(cur_);
  if (!std::isfinite(norm)) throw Error(ErrorKind::overflow, "recurrence: non-finite block");
  if (norm > kRescaleThreshold) {
    const int k = std::ilogb(norm);
    const cplx factor = std::ldexp(1.0, -k);
    cur_ *= factor;
    prev_ *= factor;
    exponent_ += k;
  }
}

SolutionTrack propagate(const OperatorSpec& spec, cplx z, const Block& u0, const Block& u1,
                        std::int64_t n_max) {
  if (n_max < 1) throw Error(ErrorKind::invalid_input, "propagate: need n_max >= 1");
  SolutionTrack track(z, spec.dim());
  track.push_back(u0, 0);
  track.push_back(u1, 0);
  Recurrence rec(spec, z, u0, u1);
  while (rec.index() < n_max) {
    rec.step();
    track.push_back(rec.current(), rec.exponent());
  }
  return track;
}

std::pair<SolutionTrack, SolutionTrack> dirichlet_neumann(const OperatorSpec& spec, cplx z,
                                                          std::int64_t n_max) {
  if (n_max < 2) throw Error(ErrorKind::invalid_input, "dirichlet_neumann: need N >= 2");
  const int l = spec.dim();
  return {propagate(spec, z, Block::zero(l), Block::identity(l), n_max),
          propagate(spec, z, Block::identity(l), Block::zero(l), n_max)};
}

// ---- transfer matrices ----------------------------------------------------

TransferMatrix TransferMatrix::identity(int dim) {
  return {Block::identity(dim), Block::zero(dim), Block::zero(dim), Block::identity(dim)};
}

double TransferMatrix::frobenius() const {
  const double fa = frobenius_norm(a), fb = frobenius_norm(b);
  const double fc = frobenius_norm(c), fd = frobenius_norm(d);
  return std::sqrt(fa * fa + fb * fb + fc * fc + fd * fd);
}

TransferMatrix TransferMatrix::operator*(const TransferMatrix& r) const {
  return {a * r.a + b * r.c, a * r.b + b * r.d, c * r.a + d * r.c, c * r.b + d * r.d};
}

TransferMatrix TransferMatrix::scaled(double factor) const {
  return {a * cplx(factor), b * cplx(factor), c * cplx(factor), d * cplx(factor)};
}

std::pair<Block, Block> TransferMatrix::apply(const Block& top, const Block& bottom) const {
  return {a * top + b * bottom, c * top + d * bottom};
}

TransferMatrix TransferMatrix::transpose() const {
  return {a.transpose(), c.transpose(), b.transpose(), d.transpose()};
}

TransferMatrix transfer_step(const Block& d_n, const Block& d_prev, const Block& v_n, cplx z) {
  if (d_prev.dim() != d_n.dim() || v_n.dim() != d_n.dim()) {
    throw Error(ErrorKind::invalid_input, "transfer_step: block size mismatch");
  }
  const Block inv = lu_inverse(d_n);
  const int l = d_n.dim();
  return {inv * (Block::scalar(l, z) - v_n), -inv, d_n, Block::zero(l)};
}

std::pair<Block, Block> lift(const Block& u_n, const Block& u_prev, const Block& d_prev) {
  return {u_n, d_prev * u_prev};
}

CocycleProduct cocycle_product(const OperatorSpec& spec, cplx z, std::int64_t n) {
  if (n < 0) throw Error(ErrorKind::invalid_input, "cocycle_product: n must be >= 0");
  CocycleProduct out{TransferMatrix::identity(spec.dim()), 0};
  Block d_prev = spec.coefficient_at(0).d;
  for (std::int64_t k = 1; k < n; ++k) {
    const Coefficients c = spec.coefficient_at(k);
    out.matrix = transfer_step(c.d, d_prev, c.v, z) * out.matrix;
    d_prev = c.d;
    const double norm = out.matrix.frobenius();
    if (!std::isfinite(norm)) throw Error(ErrorKind::overflow, "cocycle_product: non-finite entries");
    if (norm > kRescaleThreshold) {
      const int e = std::ilogb(norm);
      if (out.exponent > std::numeric_limits<int>::max() - e) {
        throw Error(ErrorKind::overflow, "cocycle_product: exponent ledger exhausted");
      }
      out.matrix = out.matrix.scaled(std::ldexp(1.0, -e));
      out.exponent += e;
    }
  }
  return out;
}

// ---- Wronskian / Green formula -------------------------------------------

Block wronskian(const SolutionTrack& a, const SolutionTrack& b, std::int64_t n,
                const OperatorSpec& spec) {
  if (n < 1 || n > a.last_index() || n > b.last_index()) {
    std::ostringstream os;
    os << "wronskian: index " << n << " not covered by both tracks";
    throw Error(ErrorKind::index_range, os.str());
  }
  const Block d = spec.coefficient_at(n - 1).d;
  const Block t1 = a.mantissa(n - 1).transpose() * d * b.mantissa(n);
  const Block t2 = a.mantissa(n).transpose() * d * b.mantissa(n - 1);
  return ldexp_block(t1, a.exponent(n - 1) + b.exponent(n)) -
         ldexp_block(t2, a.exponent(n) + b.exponent(n - 1));
}

double green_formula_residual(const SolutionTrack& a, const SolutionTrack& b, std::int64_t m,
                              std::int64_t n, const OperatorSpec& spec) {
  if (m < 1 || n <= m || n + 1 > a.last_index() || n + 1 > b.last_index()) {
    throw Error(ErrorKind::index_range, "green_formula_residual: need 1 <= m < n and n + 1 covered");
  }
  auto apply_h = [&](const SolutionTrack& u, std::int64_t k) {
    const Coefficients prev = spec.coefficient_at(k - 1);
    const Coefficients cur = spec.coefficient_at(k);
    return prev.d * u.block(k - 1) + cur.d * u.block(k + 1) + cur.v * u.block(k);
  };
  CompensatedBlockSum sum(spec.dim());
  for (std::int64_t k = m; k <= n; ++k) {
    sum.add(a.block(k).transpose() * apply_h(b, k) - apply_h(a, k).transpose() * b.block(k));
  }
  return frobenius_norm(sum.value() - wronskian(a, b, n + 1, spec) + wronskian(a, b, m, spec));
}

SolutionTrack jost_assemble(const SolutionTrack& phi, const SolutionTrack& psi, const Block& m,
                            const Block& d0) {
  if (phi.dim() != psi.dim() || m.dim() != phi.dim() || d0.dim() != phi.dim()) {
    throw Error(ErrorKind::invalid_input, "jost_assemble: dimension mismatch");
  }
  const Block md0 = m * d0;
  SolutionTrack f(phi.energy(), phi.dim());
  const std::int64_t last = std::min(phi.last_index(), psi.last_index());
  for (std::int64_t n = 0; n <= last; ++n) f.push_back(psi.block(n) - phi.block(n) * md0, 0);
  return f;
}

double jl_identity_residual(const SolutionTrack& phi, const SolutionTrack& psi,
                            const SolutionTrack& jost, const Block& m, const Block& d0, double y,
                            std::int64_t n_max) {
  if (n_max < 1 || n_max > phi.last_index() || n_max > psi.last_index() ||
      n_max > jost.last_index()) {
    throw Error(ErrorKind::index_range, "jl_identity_residual: tracks do not cover n_max");
  }
  const int l = phi.dim();
  const Block d0_inv = lu_inverse(d0);
  const Block md0 = m * d0;
  const cplx iy(0.0, y);
  CompensatedBlockSum alpha(l), beta(l);
  double worst = 0.0;
  for (std::int64_t n = 1; n <= n_max; ++n) {
    const Block phi_n = phi.block(n);
    const Block psi_n = psi.block(n);
    const Block f_n = jost.block(n);
    alpha.add(d0_inv * phi_n.transpose() * f_n);
    beta.add(d0_inv * psi_n.transpose() * f_n);
    const Block rhs = psi_n - phi_n * md0 - iy * (psi_n * alpha.value()) + iy * (phi_n * beta.value());
    const double scale = std::max(frobenius_norm(f_n), std::numeric_limits<double>::min());
    worst = std::max(worst, frobenius_norm(f_n - rhs) / scale);
  }
  return worst;
}

}  // namespace mjacobi
