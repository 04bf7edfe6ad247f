#include "mjacobi/weylm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mjacobi {

namespace {

void require_upper_half(cplx z, const char* who) {
  if (!(z.imag() >= kMinImaginary) || !std::isfinite(z.real())) {
    std::ostringstream os;
    os << who << ": need Im z >= " << kMinImaginary << ", got " << z;
    throw Error(ErrorKind::domain, os.str());
  }
}

// One downward Riccati sweep of the given depth; optionally records M_1..M_keep.
Block riccati_sweep(const CoefficientStream& coeffs, cplx z, std::int64_t depth,
                    std::vector<Block>* keep = nullptr, std::int64_t keep_upto = 0) {
  const int l = coeffs.spec().dim();
  const Block zi = Block::scalar(l, z);
  Block m(l);
  for (std::int64_t n = depth; n >= 1; --n) {
    const CoefficientStream::Entry c = coeffs.at(n);
    m = lu_inverse(c.v - zi - c.d * m * c.d);
    if (keep && n <= keep_upto) (*keep)[static_cast<std::size_t>(n)] = m;
  }
  return m;
}

Block ldexp_block(Block m, int e) {
  for (auto& v : m.data()) v = cplx(std::ldexp(v.real(), e), std::ldexp(v.imag(), e));
  return m;
}

}  // namespace

WeylM m_riccati(const OperatorSpec& spec, cplx z, double tol, std::int64_t max_depth) {
  require_upper_half(z, "m_riccati");
  const CoefficientStream coeffs(spec);
  std::int64_t depth = 16;
  Block prev = riccati_sweep(coeffs, z, depth);
  double delta = std::numeric_limits<double>::infinity();
  while (depth < max_depth) {
    depth *= 2;
    Block next = riccati_sweep(coeffs, z, depth);
    delta = frobenius_norm(next - prev);
    prev = std::move(next);
    if (delta < tol) return {z, std::move(prev), MMethod::riccati, depth, delta, false};
  }
  std::ostringstream os;
  os << "m_riccati: no convergence at depth " << depth << " (last delta " << delta << ") for z = "
     << z;
  throw Error(ErrorKind::convergence, os.str());
}

WeylM m_resolvent_fixed(const OperatorSpec& spec, cplx z, std::int64_t n) {
  require_upper_half(z, "m_resolvent");
  if (n < 8) throw Error(ErrorKind::invalid_input, "m_resolvent: need N >= 8");
  const CoefficientStream coeffs(spec);
  const int l = spec.dim();

  auto solve = [&](cplx w) {
    const Block wi = Block::scalar(l, w);
    std::vector<Block> s_inv;
    std::vector<Block> rhs;
    s_inv.reserve(static_cast<std::size_t>(n));
    rhs.reserve(static_cast<std::size_t>(n));
    // forward elimination, top-down
    CoefficientStream::Entry c = coeffs.at(1);
    s_inv.push_back(lu_inverse(c.v - wi));
    rhs.push_back(Block::identity(l));
    for (std::int64_t k = 2; k <= n; ++k) {
      const Block d_prev = c.d;  // D_{k-1}
      c = coeffs.at(k);
      const Block w_k = d_prev.transpose() * s_inv.back();
      s_inv.push_back(lu_inverse(c.v - wi - w_k * d_prev));
      rhs.push_back(-(w_k * rhs.back()));
    }
    // back substitution
    Block x = s_inv.back() * rhs.back();
    for (std::int64_t k = n - 1; k >= 1; --k) {
      const auto i = static_cast<std::size_t>(k - 1);
      x = s_inv[i] * (rhs[i] - coeffs.at(k).d * x);
    }
    return x;
  };

  try {
    return {z, solve(z), MMethod::resolvent, n, 0.0, false};
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::singular_block) throw;
  }
  const cplx bumped = z + cplx(0.0, kMinImaginary);
  return {bumped, solve(bumped), MMethod::resolvent, n, 0.0, true};
}

WeylM m_resolvent(const OperatorSpec& spec, cplx z, double tol, std::int64_t max_size) {
  std::int64_t n = 16;
  WeylM prev = m_resolvent_fixed(spec, z, n);
  double delta = std::numeric_limits<double>::infinity();
  while (n < max_size) {
    n *= 2;
    WeylM next = m_resolvent_fixed(spec, z, n);
    delta = frobenius_norm(next.m - prev.m);
    next.last_delta = delta;
    next.bumped = next.bumped || prev.bumped;
    prev = std::move(next);
    if (delta < tol) return prev;
  }
  std::ostringstream os;
  os << "m_resolvent: no convergence at N = " << n << " (last delta " << delta << ") for z = " << z;
  throw Error(ErrorKind::convergence, os.str());
}

std::vector<Block> tail_m_functions(const OperatorSpec& spec, cplx z, std::int64_t n, double tol) {
  if (n < 1) throw Error(ErrorKind::invalid_input, "tail_m_functions: need n >= 1");
  const WeylM base = m_riccati(spec, z, tol);
  const CoefficientStream coeffs(spec);
  std::vector<Block> out(static_cast<std::size_t>(n + 1), Block(spec.dim()));
  riccati_sweep(coeffs, z, n + base.depth, &out, n);
  return out;
}

SolutionTrack jost_solution(const OperatorSpec& spec, cplx z, std::int64_t n, double tol) {
  const std::vector<Block> tails = tail_m_functions(spec, z, std::max<std::int64_t>(n, 1), tol);
  const int l = spec.dim();
  SolutionTrack f(z, l);
  Block cur = Block::identity(l);
  int exponent = 0;
  f.push_back(cur, 0);
  Block d_prev = spec.coefficient_at(0).d;
  for (std::int64_t k = 1; k <= n; ++k) {
    cur = -(tails[static_cast<std::size_t>(k)] * d_prev * cur);
    d_prev = spec.coefficient_at(k).d;
    const double norm = frobenius_norm(cur);
    if (norm > 0.0 && (norm < 1.0 / kRescaleThreshold || norm > kRescaleThreshold)) {
      const int e = std::ilogb(norm);
      cur *= cplx(std::ldexp(1.0, -e));
      exponent += e;
    }
    f.push_back(cur, exponent);
  }
  return f;
}

Block green_block(const OperatorSpec& spec, std::int64_t p, std::int64_t q, cplx z, double tol) {
  require_upper_half(z, "green_block");
  if (p < 0 || q < 0) throw Error(ErrorKind::index_range, "green_block: need p, q >= 0");
  if (p > q) return green_block(spec, q, p, z, tol).transpose();
  const int l = spec.dim();
  if (p == 0) return Block::zero(l);
  const auto [phi, psi] = dirichlet_neumann(spec, z, std::max<std::int64_t>(p, 2));
  const SolutionTrack f = jost_solution(spec, z, q, tol);
  const Block d0_inv = lu_inverse(spec.coefficient_at(0).d);
  const Block g = -(phi.mantissa(p) * d0_inv * f.mantissa(q).transpose());
  const Block out = ldexp_block(g, phi.exponent(p) + f.exponent(q));
  if (!out.is_finite()) throw Error(ErrorKind::overflow, "green_block: entries out of range");
  return out;
}

HerglotzCheck herglotz_identity_residual(const OperatorSpec& spec, cplx z, std::int64_t n) {
  require_upper_half(z, "herglotz_identity_residual");
  const int l = spec.dim();
  const Block d0 = spec.coefficient_at(0).d;
  const WeylM m = m_riccati(spec, z);
  const Block lhs = d0 * hermitian_imag(m.m) * d0;
  const double lhs_norm = std::max(frobenius_norm(lhs), std::numeric_limits<double>::min());

  const bool adaptive = (n == 0);
  std::int64_t terms = adaptive ? 64 : n;
  constexpr std::int64_t kMaxTerms = std::int64_t{1} << 22;
  for (;;) {
    const SolutionTrack f = jost_solution(spec, z, terms);
    Block sum(l), comp(l);
    for (std::int64_t k = 1; k <= terms; ++k) {
      const Block fk = f.block(k);
      const Block term = fk.adjoint() * fk;
      auto s = sum.data();
      auto c = comp.data();
      auto t = term.data();
      for (std::size_t i = 0; i < s.size(); ++i) {
        const cplx yv = t[i] - c[i];
        const cplx next = s[i] + yv;
        c[i] = (next - s[i]) - yv;
        s[i] = next;
      }
    }
    const Block rhs = z.imag() * sum;

    HerglotzCheck out;
    out.terms = terms;
    out.residual = frobenius_norm(lhs - rhs) / lhs_norm;
    // geometric tail from the decay rate over the second half of the window
    const double log_last = f.log_frobenius(terms);
    const double log_mid = f.log_frobenius(terms / 2);
    const double rate = (log_last - log_mid) / static_cast<double>(terms - terms / 2);
    if (!(rate < 0.0)) {
      out.slow_decay = true;
      out.tail_estimate = std::numeric_limits<double>::infinity();
    } else {
      const double rho2 = std::exp(2.0 * rate);
      out.tail_estimate =
          z.imag() * std::exp(2.0 * log_last) * rho2 / (1.0 - rho2) / lhs_norm;
    }
    if (!adaptive) {
      out.slow_decay = out.slow_decay || out.tail_estimate > 1e-6;
      return out;
    }
    if (!out.slow_decay && out.tail_estimate < 1e-12) return out;
    if (terms >= kMaxTerms) {
      out.slow_decay = true;
      return out;
    }
    terms *= 2;
  }
}

ImMBoundary im_m_boundary(const OperatorSpec& spec, double x, const std::vector<double>& y_ladder,
                          const ImMOptions& options) {
  if (y_ladder.size() < 2) throw Error(ErrorKind::invalid_input, "im_m_boundary: need >= 2 rungs");
  for (std::size_t j = 0; j < y_ladder.size(); ++j) {
    if (!(y_ladder[j] > 0.0) || (j > 0 && !(y_ladder[j] < y_ladder[j - 1]))) {
      throw Error(ErrorKind::invalid_input, "im_m_boundary: ladder must be positive, decreasing");
    }
  }
  if (!(options.tau_rel > 0.0)) throw Error(ErrorKind::invalid_input, "im_m_boundary: tau_rel <= 0");

  ImMBoundary out;
  out.x = x;
  for (double y : y_ladder) {
    const WeylM m = m_riccati(spec, cplx(x, y), options.tol, options.max_depth);
    const HermitianEigen eig = hermitian_eigen(hermitian_imag(m.m));
    ImMRung rung;
    rung.y = y;
    rung.eigenvalues = eig.values;
    for (double v : eig.values) rung.trace += v;
    out.rungs.push_back(std::move(rung));
  }

  // pairwise classification of eigenvalues between consecutive rungs
  std::vector<std::optional<int>> pair_rank;
  for (std::size_t j = 1; j < out.rungs.size(); ++j) {
    const ImMRung& a = out.rungs[j - 1];
    const ImMRung& b = out.rungs[j];
    const double floor_a = options.tau_rel * std::max(a.eigenvalues.front(), 1e-12);
    const double floor_b = options.tau_rel * std::max(b.eigenvalues.front(), 1e-12);
    const double shrink = std::sqrt(b.y / a.y);
    int stable = 0;
    bool determinate = true;
    for (std::size_t i = 0; i < b.eigenvalues.size(); ++i) {
      const double pa = a.eigenvalues[i];
      const double pb = b.eigenvalues[i];
      if (pa > floor_a && pb > floor_b && std::abs(pb - pa) < options.stable_change * pa) {
        ++stable;
      } else if (pb <= floor_b || pb <= pa * shrink) {
        // vanishing
      } else {
        determinate = false;
      }
    }
    pair_rank.push_back(determinate ? std::optional<int>(stable) : std::nullopt);
  }
  std::optional<int> last, before;
  for (const auto& r : pair_rank) {
    if (!r) continue;
    before = last;
    last = r;
  }
  if (last && before && *last == *before) {
    out.rank = *last;
    out.verdict = RankVerdict::determinate;
  }

  // least-squares slope of log trace against log(1/y)
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double k = static_cast<double>(out.rungs.size());
  for (const auto& r : out.rungs) {
    const double u = -std::log(r.y);
    const double v = std::log(std::max(r.trace, std::numeric_limits<double>::min()));
    sx += u;
    sy += v;
    sxx += u * u;
    sxy += u * v;
  }
  out.trace_growth = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return out;
}

JLConstants jl_constants(const Block& d0, NormKind kind) {
  const double d_norm = frobenius_norm(d0);
  const double d_inv = block_norm(lu_inverse(d0), kind);
  const double s_l = singular_values(d0 * d0).smallest();
  JLConstants c;
  c.b = -(2.0 * d_norm / d_inv + 9.0 * d_norm * d_norm);
  c.k1 = -1.0 / (c.b * d_inv);
  c.k2 = -2.0 * d0.dim() * c.b * d_inv / s_l;
  return c;
}

JLBoundReport jl_bounds(const OperatorSpec& spec, double x, double y, double tol,
                        const LSolveOptions& l_options) {
  const LSolution ls = solve_L_of_y(spec, x, y, l_options);
  const JLConstants c = jl_constants(spec.coefficient_at(0).d, l_options.d0_norm);
  const WeylM m = m_resolvent(spec, cplx(x, y), tol);

  JLBoundReport r;
  r.x = x;
  r.y = y;
  r.L = ls.L;
  r.psi_norm = truncated_norm(ls.psi, ls.L);
  r.phi_norm = truncated_norm(ls.phi, ls.L);
  r.phi_smallest = truncated_singular(ls.phi, spec.dim(), ls.L);
  r.ratio = r.psi_norm / r.phi_norm;
  r.k1 = c.k1;
  r.k2 = c.k2;
  r.m_norm = frobenius_norm(m.m);
  r.m_operator_norm = operator_norm(m.m);
  r.lower = r.k1 * r.ratio;
  if (r.phi_smallest < 1e-300) {
    r.condition_overflow = true;
    r.condition_term = std::numeric_limits<double>::infinity();
    r.upper = std::numeric_limits<double>::infinity();
    return r;
  }
  r.condition_term = (r.phi_norm / r.phi_smallest) * (r.phi_norm / r.phi_smallest);
  r.upper = r.k2 * r.ratio * r.condition_term;
  r.verdict = (r.lower <= r.m_norm + kJLSlack) && (r.m_norm <= r.upper + kJLSlack);
  return r;
}

}  // namespace mjacobi
