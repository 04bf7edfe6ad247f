#include "mjacobi/truncmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mjacobi {

namespace {

void check_cutoff(const SolutionTrack& track, double L) {
  if (!(L >= 1.0) || !std::isfinite(L)) {
    throw Error(ErrorKind::invalid_input, "truncation cutoff must satisfy L >= 1");
  }
  const auto whole = static_cast<std::int64_t>(std::floor(L));
  const std::int64_t needed = (L > static_cast<double>(whole)) ? whole + 1 : whole;
  if (needed > track.last_index()) {
    std::ostringstream os;
    os << "track ends at " << track.last_index() << ", cutoff " << L << " needs index " << needed;
    throw Error(ErrorKind::track_too_short, os.str());
  }
}

template <class Term>
double truncated_sum(const SolutionTrack& track, double L, Term term) {
  check_cutoff(track, L);
  const auto whole = static_cast<std::int64_t>(std::floor(L));
  const double frac = L - static_cast<double>(whole);
  double sum = 0.0;
  for (std::int64_t n = 1; n <= whole; ++n) {
    const double t = term(n);
    sum += t * t;
  }
  if (frac > 0.0) {
    const double t = term(whole + 1);
    sum += frac * t * t;
  }
  return std::sqrt(sum);
}

}  // namespace

double block_norm(const Block& a, NormKind kind) {
  return kind == NormKind::frobenius ? frobenius_norm(a) : operator_norm(a);
}

double truncated_norm(const SolutionTrack& track, double L) {
  return truncated_sum(track, L, [&](std::int64_t n) { return track.frobenius(n); });
}

double truncated_singular(const SolutionTrack& track, int k, double L) {
  if (k < 1 || k > track.dim()) throw Error(ErrorKind::index_range, "singular index out of 1..l");
  return truncated_sum(track, L, [&](std::int64_t n) { return track.singular_value(n, k); });
}

LSolution solve_L_of_y(const OperatorSpec& spec, double x, double y, const LSolveOptions& options) {
  if (!(y > 0.0) || !std::isfinite(y) || !std::isfinite(x)) {
    throw Error(ErrorKind::domain, "solve_L_of_y: need finite x and y > 0");
  }
  const int l = spec.dim();
  LSolution out;
  out.d0_inverse_norm = block_norm(lu_inverse(spec.coefficient_at(0).d), options.d0_norm);
  out.target = 1.0 / (y * out.d0_inverse_norm);
  // f^2 / 4 = P Q against this
  const double goal = 0.25 * out.target * out.target;

  out.phi = SolutionTrack(x, l);
  out.psi = SolutionTrack(x, l);
  out.phi.push_back(Block::zero(l), 0);
  out.phi.push_back(Block::identity(l), 0);
  out.psi.push_back(Block::identity(l), 0);
  out.psi.push_back(Block::zero(l), 0);
  Recurrence phi_rec(spec, x, Block::zero(l), Block::identity(l));
  Recurrence psi_rec(spec, x, Block::identity(l), Block::zero(l));

  double p_sum = 0.0;                // sum_{k<=n} ||psi_k||^2
  double q_sum = static_cast<double>(l);  // sum_{k<=n} ||phi_k||^2, phi_1 = I
  std::int64_t n = 1;
  double p_next = 0.0, q_next = 0.0;
  for (;;) {
    if (n + 1 > options.max_length) {
      std::ostringstream os;
      os << "solve_L_of_y: f = " << 2.0 * std::sqrt(p_sum * q_sum) << " below target "
         << out.target << " after " << n << " blocks";
      throw Error(ErrorKind::track_too_short, os.str());
    }
    phi_rec.step();
    psi_rec.step();
    out.phi.push_back(phi_rec.current(), phi_rec.exponent());
    out.psi.push_back(psi_rec.current(), psi_rec.exponent());
    p_next = out.psi.frobenius(n + 1);
    q_next = out.phi.frobenius(n + 1);
    p_next *= p_next;
    q_next *= q_next;
    if ((p_sum + p_next) * (q_sum + q_next) >= goal) break;
    p_sum += p_next;
    q_sum += q_next;
    ++n;
  }

  // (P + t p)(Q + t q) = goal on t in [0, 1]; the t = 0 side is below goal.
  const double a = p_next * q_next;
  const double b = p_sum * q_next + q_sum * p_next;
  const double c = p_sum * q_sum - goal;
  double t = 0.0;
  if (a > 0.0) {
    t = -2.0 * c / (b + std::sqrt(b * b - 4.0 * a * c));
  } else if (b > 0.0) {
    t = -c / b;
  }
  t = std::clamp(t, 0.0, 1.0);
  // one Newton step on the product to clean up rounding in the root formula
  const double g = (p_sum + t * p_next) * (q_sum + t * q_next) - goal;
  const double dg = 2.0 * a * t + b;
  if (dg > 0.0) t = std::clamp(t - g / dg, 0.0, 1.0);

  out.L = static_cast<double>(n) + t;
  const double psi_norm = truncated_norm(out.psi, out.L);
  const double phi_norm = truncated_norm(out.phi, out.L);
  out.f = 2.0 * psi_norm * phi_norm;
  out.residual = std::abs(y * out.d0_inverse_norm * out.f - 1.0);
  return out;
}

}  // namespace mjacobi
