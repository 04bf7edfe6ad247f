#pragma once

// The half-line Weyl M-function M(z) = G(1,1;z) of the Dirichlet operator,
// Jost solutions, Green function blocks, boundary values of Im M along a
// ladder y -> 0, and the two-sided bound on ||M(x+iy)|| in terms of the
// truncated norms of the Dirichlet and Neumann solutions.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mjacobi/cocycle.hpp"
#include "mjacobi/truncmetrics.hpp"

namespace mjacobi {

/// Smallest admissible Im z for the M-function solvers.
inline constexpr double kMinImaginary = 1e-8;

enum class MMethod { riccati, resolvent };

struct WeylM {
  cplx z;
  Block m;
  MMethod method = MMethod::riccati;
  std::int64_t depth = 0;   // truncation depth that met the stop rule
  double last_delta = 0.0;  // ||M(depth) - M(depth / 2)||_F
  bool bumped = false;      // resolvent breakdown forced Im z up
};

inline constexpr std::int64_t kMaxRiccatiDepth = std::int64_t{1} << 24;
inline constexpr std::int64_t kMaxResolventSize = std::int64_t{1} << 20;

/// M_n = ((V_n - z) - D_n M_{n+1} D_n)^{-1} down from M_{N+1} = 0; M = M_1.
/// N doubles from 16 until successive M_1 differ by less than tol.
WeylM m_riccati(const OperatorSpec& spec, cplx z, double tol = 1e-10,
                std::int64_t max_depth = kMaxRiccatiDepth);

/// (1,1) block of (H_N - z)^{-1} for the Dirichlet truncation to sites 1..N,
/// by top-down block elimination and back substitution.
WeylM m_resolvent_fixed(const OperatorSpec& spec, cplx z, std::int64_t n);

/// m_resolvent_fixed with N doubling from 16 until the Cauchy stop rule.
WeylM m_resolvent(const OperatorSpec& spec, cplx z, double tol = 1e-10,
                  std::int64_t max_size = kMaxResolventSize);

/// Tail M-functions M_1..M_n (M_k is G(k,k;z) for the operator restricted to
/// sites >= k), from a Riccati sweep started deep enough that M_1 has
/// converged to tol. Index 0 of the result is unused.
std::vector<Block> tail_m_functions(const OperatorSpec& spec, cplx z, std::int64_t n,
                                    double tol = 1e-10);

/// The Jost solution F_0 = I, F_k = -M_k D_{k-1} F_{k-1}, k <= n. This equals
/// psi - phi M D_0 but avoids the cancellation of that difference.
SolutionTrack jost_solution(const OperatorSpec& spec, cplx z, std::int64_t n, double tol = 1e-10);

/// G(p,q;z) = -phi_p D_0^{-1} F_q^t for p <= q, and G(q,p;z)^t otherwise.
Block green_block(const OperatorSpec& spec, std::int64_t p, std::int64_t q, cplx z,
                  double tol = 1e-10);

struct HerglotzCheck {
  double residual = 0.0;       // relative Frobenius residual, tail included
  double tail_estimate = 0.0;  // relative size of the geometric tail past N
  std::int64_t terms = 0;
  bool slow_decay = false;     // tail estimate unreliable or too large
};

/// Compares D_0 Im M D_0 with Im z * sum_{k>=1} F_k^* F_k. With n = 0 the
/// number of terms doubles until the estimated tail is below 1e-12
/// (relative), up to 2^22 terms.
HerglotzCheck herglotz_identity_residual(const OperatorSpec& spec, cplx z, std::int64_t n = 0);

struct ImMRung {
  double y = 0.0;
  std::vector<double> eigenvalues;  // of Im M, descending
  double trace = 0.0;
};

enum class RankVerdict { determinate, indeterminate };

struct ImMBoundary {
  double x = 0.0;
  std::vector<ImMRung> rungs;
  std::optional<int> rank;  // empty when indeterminate
  RankVerdict verdict = RankVerdict::indeterminate;
  /// Least-squares slope of log tr Im M against log(1/y): about 0 on the ac
  /// spectrum, about -1 off the spectrum, positive near point masses.
  double trace_growth = 0.0;
};

inline const std::vector<double>& default_y_ladder() {
  static const std::vector<double> ladder{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  return ladder;
}

struct ImMOptions {
  double tau_rel = 1e-3;
  double stable_change = 0.2;  // relative change allowed for a retained eigenvalue
  double tol = 1e-10;
  std::int64_t max_depth = kMaxRiccatiDepth;
};

/// Rank of lim Im M(x + iy) as y -> 0, read off a decreasing ladder.
/// Between consecutive rungs an eigenvalue counts when it is above
/// tau_rel * max(lambda_1, 1e-12) and moved by less than stable_change; it is
/// vanishing when it is below that floor or shrank at least like sqrt(y); any
/// other behaviour leaves the pair undetermined. The rank is the one shared by
/// the last two determinate pairs; otherwise the verdict is indeterminate.
ImMBoundary im_m_boundary(const OperatorSpec& spec, double x,
                          const std::vector<double>& y_ladder = default_y_ladder(),
                          const ImMOptions& options = {});

struct JLConstants {
  double b = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;
};

/// Constants of the two-sided bound for a given D_0, Frobenius convention:
/// b = -(2||D_0||/||D_0^{-1}|| + 9||D_0||^2), k1 = -1/(b ||D_0^{-1}||),
/// k2 = -2 l b ||D_0^{-1}|| / s_l[D_0^2]. `kind` picks the norm of D_0^{-1}.
JLConstants jl_constants(const Block& d0, NormKind kind = NormKind::frobenius);

struct JLBoundReport {
  double x = 0.0;
  double y = 0.0;
  double L = 0.0;
  double psi_norm = 0.0;        // ||psi||_L
  double phi_norm = 0.0;        // ||phi||_L
  double phi_smallest = 0.0;    // s_l[phi]_L
  double ratio = 0.0;           // ||psi||_L / ||phi||_L
  double condition_term = 0.0;  // ||phi||_L^2 / s_l[phi]_L^2
  double k1 = 0.0;
  double k2 = 0.0;
  double m_norm = 0.0;          // ||M(x+iy)||_F
  double m_operator_norm = 0.0;
  double lower = 0.0;           // k1 * ratio
  double upper = 0.0;           // k2 * ratio * condition_term
  bool condition_overflow = false;
  std::optional<bool> verdict;  // empty when the condition term degenerates
};

inline constexpr double kJLSlack = 1e-9;

JLBoundReport jl_bounds(const OperatorSpec& spec, double x, double y, double tol = 1e-10,
                        const LSolveOptions& l_options = {});

}  // namespace mjacobi
