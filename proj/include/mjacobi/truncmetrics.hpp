#pragma once

// Truncated norms ||B||_L and truncated singular values s_k[B]_L of block
// sequences (indices 1..floor(L), fractional last term), and the solver for
// the cutoff L(y) defined by 2 y ||D_0^{-1}|| ||psi||_L ||phi||_L = 1.

#include <cstdint>

#include "mjacobi/cocycle.hpp"

namespace mjacobi {

enum class NormKind { frobenius, operator_norm };

double block_norm(const Block& a, NormKind kind);

/// sqrt(sum_{n=1}^{floor L} ||B_n||_F^2 + (L - floor L) ||B_{floor L + 1}||_F^2).
/// Needs index floor(L) + 1 only when L is not an integer.
double truncated_norm(const SolutionTrack& track, double L);

/// Same with s_k[B_n] in place of ||B_n||_F, k in 1..l.
double truncated_singular(const SolutionTrack& track, int k, double L);

inline constexpr std::int64_t kMaxTrackLength = std::int64_t{1} << 24;

struct LSolveOptions {
  NormKind d0_norm = NormKind::frobenius;
  std::int64_t max_length = kMaxTrackLength;
};

struct LSolution {
  double L = 1.0;
  double f = 0.0;          // 2 ||psi||_L ||phi||_L
  double target = 0.0;     // 1 / (y ||D_0^{-1}||)
  double residual = 0.0;   // |2 y ||D_0^{-1}|| ||psi||_L ||phi||_L - 1|
  double d0_inverse_norm = 0.0;
  SolutionTrack phi{0.0, 1};  // at x, covering floor(L) + 1
  SolutionTrack psi{0.0, 1};
};

/// Extends the Dirichlet/Neumann tracks at real x (at most max_length
/// blocks) until the integer-L value of f crosses the target, then solves the
/// quadratic in the fractional part. Since psi_1 = 0, f(1) = 0 and L > 1.
/// Throws track_too_short when the target is not reached, with the attained f
/// in the message.
LSolution solve_L_of_y(const OperatorSpec& spec, double x, double y,
                       const LSolveOptions& options = {});

}  // namespace mjacobi
