#pragma once

// Solutions of the block eigenvalue equation
//   D_{n-1} u_{n-1} + D_n u_{n+1} + V_n u_n = z u_n,
// the one-step transfer matrices acting on (u_n, D_{n-1} u_{n-1}), and the
// Wronskian / Green-formula identities tying solutions together.

#include <cstdint>
#include <utility>
#include <vector>

#include "mjacobi/matlin.hpp"
#include "mjacobi/opmodel.hpp"

namespace mjacobi {

/// Blocks whose Frobenius norm exceeds this are rescaled by a power of two.
inline constexpr double kRescaleThreshold = 1e100;

/// A sequence of blocks u_0..u_N at a fixed energy. Each block is stored as
/// a mantissa and a binary exponent (true value = mantissa * 2^exponent), so
/// exponentially growing solutions stay representable.
class SolutionTrack {
 public:
  SolutionTrack(cplx energy, int dim) : energy_(energy), dim_(dim) {}

  /// Wraps an arbitrary block sequence (exponents zero).
  static SolutionTrack from_blocks(cplx energy, std::vector<Block> blocks);

  void push_back(Block mantissa, int exponent);

  cplx energy() const noexcept { return energy_; }
  int dim() const noexcept { return dim_; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(mantissas_.size()); }
  std::int64_t last_index() const noexcept { return size() - 1; }

  const Block& mantissa(std::int64_t n) const;
  int exponent(std::int64_t n) const;
  const SingularSpectrum& mantissa_singular(std::int64_t n) const;

  /// True-scale block; throws overflow if not representable as doubles.
  Block block(std::int64_t n) const;
  double frobenius(std::int64_t n) const;
  /// True-scale k-th singular value (1-based); may be +inf when huge.
  double singular_value(std::int64_t n, int k) const;
  /// Natural log of the true Frobenius norm (-inf for a zero block).
  double log_frobenius(std::int64_t n) const;

  bool rescaled() const noexcept { return rescaled_; }

 private:
  void check_index(std::int64_t n) const;

  cplx energy_;
  int dim_;
  std::vector<Block> mantissas_;
  std::vector<int> exponents_;
  std::vector<SingularSpectrum> spectra_;
  bool rescaled_ = false;
};

/// Coefficient access with per-residue caching of D_n^{-1} for periodic
/// models; dynamical models are evaluated on demand.
class CoefficientStream {
 public:
  explicit CoefficientStream(const OperatorSpec& spec);

  struct Entry {
    Block d;
    Block d_inverse;
    Block v;
  };

  Entry at(std::int64_t n) const;
  const OperatorSpec& spec() const noexcept { return *spec_; }

 private:
  const OperatorSpec* spec_;
  std::vector<Entry> cache_;  // one period, when periodic and short
};

/// Forward propagation u_{n+1} = D_n^{-1}((z - V_n) u_n - D_{n-1} u_{n-1})
/// with the overflow ledger: the working pair shares one binary exponent.
class Recurrence {
 public:
  Recurrence(const OperatorSpec& spec, cplx z, Block u0, Block u1);

  /// Advances from (u_{n-1}, u_n) to (u_n, u_{n+1}).
  void step();

  std::int64_t index() const noexcept { return n_; }
  const Block& previous() const noexcept { return prev_; }
  const Block& current() const noexcept { return cur_; }
  int exponent() const noexcept { return exponent_; }
  cplx energy() const noexcept { return z_; }

 private:
  CoefficientStream coeffs_;
  cplx z_;
  std::int64_t n_ = 1;
  Block prev_;
  Block cur_;
  Block d_prev_;  // D_{n-1}
  int exponent_ = 0;
};

/// Dirichlet (phi_0 = 0, phi_1 = I) and Neumann (psi_0 = I, psi_1 = 0)
/// solutions at z, indices 0..n_max.
std::pair<SolutionTrack, SolutionTrack> dirichlet_neumann(const OperatorSpec& spec, cplx z,
                                                          std::int64_t n_max);

/// Solution with arbitrary initial blocks u_0, u_1, indices 0..n_max.
SolutionTrack propagate(const OperatorSpec& spec, cplx z, const Block& u0, const Block& u1,
                        std::int64_t n_max);

/// 2l x 2l matrix in 2x2 block form [[a, b], [c, d]].
struct TransferMatrix {
  Block a, b, c, d;

  static TransferMatrix identity(int dim);
  int dim() const noexcept { return a.dim(); }
  double frobenius() const;
  TransferMatrix operator*(const TransferMatrix& rhs) const;
  TransferMatrix scaled(double factor) const;
  /// Applies to the stacked pair (top; bottom).
  std::pair<Block, Block> apply(const Block& top, const Block& bottom) const;
  TransferMatrix transpose() const;
};

/// alpha_n(z) = [[D_n^{-1}(z - V_n), -D_n^{-1}], [D_n, 0]], mapping
/// (u_n, D_{n-1} u_{n-1}) to (u_{n+1}, D_n u_n). `d_prev` only fixes the
/// dimension check; it enters through the lifted vector (see `lift`).
TransferMatrix transfer_step(const Block& d_n, const Block& d_prev, const Block& v_n, cplx z);

/// (u_n, D_{n-1} u_{n-1}).
std::pair<Block, Block> lift(const Block& u_n, const Block& u_prev, const Block& d_prev);

struct CocycleProduct {
  TransferMatrix matrix;
  int exponent = 0;  // true product = matrix * 2^exponent
};

/// A_0 = A_1 = I and A_n = alpha_{n-1} ... alpha_1 for n >= 2, so that
/// A_n (u_1, D_0 u_0) = (u_n, D_{n-1} u_{n-1}).
CocycleProduct cocycle_product(const OperatorSpec& spec, cplx z, std::int64_t n);

/// W_[A,B](n) = A_{n-1}^t D_{n-1} B_n - A_n^t D_{n-1} B_{n-1} (true scale).
Block wronskian(const SolutionTrack& a, const SolutionTrack& b, std::int64_t n,
                const OperatorSpec& spec);

/// || sum_{k=m}^{n} (A_k^t H(B)_k - H(A)_k^t B_k) - W(n+1) + W(m) ||_F, where
/// H acts on the stored sequences directly. Requires 1 <= m < n and both
/// tracks covering index n + 1.
double green_formula_residual(const SolutionTrack& a, const SolutionTrack& b, std::int64_t m,
                              std::int64_t n, const OperatorSpec& spec);

/// F_n = psi_n - phi_n M D_0 over the common index range of the tracks.
SolutionTrack jost_assemble(const SolutionTrack& phi, const SolutionTrack& psi, const Block& m,
                            const Block& d0);

/// Max over 1 <= n <= n_max of the relative Frobenius residual of
///   F_n = psi_n - phi_n M D_0 - i y psi_n sum_k D_0^{-1} phi_k^t F_k
///                               + i y phi_n sum_k D_0^{-1} psi_k^t F_k
/// with phi, psi at real x and F, M at x + i y. Partial sums are compensated.
double jl_identity_residual(const SolutionTrack& phi, const SolutionTrack& psi,
                            const SolutionTrack& jost, const Block& m, const Block& d0, double y,
                            std::int64_t n_max);

}  // namespace mjacobi
