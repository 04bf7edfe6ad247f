#pragma once

// Dense l x l complex blocks: the scalar type of every coefficient, solution
// and M-function in the library. Blocks are small (l <= ~8), so everything
// here is written for clarity at that size rather than for asymptotics.

#include <complex>
#include <initializer_list>
#include <span>
#include <vector>

#include "mjacobi/error.hpp"

namespace mjacobi {

using cplx = std::complex<double>;

/// Absolute eigenvalue tolerance used to accept a Hermitian matrix as PSD.
inline constexpr double kPsdTolerance = 1e-10;
/// Relative singular-value floor below which `invert` refuses a block.
inline constexpr double kSingularRatio = 1e-12;

class Block {
 public:
  Block() : Block(1) {}
  explicit Block(int dim);

  static Block zero(int dim) { return Block(dim); }
  static Block identity(int dim);
  static Block scalar(int dim, cplx value);
  static Block diagonal(std::span<const double> entries);
  static Block diagonal(std::initializer_list<double> entries);
  static Block from_rows(std::initializer_list<std::initializer_list<cplx>> rows);

  int dim() const noexcept { return dim_; }

  cplx& operator()(int row, int col) { return a_[row * dim_ + col]; }
  const cplx& operator()(int row, int col) const { return a_[row * dim_ + col]; }

  std::span<cplx> data() noexcept { return a_; }
  std::span<const cplx> data() const noexcept { return a_; }

  Block& operator+=(const Block& other);
  Block& operator-=(const Block& other);
  Block& operator*=(cplx factor);

  Block transpose() const;
  Block adjoint() const;
  Block conj() const;
  /// Entrywise real / imaginary parts (returned as complex blocks with zero imaginary part).
  Block real_part() const;
  Block imag_part() const;

  bool is_finite() const;
  double max_abs() const;

  friend bool operator==(const Block&, const Block&) = default;

 private:
  int dim_;
  std::vector<cplx> a_;
};

Block operator+(Block lhs, const Block& rhs);
Block operator-(Block lhs, const Block& rhs);
Block operator-(Block value);
Block operator*(const Block& lhs, const Block& rhs);
Block operator*(cplx factor, Block value);
Block operator*(Block value, cplx factor);

/// s_1 >= s_2 >= ... >= s_l >= 0.
class SingularSpectrum {
 public:
  SingularSpectrum() = default;
  explicit SingularSpectrum(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  /// 1-based access, matching s_k in the usual notation.
  double s(int k) const { return values_.at(static_cast<std::size_t>(k - 1)); }
  double operator[](std::size_t i) const { return values_[i]; }
  double largest() const { return values_.front(); }
  double smallest() const { return values_.back(); }
  std::span<const double> values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

struct HermitianEigen {
  std::vector<double> values;  // descending
  Block vectors;               // column j pairs with values[j]
};

/// Singular values via one-sided (Hestenes) cyclic Jacobi sweeps on the
/// columns of A; this diagonalizes A*A implicitly, so small singular values
/// keep their relative accuracy. Ties keep column order.
SingularSpectrum singular_values(const Block& a);

double frobenius_norm(const Block& a);
double operator_norm(const Block& a);

/// Cyclic Jacobi eigendecomposition of a Hermitian block. Only the Hermitian
/// part of the input is used.
HermitianEigen hermitian_eigen(const Block& a);

/// Principal square root of a Hermitian PSD block.
Block psd_sqrt(const Block& a, double tolerance = kPsdTolerance);

/// Checked inverse: throws singular_block when s_l <= 1e-12 s_1.
Block invert(const Block& a);

/// LU inverse with partial pivoting; guards only against exactly or nearly
/// vanishing pivots. Used on hot paths where the blocks were validated.
Block lu_inverse(const Block& a);

/// Returns A^{-1} B via LU with partial pivoting.
Block lu_solve(const Block& a, const Block& b);

double symmetry_defect(const Block& a);
double hermitian_defect(const Block& a);

/// (M - M*) / 2i, the Hermitian imaginary part; for symmetric M this is the
/// entrywise imaginary part.
Block hermitian_imag(const Block& m);

}  // namespace mjacobi
