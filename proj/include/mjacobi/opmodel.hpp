#pragma once

// Operator families (D_n, V_n), n in Z, for the block Jacobi operator
//   [H u]_n = D_{n-1} u_{n-1} + D_n u_{n+1} + V_n u_n.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mjacobi/matlin.hpp"

namespace mjacobi {

struct Coefficients {
  Block d;
  Block v;
};

// ---- sampling maps: torus point -> real symmetric block -------------------

struct ConstantMap {
  Block value;
};

/// amplitude * cos(2 pi <frequency, theta> + phase)
struct CosineTerm {
  std::vector<int> frequency;
  Block amplitude;
  double phase = 0.0;
};

struct CosineMap {
  Block base;
  std::vector<CosineTerm> terms;
};

/// values[i] on the arc [breakpoints[i], breakpoints[i+1]) of one torus
/// coordinate; breakpoints start at 0 and are strictly increasing in [0, 1).
struct PiecewiseMap {
  int coordinate = 0;
  std::vector<double> breakpoints;
  std::vector<Block> values;
};

class SamplingMap {
 public:
  using Variant = std::variant<ConstantMap, CosineMap, PiecewiseMap>;

  SamplingMap(Variant map);  // NOLINT(google-explicit-constructor)

  Block operator()(std::span<const double> theta) const;
  int dim() const;
  const Variant& variant() const noexcept { return map_; }

 private:
  Variant map_;
};

/// Torus rotation T(w) = w + alpha mod 1 with sampling maps for D and V.
struct DynamicalSystem {
  std::vector<double> rotation;
  std::vector<double> phase;
  SamplingMap d_map;
  SamplingMap v_map;

  std::size_t torus_dim() const noexcept { return rotation.size(); }
  /// T^n(phase), reduced componentwise into [0, 1).
  std::vector<double> orbit_point(std::int64_t n) const;
  /// Same system started from T^m(phase).
  DynamicalSystem shifted(std::int64_t m) const;
};

/// Reduces a + b into [0, 1).
double torus_add(double a, double b);

struct Rational {
  std::int64_t p;
  std::int64_t q;
};

/// Continued-fraction test: returns p/q when `value` is a rational with a
/// short expansion (terminates within `depth` partial quotients), otherwise
/// nothing. This is a heuristic for floats; it cannot certify irrationality.
std::optional<Rational> detect_rational(double value, int depth = 20);

// ---- operator specs -------------------------------------------------------

struct PeriodicModel {
  std::vector<Block> d;
  std::vector<Block> v;
};

enum class TailRule { periodic_wrap, constant };

/// Blocks for n = -1, -2, ... (index 0 is n = -1).
struct LeftExtension {
  std::vector<Block> d;
  std::vector<Block> v;
};

struct ExplicitModel {
  std::vector<Block> d;
  std::vector<Block> v;
  TailRule tail = TailRule::constant;
  std::optional<LeftExtension> left;
};

struct DynamicalModel {
  DynamicalSystem system;
};

class OperatorSpec;

/// Left half-line viewed from the right: D~_n = D_{-n-1}, V~_n = V_{-n}.
struct ReflectedModel {
  std::shared_ptr<const OperatorSpec> base;
};

class OperatorSpec {
 public:
  using Kind = std::variant<ExplicitModel, PeriodicModel, DynamicalModel, ReflectedModel>;

  static OperatorSpec free(int dim);
  static OperatorSpec periodic(std::vector<Block> d, std::vector<Block> v);
  static OperatorSpec explicit_model(std::vector<Block> d, std::vector<Block> v, TailRule tail,
                                     std::optional<LeftExtension> left = std::nullopt);
  static OperatorSpec dynamical(DynamicalSystem system);

  /// Operator whose right half-line is this operator's left half-line.
  OperatorSpec reflected() const;

  int dim() const noexcept { return dim_; }
  const Kind& kind() const noexcept { return kind_; }

  Coefficients coefficient_at(std::int64_t n) const;

  /// Period when the coefficient sequence is exactly periodic on Z.
  std::optional<std::int64_t> period() const;

  bool is_dynamical() const { return std::holds_alternative<DynamicalModel>(kind_); }

 private:
  OperatorSpec(int dim, Kind kind) : dim_(dim), kind_(std::move(kind)) {}

  int dim_;
  Kind kind_;
};

inline Coefficients coefficient_at(const OperatorSpec& spec, std::int64_t n) {
  return spec.coefficient_at(n);
}

/// D = I, V = diag(potential) for every n.
OperatorSpec diagonal_model(std::span<const double> potential);

/// Period-`period` model with D_n = I + d_spread * S (S symmetric, entries in
/// [-1, 1]) and V_n symmetric with entries in [-v_spread, v_spread].
/// d_spread < 1/l keeps every D_n invertible with s_l >= 1 - l*d_spread.
OperatorSpec random_periodic_model(int dim, int period, std::uint64_t seed,
                                   double d_spread = 0.2, double v_spread = 0.5);

struct ValidationReport {
  std::int64_t window = 0;
  double min_smallest_singular = 0.0;  // min_n s_l[D_n]
  double max_largest_singular = 0.0;   // max_n s_1[D_n]
  double max_symmetry_defect = 0.0;    // over D_n and V_n
  std::vector<std::int64_t> offending;
  bool passed() const { return offending.empty(); }
};

inline constexpr double kMinSmallestSingular = 1e-12;
inline constexpr double kMaxSymmetryDefect = 1e-10;

/// Scans n = 0..window.
ValidationReport validate(const OperatorSpec& spec, std::int64_t window);

/// As `validate`, but throws a validation error listing offending indices.
ValidationReport require_valid(const OperatorSpec& spec, std::int64_t window);

enum class LimitPointVerdict { sufficient_condition_met, inconclusive };

struct LimitPointCheck {
  double partial_sum = 0.0;  // sum_{k=0}^{N} 1 / s_1[D_k]
  double max_largest_singular = 0.0;
  LimitPointVerdict verdict = LimitPointVerdict::inconclusive;
};

inline constexpr double kUniformBound = 1e8;

/// Bounded s_1[D_k] over the window (<= coefficient_bound) forces the series
/// sum 1/||D_k|| to diverge, which is sufficient for the limit point case.
LimitPointCheck limit_point_partial_sum(const OperatorSpec& spec, std::int64_t window,
                                        double coefficient_bound = kUniformBound);

}  // namespace mjacobi
