#pragma once

// Multiplicity of the absolutely continuous spectrum on an energy grid:
// Cesaro means of squared singular values of the Dirichlet/Neumann solutions,
// the rank of the boundary value of Im M, and for periodic models the
// Floquet count of unimodular monodromy eigenvalues as an independent oracle.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mjacobi/cocycle.hpp"
#include "mjacobi/weylm.hpp"

namespace mjacobi {

/// {2^lo, ..., 2^hi}.
std::vector<std::int64_t> dyadic_grid(int lo, int hi);

struct CesaroProfile {
  double x = 0.0;
  int dim = 0;
  std::vector<std::int64_t> L;
  /// log_c[r-1][i] = log C_r(L[i]) with
  /// C_r(L) = (1/L) sum_{n=1}^{L} s_{l-r+1}[phi_n]^2 + s_{l-r+1}[psi_n]^2.
  std::vector<std::vector<double>> log_c;
  std::vector<double> slope;      // least squares of log C_r against log L
  std::vector<double> intercept;
  std::vector<bool> overflow;     // C_r beyond double range at some grid point
};

CesaroProfile cesaro_profile(const OperatorSpec& spec, double x,
                             const std::vector<std::int64_t>& L_grid = dyadic_grid(8, 16));

struct CesaroClass {
  int r = 0;
  bool low_confidence = false;  // some slope in [threshold, 2 threshold)
};

inline constexpr double kSlopeThreshold = 0.2;

/// Largest r whose C_r has slope below the threshold and no overflow.
CesaroClass classify_multiplicity(const CesaroProfile& profile,
                                  double slope_threshold = kSlopeThreshold);

/// Product of the transfer matrices alpha_p ... alpha_1 over one period.
TransferMatrix monodromy(const OperatorSpec& spec, cplx z);

struct FloquetResult {
  int r = 0;
  int unit_count = 0;           // eigenvalues with ||lambda| - 1| < eps
  bool band_edge = false;       // odd count
  std::vector<double> moduli;   // ascending
};

inline constexpr double kFloquetEps = 1e-6;

FloquetResult floquet_multiplicity(const OperatorSpec& spec, double x, double eps = kFloquetEps);

/// Energies in [lo, hi] where the Floquet count changes, located by a
/// uniform scan of `samples` points and bisection.
std::vector<double> floquet_band_edges(const OperatorSpec& spec, double lo, double hi,
                                       int samples = 4096, double eps = kFloquetEps);

double distance_to_edges(const std::vector<double>& edges, double x);

struct ScanParams {
  int l_min_exponent = 8;
  int l_max_exponent = 16;
  double slope_threshold = kSlopeThreshold;
  bool with_rank = true;
  std::vector<double> y_ladder = default_y_ladder();
  ImMOptions im_options;
  bool with_floquet = true;  // used only for periodic models
  double floquet_eps = kFloquetEps;
  double edge_radius = 0.05;
  int threads = 1;
};

struct ScanRecord {
  double x = 0.0;
  int dim = 0;
  std::optional<int> r_ces;
  bool low_confidence = false;
  std::vector<double> slopes;   // per r
  std::vector<bool> overflow;   // per r
  std::optional<int> r_rank;
  std::optional<double> trace_growth;
  bool rank_attempted = false;
  std::optional<int> r_flo;
  bool band_edge = false;
  bool near_edge = false;
  std::string error;            // first per-point failure, if any

  /// '|'-joined tags in a fixed order; empty when nothing to report.
  std::vector<std::string> flags() const;
};

/// One record per grid point, in grid order. Per-point failures are stored in
/// the record; the scan itself only throws for invalid parameters.
std::vector<ScanRecord> scan_energy_grid(const OperatorSpec& spec, const std::vector<double>& xs,
                                         const ScanParams& params = {});

enum class EdgeSource { none, floquet, approximant };

struct ConstancyParams {
  ScanParams scan;                 // Cesaro settings, threads, edge radius
  EdgeSource edges = EdgeSource::approximant;
  std::int64_t max_denominator = 64;  // approximant period bound
};

struct PhaseClassification {
  std::vector<double> phase;
  std::vector<std::optional<int>> r_plus;   // right half-line
  std::vector<std::optional<int>> r_minus;  // left half-line (reflected)
  std::vector<bool> low_confidence;
  /// r_plus + r_minus where both are determinate.
  std::vector<std::optional<int>> full;
};

struct PhaseComparison {
  std::size_t phase_a = 0;
  std::size_t phase_b = 0;
  int compared = 0;       // determinate, not edge-excluded
  int agree = 0;
  int indeterminate = 0;
  int edge_excluded = 0;
  double agreement = 0.0;  // agree / compared (1 when nothing compared)
  /// |E_2k(a) symmetric-difference E_2k(b)| / compared for k = 1..l.
  std::vector<double> symmetric_difference;
};

struct ConstancyReport {
  std::vector<double> x;
  std::vector<PhaseClassification> phases;
  std::vector<double> edges;
  std::vector<bool> near_edge;
  EdgeSource edge_source = EdgeSource::none;
  std::vector<PhaseComparison> comparisons;  // first phase against each other
};

/// Classifies the full-line operator at each phase by r+ + r- from the two
/// half-line Cesaro profiles and compares the even-multiplicity sets.
ConstancyReport constancy_experiment(const OperatorSpec& spec,
                                     const std::vector<std::vector<double>>& phases,
                                     const std::vector<double>& xs,
                                     const ConstancyParams& params = {});

}  // namespace mjacobi
