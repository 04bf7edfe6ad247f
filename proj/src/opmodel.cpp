#include "mjacobi/opmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace mjacobi {

namespace {

std::int64_t positive_mod(std::int64_t n, std::int64_t p) {
  const std::int64_t r = n % p;
  return r < 0 ? r + p : r;
}

double frac(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f = 0.0;  // x slightly below an integer can round up
  return f;
}

void require_blocks(const std::vector<Block>& d, const std::vector<Block>& v, const char* what) {
  if (d.empty() || d.size() != v.size()) {
    throw Error(ErrorKind::invalid_input,
                std::string(what) + ": need equally many (nonzero) D and V blocks");
  }
  const int dim = d.front().dim();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i].dim() != dim || v[i].dim() != dim) {
      throw Error(ErrorKind::invalid_input, std::string(what) + ": inconsistent block sizes");
    }
  }
}

}  // namespace

double torus_add(double a, double b) { return frac(frac(a) + frac(b)); }

SamplingMap::SamplingMap(Variant map) : map_(std::move(map)) {
  if (auto* pw = std::get_if<PiecewiseMap>(&map_)) {
    if (pw->breakpoints.empty() || pw->breakpoints.size() != pw->values.size()) {
      throw Error(ErrorKind::invalid_input, "piecewise map: one value per arc required");
    }
    if (pw->breakpoints.front() != 0.0) {
      throw Error(ErrorKind::invalid_input, "piecewise map: first breakpoint must be 0");
    }
    for (std::size_t i = 1; i < pw->breakpoints.size(); ++i) {
      if (!(pw->breakpoints[i] > pw->breakpoints[i - 1]) || pw->breakpoints[i] >= 1.0) {
        throw Error(ErrorKind::invalid_input, "piecewise map: breakpoints must increase in [0, 1)");
      }
    }
  }
}

int SamplingMap::dim() const {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantMap>) return m.value.dim();
        else if constexpr (std::is_same_v<T, CosineMap>) return m.base.dim();
        else return m.values.front().dim();
      },
      map_);
}

Block SamplingMap::operator()(std::span<const double> theta) const {
  return std::visit(
      [&](const auto& m) -> Block {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantMap>) {
          return m.value;
        } else if constexpr (std::is_same_v<T, CosineMap>) {
          Block out = m.base;
          for (const auto& term : m.terms) {
            double arg = 0.0;
            for (std::size_t i = 0; i < term.frequency.size() && i < theta.size(); ++i) {
              arg += term.frequency[i] * theta[i];
            }
            out += term.amplitude * cplx(std::cos(2.0 * std::numbers::pi * arg + term.phase));
          }
          return out;
        } else {
          const double t = theta[static_cast<std::size_t>(m.coordinate)];
          const auto it = std::upper_bound(m.breakpoints.begin(), m.breakpoints.end(), t);
          const auto idx = static_cast<std::size_t>(std::distance(m.breakpoints.begin(), it)) - 1;
          return m.values[idx];
        }
      },
      map_);
}

std::vector<double> DynamicalSystem::orbit_point(std::int64_t n) const {
  std::vector<double> out(rotation.size());
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < rotation.size(); ++i) {
    // n * alpha split exactly into hi + lo so that long orbits do not drift.
    const double hi = dn * rotation[i];
    const double lo = std::fma(dn, rotation[i], -hi);
    out[i] = frac(frac(hi) + phase[i] + lo);
  }
  return out;
}

DynamicalSystem DynamicalSystem::shifted(std::int64_t m) const {
  DynamicalSystem out = *this;
  out.phase = orbit_point(m);
  return out;
}

std::optional<Rational> detect_rational(double value, int depth) {
  const double x0 = value;
  double x = value;
  // Convergents h/k.
  std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
  std::int64_t k_prev = 0, k = 1;
  // A double holds p/q to about one ulp; an irrational value only gets that
  // close at denominators far beyond any period we would simulate.
  constexpr std::int64_t max_q = 1000000;
  const double tol = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x0));
  for (int i = 0; i < depth && k <= max_q; ++i) {
    if (std::abs(x0 - static_cast<double>(h) / static_cast<double>(k)) <= tol) {
      return Rational{h, k};
    }
    const double rem = x - std::floor(x);
    if (rem < 1e-15) return Rational{h, k};
    x = 1.0 / rem;
    const auto a = static_cast<std::int64_t>(std::floor(x));
    const std::int64_t h_next = a * h + h_prev;
    const std::int64_t k_next = a * k + k_prev;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
  }
  return std::nullopt;
}

OperatorSpec OperatorSpec::free(int dim) {
  return periodic({Block::identity(dim)}, {Block::zero(dim)});
}

OperatorSpec OperatorSpec::periodic(std::vector<Block> d, std::vector<Block> v) {
  require_blocks(d, v, "periodic model");
  const int dim = d.front().dim();
  return OperatorSpec(dim, PeriodicModel{std::move(d), std::move(v)});
}

OperatorSpec OperatorSpec::explicit_model(std::vector<Block> d, std::vector<Block> v, TailRule tail,
                                          std::optional<LeftExtension> left) {
  require_blocks(d, v, "explicit model");
  const int dim = d.front().dim();
  if (left) {
    require_blocks(left->d, left->v, "explicit model left extension");
    if (left->d.front().dim() != dim) {
      throw Error(ErrorKind::invalid_input, "explicit model: left extension block size mismatch");
    }
  }
  return OperatorSpec(dim, ExplicitModel{std::move(d), std::move(v), tail, std::move(left)});
}

OperatorSpec OperatorSpec::dynamical(DynamicalSystem system) {
  if (system.rotation.empty() || system.rotation.size() != system.phase.size()) {
    throw Error(ErrorKind::invalid_input, "dynamical model: rotation and phase must share dimension");
  }
  for (auto& w : system.phase) w = frac(w);
  const int dim = system.d_map.dim();
  if (system.v_map.dim() != dim) {
    throw Error(ErrorKind::invalid_input, "dynamical model: D and V maps disagree on block size");
  }
  return OperatorSpec(dim, DynamicalModel{std::move(system)});
}

OperatorSpec OperatorSpec::reflected() const {
  return OperatorSpec(dim_, ReflectedModel{std::make_shared<const OperatorSpec>(*this)});
}

Coefficients OperatorSpec::coefficient_at(std::int64_t n) const {
  return std::visit(
      [&](const auto& m) -> Coefficients {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PeriodicModel>) {
          const auto i = static_cast<std::size_t>(positive_mod(n, static_cast<std::int64_t>(m.d.size())));
          return {m.d[i], m.v[i]};
        } else if constexpr (std::is_same_v<T, ExplicitModel>) {
          const auto size = static_cast<std::int64_t>(m.d.size());
          if (n >= 0) {
            if (n < size) return {m.d[static_cast<std::size_t>(n)], m.v[static_cast<std::size_t>(n)]};
            if (m.tail == TailRule::periodic_wrap) {
              const auto i = static_cast<std::size_t>(n % size);
              return {m.d[i], m.v[i]};
            }
            return {m.d.back(), m.v.back()};
          }
          if (!m.left) {
            if (m.tail == TailRule::periodic_wrap) {
              const auto i = static_cast<std::size_t>(positive_mod(n, size));
              return {m.d[i], m.v[i]};
            }
            std::ostringstream os;
            os << "explicit model has no left extension; index " << n;
            throw Error(ErrorKind::index_range, os.str());
          }
          const auto lsize = static_cast<std::int64_t>(m.left->d.size());
          std::int64_t idx = -n - 1;
          if (idx >= lsize) idx = m.tail == TailRule::periodic_wrap ? idx % lsize : lsize - 1;
          return {m.left->d[static_cast<std::size_t>(idx)], m.left->v[static_cast<std::size_t>(idx)]};
        } else if constexpr (std::is_same_v<T, DynamicalModel>) {
          const auto theta = m.system.orbit_point(n);
          return {m.system.d_map(theta), m.system.v_map(theta)};
        } else {
          return {m.base->coefficient_at(-n - 1).d, m.base->coefficient_at(-n).v};
        }
      },
      kind_);
}

std::optional<std::int64_t> OperatorSpec::period() const {
  return std::visit(
      [&](const auto& m) -> std::optional<std::int64_t> {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PeriodicModel>) {
          return static_cast<std::int64_t>(m.d.size());
        } else if constexpr (std::is_same_v<T, ExplicitModel>) {
          if (m.tail == TailRule::periodic_wrap && !m.left) return static_cast<std::int64_t>(m.d.size());
          if (m.tail == TailRule::constant && m.d.size() == 1 && (!m.left || (m.left->d.size() == 1 &&
              m.left->d.front() == m.d.front() && m.left->v.front() == m.v.front()))) {
            return 1;
          }
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, DynamicalModel>) {
          std::int64_t q = 1;
          for (double a : m.system.rotation) {
            const auto r = detect_rational(a);
            if (!r) return std::nullopt;
            q = std::lcm(q, r->q);
          }
          return q;
        } else {
          return m.base->period();
        }
      },
      kind_);
}

OperatorSpec diagonal_model(std::span<const double> potential) {
  const int dim = static_cast<int>(potential.size());
  return OperatorSpec::periodic({Block::identity(dim)}, {Block::diagonal(potential)});
}

OperatorSpec random_periodic_model(int dim, int period, std::uint64_t seed, double d_spread,
                                   double v_spread) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto symmetric = [&](double spread) {
    Block s(dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        const double x = spread * unit(rng);
        s(i, j) = x;
        s(j, i) = x;
      }
    }
    return s;
  };
  std::vector<Block> d, v;
  for (int n = 0; n < period; ++n) {
    d.push_back(Block::identity(dim) + symmetric(d_spread));
    v.push_back(symmetric(v_spread));
  }
  return OperatorSpec::periodic(std::move(d), std::move(v));
}

ValidationReport validate(const OperatorSpec& spec, std::int64_t window) {
  if (window < 1) throw Error(ErrorKind::invalid_input, "validate: window must be >= 1");
  ValidationReport report;
  report.window = window;
  report.min_smallest_singular = INFINITY;
  for (std::int64_t n = 0; n <= window; ++n) {
    const Coefficients c = spec.coefficient_at(n);
    bool bad = false;
    if (!c.d.is_finite() || !c.v.is_finite()) {
      report.offending.push_back(n);
      continue;
    }
    const SingularSpectrum s = singular_values(c.d);
    report.min_smallest_singular = std::min(report.min_smallest_singular, s.smallest());
    report.max_largest_singular = std::max(report.max_largest_singular, s.largest());
    const double defect = std::max(symmetry_defect(c.d), symmetry_defect(c.v));
    const double imag = std::max(c.d.imag_part().max_abs(), c.v.imag_part().max_abs());
    report.max_symmetry_defect = std::max(report.max_symmetry_defect, defect);
    if (s.smallest() < kMinSmallestSingular) bad = true;
    if (defect > kMaxSymmetryDefect || imag > kMaxSymmetryDefect) bad = true;
    if (bad) report.offending.push_back(n);
  }
  return report;
}

ValidationReport require_valid(const OperatorSpec& spec, std::int64_t window) {
  ValidationReport report = validate(spec, window);
  if (!report.passed()) {
    std::ostringstream os;
    os << "model validation failed at n =";
    const std::size_t shown = std::min<std::size_t>(report.offending.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) os << ' ' << report.offending[i];
    if (shown < report.offending.size()) os << " ... (" << report.offending.size() << " total)";
    os << "; min s_l[D] = " << report.min_smallest_singular
       << ", max symmetry defect = " << report.max_symmetry_defect;
    throw Error(ErrorKind::validation, os.str());
  }
  return report;
}

LimitPointCheck limit_point_partial_sum(const OperatorSpec& spec, std::int64_t window,
                                        double coefficient_bound) {
  if (window < 1) throw Error(ErrorKind::invalid_input, "limit_point_partial_sum: window must be >= 1");
  LimitPointCheck out;
  for (std::int64_t k = 0; k <= window; ++k) {
    const double s1 = operator_norm(spec.coefficient_at(k).d);
    out.partial_sum += 1.0 / s1;
    out.max_largest_singular = std::max(out.max_largest_singular, s1);
  }
  out.verdict = out.max_largest_singular <= coefficient_bound
                    ? LimitPointVerdict::sufficient_condition_met
                    : LimitPointVerdict::inconclusive;
  return out;
}

}  // namespace mjacobi
