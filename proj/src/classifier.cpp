#include "mjacobi/classifier.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cfloat>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace mjacobi {

namespace {

// Running sum of nonnegative terms m * 2^e kept as mantissa and exponent.
class ScaledSum {
 public:
  void add(double mantissa, int exponent) {
    if (mantissa == 0.0) return;
    int te = 0;
    const double tm = std::frexp(mantissa, &te);
    te += exponent;
    if (m_ == 0.0) {
      m_ = tm;
      e_ = te;
      return;
    }
    if (te > e_) {
      m_ = tm + std::ldexp(m_, e_ - te);
      e_ = te;
    } else {
      m_ += std::ldexp(tm, te - e_);
    }
    int shift = 0;
    m_ = std::frexp(m_, &shift);
    e_ += shift;
  }

  double log() const {
    if (m_ == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(m_) + e_ * std::log(2.0);
  }

 private:
  double m_ = 0.0;
  int e_ = 0;
};

void least_squares(const std::vector<double>& u, const std::vector<double>& v, double& slope,
                   double& intercept) {
  const double k = static_cast<double>(u.size());
  double su = 0.0, sv = 0.0, suu = 0.0, suv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    su += u[i];
    sv += v[i];
    suu += u[i] * u[i];
    suv += u[i] * v[i];
  }
  const double den = k * suu - su * su;
  slope = den > 0.0 ? (k * suv - su * sv) / den : 0.0;
  intercept = (sv - slope * su) / k;
}

std::int64_t require_period(const OperatorSpec& spec) {
  const auto p = spec.period();
  if (!p) throw Error(ErrorKind::invalid_input, "Floquet analysis needs a periodic model");
  return *p;
}

// Last continued-fraction convergent of value in [0, 1) with denominator <= q_max.
Rational best_convergent(double value, std::int64_t q_max) {
  double x = value;
  std::int64_t h_prev = 1, h = static_cast<std::int64_t>(std::floor(x));
  std::int64_t k_prev = 0, k = 1;
  for (int i = 0; i < 64; ++i) {
    const double rem = x - std::floor(x);
    if (rem < 1e-15) break;
    x = 1.0 / rem;
    const auto a = static_cast<std::int64_t>(std::floor(x));
    const std::int64_t h_next = a * h + h_prev;
    const std::int64_t k_next = a * k + k_prev;
    if (k_next > q_max) break;
    h_prev = h;
    h = h_next;
    k_prev = k;
    k = k_next;
  }
  return {h, k};
}

template <class Fn>
void parallel_for(std::size_t count, int threads, Fn fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace

std::vector<std::int64_t> dyadic_grid(int lo, int hi) {
  if (lo < 0 || hi < lo || hi > 40) throw Error(ErrorKind::invalid_input, "dyadic_grid: bad range");
  std::vector<std::int64_t> out;
  for (int k = lo; k <= hi; ++k) out.push_back(std::int64_t{1} << k);
  return out;
}

CesaroProfile cesaro_profile(const OperatorSpec& spec, double x,
                             const std::vector<std::int64_t>& L_grid) {
  if (L_grid.size() < 2 || L_grid.front() < 1 ||
      !std::is_sorted(L_grid.begin(), L_grid.end()) ||
      std::adjacent_find(L_grid.begin(), L_grid.end()) != L_grid.end()) {
    throw Error(ErrorKind::invalid_input, "cesaro_profile: need >= 2 increasing cutoffs");
  }
  const int l = spec.dim();
  CesaroProfile out;
  out.x = x;
  out.dim = l;
  out.L = L_grid;
  out.log_c.assign(static_cast<std::size_t>(l), {});
  out.overflow.assign(static_cast<std::size_t>(l), false);

  std::vector<ScaledSum> sums(static_cast<std::size_t>(l));
  // n = 1: phi_1 = I, psi_1 = 0
  for (auto& s : sums) s.add(1.0, 0);
  Recurrence phi(spec, x, Block::zero(l), Block::identity(l));
  Recurrence psi(spec, x, Block::identity(l), Block::zero(l));
  std::size_t next = 0;
  const double log_max = std::log(DBL_MAX);
  for (std::int64_t n = 1;; ++n) {
    if (n == L_grid[next]) {
      for (int r = 1; r <= l; ++r) {
        const double v = sums[static_cast<std::size_t>(r - 1)].log() - std::log(static_cast<double>(n));
        out.log_c[static_cast<std::size_t>(r - 1)].push_back(v);
        if (v > log_max) out.overflow[static_cast<std::size_t>(r - 1)] = true;
      }
      if (++next == L_grid.size()) break;
    }
    phi.step();
    psi.step();
    const SingularSpectrum sp = singular_values(phi.current());
    const SingularSpectrum ss = singular_values(psi.current());
    for (int r = 1; r <= l; ++r) {
      const int k = l - r + 1;
      auto& s = sums[static_cast<std::size_t>(r - 1)];
      s.add(sp.s(k) * sp.s(k), 2 * phi.exponent());
      s.add(ss.s(k) * ss.s(k), 2 * psi.exponent());
    }
  }

  std::vector<double> log_l;
  for (auto v : L_grid) log_l.push_back(std::log(static_cast<double>(v)));
  for (int r = 0; r < l; ++r) {
    double slope = 0.0, icpt = 0.0;
    least_squares(log_l, out.log_c[static_cast<std::size_t>(r)], slope, icpt);
    out.slope.push_back(slope);
    out.intercept.push_back(icpt);
  }
  return out;
}

CesaroClass classify_multiplicity(const CesaroProfile& profile, double slope_threshold) {
  if (!(slope_threshold > 0.0)) throw Error(ErrorKind::invalid_input, "slope threshold must be > 0");
  CesaroClass out;
  for (int r = profile.dim; r >= 1; --r) {
    const auto i = static_cast<std::size_t>(r - 1);
    if (profile.slope[i] < slope_threshold && !profile.overflow[i]) {
      out.r = r;
      break;
    }
  }
  for (double s : profile.slope) {
    if (s >= slope_threshold && s < 2.0 * slope_threshold) out.low_confidence = true;
  }
  return out;
}

TransferMatrix monodromy(const OperatorSpec& spec, cplx z) {
  const std::int64_t p = require_period(spec);
  TransferMatrix a = TransferMatrix::identity(spec.dim());
  Block d_prev = spec.coefficient_at(0).d;
  for (std::int64_t n = 1; n <= p; ++n) {
    const Coefficients c = spec.coefficient_at(n);
    a = transfer_step(c.d, d_prev, c.v, z) * a;
    d_prev = c.d;
  }
  return a;
}

FloquetResult floquet_multiplicity(const OperatorSpec& spec, double x, double eps) {
  const TransferMatrix a = monodromy(spec, x);
  const int l = spec.dim();
  Eigen::MatrixXcd m(2 * l, 2 * l);
  for (int i = 0; i < l; ++i) {
    for (int j = 0; j < l; ++j) {
      m(i, j) = a.a(i, j);
      m(i, j + l) = a.b(i, j);
      m(i + l, j) = a.c(i, j);
      m(i + l, j + l) = a.d(i, j);
    }
  }
  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(m, false);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::convergence, "floquet_multiplicity: eigenvalue solver failed");
  }
  FloquetResult out;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double mod = std::abs(solver.eigenvalues()[i]);
    out.moduli.push_back(mod);
    if (std::abs(mod - 1.0) < eps) ++out.unit_count;
  }
  std::sort(out.moduli.begin(), out.moduli.end());
  out.r = out.unit_count / 2;
  out.band_edge = (out.unit_count % 2) != 0;
  return out;
}

std::vector<double> floquet_band_edges(const OperatorSpec& spec, double lo, double hi, int samples,
                                       double eps) {
  if (!(hi > lo) || samples < 2) throw Error(ErrorKind::invalid_input, "floquet_band_edges: bad range");
  auto count = [&](double x) {
    const FloquetResult f = floquet_multiplicity(spec, x, eps);
    return f.band_edge ? -1 : f.r;
  };
  std::vector<double> edges;
  const double h = (hi - lo) / (samples - 1);
  double xa = lo;
  int ca = count(xa);
  for (int i = 1; i < samples; ++i) {
    const double xb = lo + h * i;
    const int cb = count(xb);
    if (cb != ca) {
      double a = xa, b = xb;
      for (int it = 0; it < 60 && b - a > 1e-13; ++it) {
        const double mid = 0.5 * (a + b);
        (count(mid) == ca ? a : b) = mid;
      }
      edges.push_back(0.5 * (a + b));
    }
    xa = xb;
    ca = cb;
  }
  return edges;
}

double distance_to_edges(const std::vector<double>& edges, double x) {
  double d = std::numeric_limits<double>::infinity();
  for (double e : edges) d = std::min(d, std::abs(x - e));
  return d;
}

std::vector<std::string> ScanRecord::flags() const {
  std::vector<std::string> out;
  if (!error.empty()) out.push_back("error");
  if (low_confidence) out.push_back("low_confidence");
  for (std::size_t r = 0; r < overflow.size(); ++r) {
    if (overflow[r]) out.push_back("overflow_r" + std::to_string(r + 1));
  }
  if (rank_attempted && !r_rank) out.push_back("rank_indeterminate");
  if (band_edge) out.push_back("band_edge");
  if (near_edge) out.push_back("near_edge");
  if (r_ces && r_flo && *r_ces != *r_flo) out.push_back("ces_flo_disagree");
  if (r_rank && r_flo && *r_rank != *r_flo) out.push_back("rank_flo_disagree");
  if (r_ces && r_rank && *r_ces != *r_rank) out.push_back("ces_rank_disagree");
  return out;
}

std::vector<ScanRecord> scan_energy_grid(const OperatorSpec& spec, const std::vector<double>& xs,
                                         const ScanParams& params) {
  const std::vector<std::int64_t> grid = dyadic_grid(params.l_min_exponent, params.l_max_exponent);
  const bool periodic = params.with_floquet && spec.period().has_value();
  std::vector<double> edges;
  if (periodic && !xs.empty()) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double pad = std::max(params.edge_radius, 1e-3);
    if (*hi > *lo) {
      edges = floquet_band_edges(spec, *lo - pad, *hi + pad, 4096, params.floquet_eps);
    } else {
      edges = floquet_band_edges(spec, *lo - pad, *lo + pad, 64, params.floquet_eps);
    }
  }

  std::vector<ScanRecord> records(xs.size());
  parallel_for(xs.size(), params.threads, [&](std::size_t i) {
    ScanRecord& rec = records[i];
    rec.x = xs[i];
    rec.dim = spec.dim();
    auto note = [&rec](const Error& e) {
      if (rec.error.empty()) rec.error = std::string(to_string(e.kind())) + ": " + e.what();
    };
    try {
      const CesaroProfile prof = cesaro_profile(spec, rec.x, grid);
      const CesaroClass cls = classify_multiplicity(prof, params.slope_threshold);
      rec.r_ces = cls.r;
      rec.low_confidence = cls.low_confidence;
      rec.slopes = prof.slope;
      rec.overflow = prof.overflow;
    } catch (const Error& e) {
      note(e);
    }
    if (params.with_rank) {
      rec.rank_attempted = true;
      try {
        const ImMBoundary b = im_m_boundary(spec, rec.x, params.y_ladder, params.im_options);
        rec.r_rank = b.rank;
        rec.trace_growth = b.trace_growth;
      } catch (const Error& e) {
        note(e);
      }
    }
    if (periodic) {
      try {
        const FloquetResult f = floquet_multiplicity(spec, rec.x, params.floquet_eps);
        rec.r_flo = f.r;
        rec.band_edge = f.band_edge;
      } catch (const Error& e) {
        note(e);
      }
      rec.near_edge = distance_to_edges(edges, rec.x) < params.edge_radius;
    }
  });
  return records;
}

ConstancyReport constancy_experiment(const OperatorSpec& spec,
                                     const std::vector<std::vector<double>>& phases,
                                     const std::vector<double>& xs, const ConstancyParams& params) {
  const auto* dyn = std::get_if<DynamicalModel>(&spec.kind());
  if (!dyn) throw Error(ErrorKind::invalid_input, "constancy_experiment: needs a dynamical model");
  if (phases.size() < 2) throw Error(ErrorKind::invalid_input, "constancy_experiment: need >= 2 phases");
  for (const auto& ph : phases) {
    if (ph.size() != dyn->system.torus_dim()) {
      throw Error(ErrorKind::invalid_input, "constancy_experiment: phase dimension mismatch");
    }
  }
  const std::vector<std::int64_t> grid =
      dyadic_grid(params.scan.l_min_exponent, params.scan.l_max_exponent);

  ConstancyReport rep;
  rep.x = xs;
  rep.edge_source = params.edges;

  std::vector<OperatorSpec> right, left;
  for (const auto& ph : phases) {
    DynamicalSystem sys = dyn->system;
    for (std::size_t i = 0; i < ph.size(); ++i) sys.phase[i] = torus_add(ph[i], 0.0);
    right.push_back(OperatorSpec::dynamical(sys));
    left.push_back(right.back().reflected());
  }

  // band-edge exclusion from periodic models: the model itself when its
  // rotation is rational, otherwise its continued-fraction approximants
  if (params.edges != EdgeSource::none && !xs.empty()) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double pad = std::max(params.scan.edge_radius, 1e-3);
    for (const auto& ph : phases) {
      DynamicalSystem sys = dyn->system;
      sys.phase = ph;
      if (params.edges == EdgeSource::approximant) {
        for (auto& a : sys.rotation) {
          const Rational c = best_convergent(a, params.max_denominator);
          a = static_cast<double>(c.p) / static_cast<double>(c.q);
        }
      }
      const OperatorSpec periodic_spec = OperatorSpec::dynamical(sys);
      if (!periodic_spec.period()) {
        throw Error(ErrorKind::invalid_input,
                    "constancy_experiment: rotation is not rational; use approximant edges");
      }
      const auto e = floquet_band_edges(periodic_spec, *lo - pad, *hi + pad, 4096,
                                        params.scan.floquet_eps);
      rep.edges.insert(rep.edges.end(), e.begin(), e.end());
    }
    std::sort(rep.edges.begin(), rep.edges.end());
  }
  for (double x : xs) {
    rep.near_edge.push_back(distance_to_edges(rep.edges, x) < params.scan.edge_radius);
  }

  // one work item per (phase, side, x)
  const std::size_t nx = xs.size();
  const std::size_t items = phases.size() * 2 * nx;
  std::vector<std::optional<CesaroClass>> cls(items);
  parallel_for(items, params.scan.threads, [&](std::size_t i) {
    const std::size_t ph = i / (2 * nx);
    const bool is_left = ((i / nx) % 2) == 1;
    const double x = xs[i % nx];
    try {
      const CesaroProfile prof = cesaro_profile(is_left ? left[ph] : right[ph], x, grid);
      cls[i] = classify_multiplicity(prof, params.scan.slope_threshold);
    } catch (const Error&) {
      cls[i].reset();
    }
  });

  for (std::size_t ph = 0; ph < phases.size(); ++ph) {
    PhaseClassification pc;
    pc.phase = phases[ph];
    for (std::size_t j = 0; j < nx; ++j) {
      const auto& rp = cls[ph * 2 * nx + j];
      const auto& rm = cls[ph * 2 * nx + nx + j];
      pc.r_plus.push_back(rp ? std::optional<int>(rp->r) : std::nullopt);
      pc.r_minus.push_back(rm ? std::optional<int>(rm->r) : std::nullopt);
      const bool low = (rp && rp->low_confidence) || (rm && rm->low_confidence);
      pc.low_confidence.push_back(low);
      if (rp && rm && !low) {
        pc.full.push_back(rp->r + rm->r);
      } else {
        pc.full.push_back(std::nullopt);
      }
    }
    rep.phases.push_back(std::move(pc));
  }

  const int l = spec.dim();
  auto even_class = [](int m) { return (m > 0 && m % 2 == 0) ? m : 0; };
  for (std::size_t b = 1; b < phases.size(); ++b) {
    PhaseComparison cmp;
    cmp.phase_a = 0;
    cmp.phase_b = b;
    cmp.symmetric_difference.assign(static_cast<std::size_t>(l), 0.0);
    std::vector<int> diff(static_cast<std::size_t>(l), 0);
    for (std::size_t j = 0; j < nx; ++j) {
      if (rep.near_edge[j]) {
        ++cmp.edge_excluded;
        continue;
      }
      const auto& fa = rep.phases[0].full[j];
      const auto& fb = rep.phases[b].full[j];
      if (!fa || !fb) {
        ++cmp.indeterminate;
        continue;
      }
      ++cmp.compared;
      const int ea = even_class(*fa), eb = even_class(*fb);
      if (ea == eb) ++cmp.agree;
      for (int k = 1; k <= l; ++k) {
        if ((ea == 2 * k) != (eb == 2 * k)) ++diff[static_cast<std::size_t>(k - 1)];
      }
    }
    cmp.agreement = cmp.compared > 0 ? static_cast<double>(cmp.agree) / cmp.compared : 1.0;
    for (int k = 0; k < l; ++k) {
      cmp.symmetric_difference[static_cast<std::size_t>(k)] =
          cmp.compared > 0 ? static_cast<double>(diff[static_cast<std::size_t>(k)]) / cmp.compared
                           : 0.0;
    }
    rep.comparisons.push_back(std::move(cmp));
  }
  return rep;
}

}  // namespace mjacobi
