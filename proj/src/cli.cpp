#include "mjacobi/cli.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace mjacobi {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::schema, where + ": " + what);
}

// Object reader that remembers which keys were consumed, so leftovers can be
// rejected as unknown.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) schema_error(where_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    used_.insert(key);
    if (!j_.contains(key)) schema_error(where_, "missing key '" + key + "'");
    return j_.at(key);
  }

  const json* find(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key) { return as_number(at(key), path(key)); }
  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    return v ? as_number(*v, path(key)) : fallback;
  }
  std::int64_t integer(const std::string& key) { return as_integer(at(key), path(key)); }
  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const json* v = find(key);
    return v ? as_integer(*v, path(key)) : fallback;
  }
  std::string string(const std::string& key) { return as_string(at(key), path(key)); }
  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    return v ? as_string(*v, path(key)) : fallback;
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) schema_error(where_, "unknown key '" + it.key() + "'");
    }
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) schema_error(where, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) schema_error(where, "expected a finite number");
    return d;
  }
  static std::int64_t as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) schema_error(where, "expected an integer");
    return v.get<std::int64_t>();
  }
  static std::string as_string(const json& v, const std::string& where) {
    if (!v.is_string()) schema_error(where, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

std::vector<double> number_list(const json& v, const std::string& where) {
  if (!v.is_array()) schema_error(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) out.push_back(Section::as_number(e, where));
  return out;
}

// A real matrix: a number (1 x 1) or an array of equal-length rows.
Block parse_matrix(const json& v, const std::string& where) {
  if (v.is_number()) return Block::scalar(1, Section::as_number(v, where));
  if (!v.is_array() || v.empty()) schema_error(where, "expected a number or an array of rows");
  const int l = static_cast<int>(v.size());
  Block b(l);
  for (int i = 0; i < l; ++i) {
    const auto row = number_list(v[static_cast<std::size_t>(i)], where);
    if (static_cast<int>(row.size()) != l) schema_error(where, "matrix must be square");
    for (int j = 0; j < l; ++j) b(i, j) = row[static_cast<std::size_t>(j)];
  }
  return b;
}

std::vector<Block> parse_matrix_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) schema_error(where, "expected a nonempty array of matrices");
  std::vector<Block> out;
  for (const auto& e : v) out.push_back(parse_matrix(e, where));
  return out;
}

SamplingMap parse_map(const json& v, const std::string& where) {
  Section s(v, where);
  const std::string type = s.string("type");
  if (type == "constant") {
    Block value = parse_matrix(s.at("value"), s.path("value"));
    s.finish();
    return SamplingMap(ConstantMap{std::move(value)});
  }
  if (type == "cosine") {
    CosineMap m{parse_matrix(s.at("base"), s.path("base")), {}};
    const json& terms = s.at("terms");
    if (!terms.is_array()) schema_error(s.path("terms"), "expected an array");
    for (const auto& t : terms) {
      Section ts(t, s.path("terms[]"));
      CosineTerm term;
      const json& freq = ts.at("frequency");
      if (!freq.is_array()) schema_error(ts.path("frequency"), "expected an array of integers");
      for (const auto& f : freq) {
        term.frequency.push_back(static_cast<int>(Section::as_integer(f, ts.path("frequency"))));
      }
      term.amplitude = parse_matrix(ts.at("amplitude"), ts.path("amplitude"));
      term.phase = ts.number("phase", 0.0);
      ts.finish();
      m.terms.push_back(std::move(term));
    }
    s.finish();
    return SamplingMap(std::move(m));
  }
  if (type == "piecewise") {
    PiecewiseMap m;
    m.coordinate = static_cast<int>(s.integer("coordinate", 0));
    m.breakpoints = number_list(s.at("breakpoints"), s.path("breakpoints"));
    m.values = parse_matrix_list(s.at("values"), s.path("values"));
    s.finish();
    return SamplingMap(std::move(m));
  }
  schema_error(s.path("type"), "unknown map type '" + type + "'");
}

OperatorSpec parse_model(const json& v, std::string& kind) {
  Section s(v, "model");
  kind = s.string("type");
  try {
    if (kind == "free") {
      const auto dim = s.integer("dim", 1);
      s.finish();
      if (dim < 1) schema_error("model.dim", "must be >= 1");
      return OperatorSpec::free(static_cast<int>(dim));
    }
    if (kind == "diagonal") {
      const auto pot = number_list(s.at("potential"), "model.potential");
      s.finish();
      if (pot.empty()) schema_error("model.potential", "must be nonempty");
      return diagonal_model(pot);
    }
    if (kind == "periodic") {
      auto d = parse_matrix_list(s.at("d"), "model.d");
      auto vv = parse_matrix_list(s.at("v"), "model.v");
      s.finish();
      return OperatorSpec::periodic(std::move(d), std::move(vv));
    }
    if (kind == "explicit") {
      auto d = parse_matrix_list(s.at("d"), "model.d");
      auto vv = parse_matrix_list(s.at("v"), "model.v");
      const std::string tail = s.string("tail", "constant");
      if (tail != "constant" && tail != "periodic") schema_error("model.tail", "constant | periodic");
      std::optional<LeftExtension> left;
      if (const json* lj = s.find("left")) {
        Section ls(*lj, "model.left");
        left = LeftExtension{parse_matrix_list(ls.at("d"), "model.left.d"),
                             parse_matrix_list(ls.at("v"), "model.left.v")};
        ls.finish();
      }
      s.finish();
      return OperatorSpec::explicit_model(
          std::move(d), std::move(vv),
          tail == "periodic" ? TailRule::periodic_wrap : TailRule::constant, std::move(left));
    }
    if (kind == "random_periodic") {
      const auto dim = s.integer("dim");
      const auto period = s.integer("period");
      const auto seed = s.integer("seed", 0);
      const double d_spread = s.number("d_spread", 0.2);
      const double v_spread = s.number("v_spread", 0.5);
      s.finish();
      if (dim < 1 || period < 1) schema_error("model", "dim and period must be >= 1");
      return random_periodic_model(static_cast<int>(dim), static_cast<int>(period),
                                   static_cast<std::uint64_t>(seed), d_spread, v_spread);
    }
    if (kind == "dynamical") {
      DynamicalSystem sys{number_list(s.at("rotation"), "model.rotation"),
                          number_list(s.at("phase"), "model.phase"),
                          parse_map(s.at("d_map"), "model.d_map"),
                          parse_map(s.at("v_map"), "model.v_map")};
      s.finish();
      return OperatorSpec::dynamical(std::move(sys));
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::schema) throw;
    throw Error(ErrorKind::schema, std::string("model: ") + e.what());
  }
  schema_error("model.type", "unknown model type '" + kind + "'");
}

std::vector<double> parse_grid(Section& s, const std::string& key) {
  const json& g = s.at(key);
  if (g.is_array()) {
    auto pts = number_list(g, s.path(key));
    if (pts.empty()) schema_error(s.path(key), "grid must be nonempty");
    return pts;
  }
  Section gs(g, s.path(key));
  const double start = gs.number("start");
  const double stop = gs.number("stop");
  const auto count = gs.integer("count");
  gs.finish();
  if (count < 1) schema_error(s.path(key), "count must be >= 1");
  std::vector<double> out;
  for (std::int64_t i = 0; i < count; ++i) {
    out.push_back(count == 1 ? start
                             : start + (stop - start) * static_cast<double>(i) /
                                           static_cast<double>(count - 1));
  }
  return out;
}

// Uniform double in [0, 1) from the top 53 bits; the same on every platform.
double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Numerics parse_numerics(const json* v) {
  Numerics n;
  if (!v) return n;
  Section s(*v, "numerics");
  n.riccati_tol = s.number("riccati_tol", n.riccati_tol);
  n.riccati_max_depth = s.integer("riccati_max_depth", n.riccati_max_depth);
  n.resolvent_tol = s.number("resolvent_tol", n.resolvent_tol);
  n.resolvent_max_size = s.integer("resolvent_max_size", n.resolvent_max_size);
  n.cesaro_min_exponent = static_cast<int>(s.integer("cesaro_min_exponent", n.cesaro_min_exponent));
  n.cesaro_max_exponent = static_cast<int>(s.integer("cesaro_max_exponent", n.cesaro_max_exponent));
  n.slope_threshold = s.number("slope_threshold", n.slope_threshold);
  if (const json* y = s.find("y_ladder")) n.y_ladder = number_list(*y, "numerics.y_ladder");
  n.tau_rel = s.number("tau_rel", n.tau_rel);
  n.stable_change = s.number("stable_change", n.stable_change);
  n.floquet_eps = s.number("floquet_eps", n.floquet_eps);
  n.edge_radius = s.number("edge_radius", n.edge_radius);
  const std::string norm = s.string("norm", "frobenius");
  if (norm == "frobenius") {
    n.norm = NormKind::frobenius;
  } else if (norm == "operator") {
    n.norm = NormKind::operator_norm;
  } else {
    schema_error("numerics.norm", "frobenius | operator");
  }
  n.validate_window = s.integer("validate_window", n.validate_window);
  n.max_track_length = s.integer("max_track_length", n.max_track_length);
  const std::string edges = s.string("constancy_edges", "approximant");
  if (edges == "none") {
    n.constancy_edges = EdgeSource::none;
  } else if (edges == "floquet") {
    n.constancy_edges = EdgeSource::floquet;
  } else if (edges == "approximant") {
    n.constancy_edges = EdgeSource::approximant;
  } else {
    schema_error("numerics.constancy_edges", "none | floquet | approximant");
  }
  n.max_denominator = s.integer("max_denominator", n.max_denominator);
  s.finish();

  auto positive = [](double value, const char* name) {
    if (!(value > 0.0)) schema_error(std::string("numerics.") + name, "must be > 0");
  };
  positive(n.riccati_tol, "riccati_tol");
  positive(n.resolvent_tol, "resolvent_tol");
  positive(n.slope_threshold, "slope_threshold");
  positive(n.tau_rel, "tau_rel");
  positive(n.stable_change, "stable_change");
  positive(n.floquet_eps, "floquet_eps");
  positive(n.edge_radius, "edge_radius");
  if (n.riccati_max_depth < 32 || n.resolvent_max_size < 32) {
    schema_error("numerics", "depth limits must be >= 32");
  }
  if (n.cesaro_min_exponent < 0 || n.cesaro_max_exponent <= n.cesaro_min_exponent ||
      n.cesaro_max_exponent > 30) {
    schema_error("numerics", "need 0 <= cesaro_min_exponent < cesaro_max_exponent <= 30");
  }
  if (n.y_ladder.size() < 2) schema_error("numerics.y_ladder", "need at least two rungs");
  for (std::size_t i = 0; i < n.y_ladder.size(); ++i) {
    if (!(n.y_ladder[i] >= kMinImaginary) || (i > 0 && !(n.y_ladder[i] < n.y_ladder[i - 1]))) {
      schema_error("numerics.y_ladder", "rungs must be >= 1e-8 and strictly decreasing");
    }
  }
  if (n.validate_window < 1) schema_error("numerics.validate_window", "must be >= 1");
  if (n.max_track_length < 4) schema_error("numerics.max_track_length", "must be >= 4");
  if (n.max_denominator < 1) schema_error("numerics.max_denominator", "must be >= 1");
  return n;
}

json numerics_json(const Numerics& n) {
  const char* edges = n.constancy_edges == EdgeSource::none      ? "none"
                      : n.constancy_edges == EdgeSource::floquet ? "floquet"
                                                                 : "approximant";
  return json{{"riccati_tol", n.riccati_tol},
              {"riccati_max_depth", n.riccati_max_depth},
              {"resolvent_tol", n.resolvent_tol},
              {"resolvent_max_size", n.resolvent_max_size},
              {"cesaro_min_exponent", n.cesaro_min_exponent},
              {"cesaro_max_exponent", n.cesaro_max_exponent},
              {"slope_threshold", n.slope_threshold},
              {"y_ladder", n.y_ladder},
              {"tau_rel", n.tau_rel},
              {"stable_change", n.stable_change},
              {"floquet_eps", n.floquet_eps},
              {"edge_radius", n.edge_radius},
              {"norm", n.norm == NormKind::frobenius ? "frobenius" : "operator"},
              {"validate_window", n.validate_window},
              {"max_track_length", n.max_track_length},
              {"constancy_edges", edges},
              {"max_denominator", n.max_denominator}};
}

TaskConfig parse_task(const json& v, std::mt19937_64& rng, json& resolved) {
  Section s(v, "task");
  const std::string type = s.string("type");
  TaskConfig t;
  resolved = json{{"type", type}};
  if (type == "validate") {
    t.kind = TaskKind::validate;
  } else if (type == "probe") {
    t.kind = TaskKind::probe;
    t.x = s.number("x");
    t.y = s.number("y");
    if (!(t.y >= kMinImaginary)) schema_error("task.y", "must be >= 1e-8");
    resolved["x"] = t.x;
    resolved["y"] = t.y;
  } else if (type == "jl-sweep") {
    t.kind = TaskKind::jl_sweep;
    if (const json* pts = s.find("points")) {
      if (!pts->is_array()) schema_error("task.points", "expected an array of [x, y]");
      for (const auto& p : *pts) {
        const auto xy = number_list(p, "task.points");
        if (xy.size() != 2) schema_error("task.points", "each point is [x, y]");
        t.points.emplace_back(xy[0], xy[1]);
      }
    } else {
      const auto count = s.integer("count");
      const auto xr = number_list(s.at("x_range"), "task.x_range");
      const auto yr = number_list(s.at("y_range"), "task.y_range");
      const bool log_y = s.find("log_y") ? s.at("log_y").get<bool>() : false;
      if (count < 1 || xr.size() != 2 || yr.size() != 2 || !(yr[0] > 0.0) || !(yr[1] >= yr[0])) {
        schema_error("task", "need count >= 1, x_range [a, b], y_range [c, d] with 0 < c <= d");
      }
      for (std::int64_t i = 0; i < count; ++i) {
        const double x = xr[0] + (xr[1] - xr[0]) * unit_draw(rng);
        const double u = unit_draw(rng);
        const double y = log_y ? yr[0] * std::pow(yr[1] / yr[0], u) : yr[0] + (yr[1] - yr[0]) * u;
        t.points.emplace_back(x, y);
      }
    }
    if (t.points.empty()) schema_error("task.points", "must be nonempty");
    for (const auto& [x, y] : t.points) {
      if (!(y > 0.0)) schema_error("task.points", "y must be > 0");
      resolved["points"].push_back({x, y});
    }
  } else if (type == "scan") {
    t.kind = TaskKind::scan;
    t.grid = parse_grid(s, "grid");
    resolved["grid"] = t.grid;
  } else if (type == "constancy") {
    t.kind = TaskKind::constancy;
    t.grid = parse_grid(s, "grid");
    if (const json* ph = s.find("phases")) {
      if (!ph->is_array()) schema_error("task.phases", "expected an array of phase vectors");
      for (const auto& p : *ph) t.phases.push_back(number_list(p, "task.phases"));
    } else {
      const auto count = s.integer("random_phases");
      const auto dim = s.integer("torus_dim", 1);
      if (count < 2 || dim < 1) schema_error("task", "need random_phases >= 2, torus_dim >= 1");
      for (std::int64_t i = 0; i < count; ++i) {
        std::vector<double> p;
        for (std::int64_t k = 0; k < dim; ++k) p.push_back(unit_draw(rng));
        t.phases.push_back(std::move(p));
      }
    }
    if (t.phases.size() < 2) schema_error("task.phases", "need at least two phases");
    resolved["grid"] = t.grid;
    resolved["phases"] = t.phases;
  } else {
    schema_error("task.type", "validate | probe | jl-sweep | scan | constancy");
  }
  s.finish();
  return t;
}

std::string fmt(double v) { return format_double(v); }

std::string fmt_opt(const std::optional<int>& v) { return v ? std::to_string(*v) : "NA"; }

std::string validation_lines(const ValidationReport& v, const LimitPointCheck& lp) {
  std::ostringstream os;
  os << "validation window = " << v.window << "\n";
  os << "min s_l[D] = " << fmt(v.min_smallest_singular) << "\n";
  os << "max s_1[D] = " << fmt(v.max_largest_singular) << "\n";
  os << "max symmetry defect = " << fmt(v.max_symmetry_defect) << "\n";
  os << "limit point partial sum = " << fmt(lp.partial_sum) << " ("
     << (lp.verdict == LimitPointVerdict::sufficient_condition_met ? "sufficient condition met"
                                                                   : "inconclusive")
     << ")\n";
  return os.str();
}

std::string header(const RunConfig& c) {
  std::ostringstream os;
  os << "mjacobi report\n";
  os << "task = " << task_name(c.task.kind) << "\n";
  os << "model = " << c.model_kind << " (l = " << c.model.dim() << ")\n";
  return os.str();
}

std::string with_config(const std::string& body, const RunConfig& c) {
  return body + "\nresolved configuration:\n" + c.resolved + "\n";
}

std::string m_columns(int l) {
  std::string out;
  for (int i = 1; i <= l; ++i) {
    for (int j = 1; j <= l; ++j) {
      const std::string ij = std::to_string(i) + std::to_string(j);
      out += ",m_re_" + ij + ",m_im_" + ij;
    }
  }
  return out;
}

std::string m_values(const Block& m) {
  std::string out;
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) out += "," + fmt(m(i, j).real()) + "," + fmt(m(i, j).imag());
  }
  return out;
}

RunOutcome run_probe(const RunConfig& c, std::string report) {
  const cplx z(c.task.x, c.task.y);
  const WeylM ric = m_riccati(c.model, z, c.numerics.riccati_tol, c.numerics.riccati_max_depth);
  const WeylM res =
      m_resolvent(c.model, z, c.numerics.resolvent_tol, c.numerics.resolvent_max_size);
  RunOutcome out;
  out.csv = "method,x,y,depth,last_delta" + m_columns(c.model.dim()) + "\n";
  out.csv += "riccati," + fmt(z.real()) + "," + fmt(z.imag()) + "," + std::to_string(ric.depth) +
             "," + fmt(ric.last_delta) + m_values(ric.m) + "\n";
  out.csv += "resolvent," + fmt(res.z.real()) + "," + fmt(res.z.imag()) + "," +
             std::to_string(res.depth) + "," + fmt(res.last_delta) + m_values(res.m) + "\n";
  const double gap = frobenius_norm(ric.m - res.m);
  report += "riccati tolerance = " + fmt(c.numerics.riccati_tol) + "\n";
  report += "resolvent tolerance = " + fmt(c.numerics.resolvent_tol) + "\n";
  report += "||M_riccati - M_resolvent||_F = " + fmt(gap) + "\n";
  if (res.bumped) report += "resolvent elimination broke down; Im z was raised by 1e-8\n";
  out.report = report;
  out.message = "probe done, method gap " + fmt(gap);
  return out;
}

RunOutcome run_jl_sweep(const RunConfig& c, std::string report) {
  RunOutcome out;
  out.csv = "x,y,L,psi_norm,phi_norm,phi_smallest,ratio,condition_term,k1,k2,m_norm,lower,upper,"
            "verdict,error\n";
  int holds = 0, fails = 0, skipped = 0;
  LSolveOptions lo;
  lo.d0_norm = c.numerics.norm;
  lo.max_length = c.numerics.max_track_length;
  for (const auto& [x, y] : c.task.points) {
    try {
      const JLBoundReport r = jl_bounds(c.model, x, y, c.numerics.resolvent_tol, lo);
      const std::string verdict = r.verdict ? (*r.verdict ? "true" : "false") : "NA";
      if (!r.verdict) {
        ++skipped;
      } else if (*r.verdict) {
        ++holds;
      } else {
        ++fails;
      }
      out.csv += fmt(x) + "," + fmt(y) + "," + fmt(r.L) + "," + fmt(r.psi_norm) + "," +
                 fmt(r.phi_norm) + "," + fmt(r.phi_smallest) + "," + fmt(r.ratio) + "," +
                 fmt(r.condition_term) + "," + fmt(r.k1) + "," + fmt(r.k2) + "," +
                 fmt(r.m_norm) + "," + fmt(r.lower) + "," + fmt(r.upper) + "," + verdict + ",\n";
    } catch (const Error& e) {
      ++skipped;
      out.csv += fmt(x) + "," + fmt(y) + ",NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA," +
                 to_string(e.kind()) + "\n";
    }
  }
  report += "norm of D_0^{-1} = " +
            std::string(c.numerics.norm == NormKind::frobenius ? "frobenius" : "operator") + "\n";
  report += "points = " + std::to_string(c.task.points.size()) + "\n";
  report += "bounds hold = " + std::to_string(holds) + "\n";
  report += "bounds violated = " + std::to_string(fails) + "\n";
  report += "skipped = " + std::to_string(skipped) + "\n";
  out.report = report;
  out.message = "jl-sweep: " + std::to_string(holds) + " hold, " + std::to_string(fails) +
                " violated, " + std::to_string(skipped) + " skipped";
  return out;
}

ScanParams scan_params(const Numerics& n, int threads) {
  ScanParams p;
  p.l_min_exponent = n.cesaro_min_exponent;
  p.l_max_exponent = n.cesaro_max_exponent;
  p.slope_threshold = n.slope_threshold;
  p.y_ladder = n.y_ladder;
  p.im_options.tau_rel = n.tau_rel;
  p.im_options.stable_change = n.stable_change;
  p.im_options.tol = n.riccati_tol;
  p.im_options.max_depth = n.riccati_max_depth;
  p.floquet_eps = n.floquet_eps;
  p.edge_radius = n.edge_radius;
  p.threads = threads;
  return p;
}

RunOutcome run_scan(const RunConfig& c, std::string report, int threads) {
  const auto records = scan_energy_grid(c.model, c.task.grid, scan_params(c.numerics, threads));
  std::vector<ScanRow> rows;
  int ces_flo = 0, ces_flo_total = 0, rank_flo = 0, rank_flo_total = 0, errors = 0;
  for (const auto& r : records) {
    rows.push_back(to_row(r));
    if (!r.error.empty()) ++errors;
    if (r.r_flo && !r.near_edge && !r.band_edge) {
      if (r.r_ces) {
        ++ces_flo_total;
        if (*r.r_ces == *r.r_flo) ++ces_flo;
      }
      if (r.r_rank) {
        ++rank_flo_total;
        if (*r.r_rank == *r.r_flo) ++rank_flo;
      }
    }
  }
  RunOutcome out;
  out.csv = scan_csv(rows, c.model.dim());
  report += "grid points = " + std::to_string(records.size()) + "\n";
  report += "slope threshold = " + fmt(c.numerics.slope_threshold) + "\n";
  report += "point errors = " + std::to_string(errors) + "\n";
  if (c.model.period()) {
    report += "cesaro = floquet away from edges: " + std::to_string(ces_flo) + " / " +
              std::to_string(ces_flo_total) + "\n";
    report += "rank = floquet away from edges: " + std::to_string(rank_flo) + " / " +
              std::to_string(rank_flo_total) + "\n";
  }
  for (const auto& r : records) {
    if (!r.error.empty()) report += "error at x = " + fmt(r.x) + ": " + r.error + "\n";
  }
  out.report = report;
  out.message = "scan: " + std::to_string(records.size()) + " points";
  return out;
}

RunOutcome run_constancy(const RunConfig& c, std::string report, int threads) {
  ConstancyParams p;
  p.scan = scan_params(c.numerics, threads);
  p.edges = c.numerics.constancy_edges;
  p.max_denominator = c.numerics.max_denominator;
  const ConstancyReport rep = constancy_experiment(c.model, c.task.phases, c.task.grid, p);

  RunOutcome out;
  std::string head = "x,near_edge";
  for (std::size_t k = 0; k < rep.phases.size(); ++k) {
    const std::string s = std::to_string(k);
    head += ",r_plus_" + s + ",r_minus_" + s + ",full_" + s;
  }
  out.csv = head + "\n";
  for (std::size_t j = 0; j < rep.x.size(); ++j) {
    out.csv += fmt(rep.x[j]) + "," + (rep.near_edge[j] ? "1" : "0");
    for (const auto& ph : rep.phases) {
      out.csv += "," + fmt_opt(ph.r_plus[j]) + "," + fmt_opt(ph.r_minus[j]) + "," +
                 fmt_opt(ph.full[j]);
    }
    out.csv += "\n";
  }
  report += "band edges excluded = " + std::to_string(rep.edges.size()) + " (radius " +
            fmt(c.numerics.edge_radius) + ")\n";
  double worst = 1.0;
  for (const auto& cmp : rep.comparisons) {
    report += "phase 0 vs phase " + std::to_string(cmp.phase_b) + ": agreement " +
              fmt(cmp.agreement) + " over " + std::to_string(cmp.compared) + " points, " +
              std::to_string(cmp.indeterminate) + " indeterminate, " +
              std::to_string(cmp.edge_excluded) + " near edges\n";
    for (std::size_t k = 0; k < cmp.symmetric_difference.size(); ++k) {
      report += "  multiplicity " + std::to_string(2 * (k + 1)) + " symmetric difference " +
                fmt(cmp.symmetric_difference[k]) + "\n";
    }
    worst = std::min(worst, cmp.agreement);
  }
  out.report = report;
  out.message = "constancy: worst agreement " + fmt(worst);
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::validate: return "validate";
    case TaskKind::probe: return "probe";
    case TaskKind::jl_sweep: return "jl-sweep";
    case TaskKind::scan: return "scan";
    case TaskKind::constancy: return "constancy";
  }
  return "unknown";
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    Section s(root, "config");
    RunConfig c;
    c.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
    std::mt19937_64 rng(c.seed);
    c.model = parse_model(s.at("model"), c.model_kind);
    c.numerics = parse_numerics(s.find("numerics"));
    json task_resolved;
    c.task = parse_task(s.at("task"), rng, task_resolved);
    if (const json* o = s.find("output")) {
      Section os(*o, "output");
      c.csv_name = os.string("csv", c.csv_name);
      c.report_name = os.string("report", c.report_name);
      os.finish();
      if (c.csv_name.empty() || c.report_name.empty()) schema_error("output", "empty file name");
    }
    s.finish();
    if (c.task.kind == TaskKind::constancy) {
      const auto* dyn = std::get_if<DynamicalModel>(&c.model.kind());
      if (!dyn) schema_error("task", "constancy needs a dynamical model");
      for (const auto& ph : c.task.phases) {
        if (ph.size() != dyn->system.torus_dim()) schema_error("task.phases", "torus dimension");
      }
    }
    const json resolved{{"model", root.at("model")},
                        {"task", task_resolved},
                        {"numerics", numerics_json(c.numerics)},
                        {"output", {{"csv", c.csv_name}, {"report", c.report_name}}},
                        {"seed", c.seed}};
    c.resolved = resolved.dump(2);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::schema, std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::schema:
    case ErrorKind::invalid_input: return kExitSchema;
    case ErrorKind::validation: return kExitValidation;
    case ErrorKind::io: return kExitIo;
    default: return kExitNumeric;
  }
}

RunOutcome validate_only(const RunConfig& config) {
  RunOutcome out;
  const ValidationReport v = validate(config.model, config.numerics.validate_window);
  const LimitPointCheck lp = limit_point_partial_sum(config.model, config.numerics.validate_window);
  std::string report = header(config) + validation_lines(v, lp);
  out.csv = "window,min_s_l,max_s_1,max_symmetry_defect,limit_point_sum,passed\n" +
            std::to_string(v.window) + "," + fmt(v.min_smallest_singular) + "," +
            fmt(v.max_largest_singular) + "," + fmt(v.max_symmetry_defect) + "," +
            fmt(lp.partial_sum) + "," + (v.passed() ? "true" : "false") + "\n";
  if (!v.passed()) {
    std::string where;
    for (std::size_t i = 0; i < v.offending.size() && i < 20; ++i) {
      where += (i ? ", " : "") + std::to_string(v.offending[i]);
    }
    report += "validation FAILED at n = " + where + (v.offending.size() > 20 ? ", ..." : "") + "\n";
    out.exit_code = kExitValidation;
    out.message = "model validation failed";
  } else {
    out.message = "model valid";
  }
  out.report = with_config(report, config);
  return out;
}

RunOutcome execute(const RunConfig& config, int threads) {
  RunOutcome v = validate_only(config);
  if (v.exit_code != kExitOk || config.task.kind == TaskKind::validate) return v;

  const ValidationReport vr = validate(config.model, config.numerics.validate_window);
  const LimitPointCheck lp = limit_point_partial_sum(config.model, config.numerics.validate_window);
  const std::string report = header(config) + validation_lines(vr, lp);
  try {
    RunOutcome out;
    switch (config.task.kind) {
      case TaskKind::probe: out = run_probe(config, report); break;
      case TaskKind::jl_sweep: out = run_jl_sweep(config, report); break;
      case TaskKind::scan: out = run_scan(config, report, threads); break;
      case TaskKind::constancy: out = run_constancy(config, report, threads); break;
      case TaskKind::validate: break;
    }
    out.report = with_config(out.report, config);
    return out;
  } catch (const Error& e) {
    RunOutcome out;
    out.exit_code = exit_code_for(e.kind());
    out.message = std::string(to_string(e.kind())) + ": " + e.what();
    out.report = with_config(report + "FAILED: " + out.message + "\n", config);
    return out;
  }
}

// ---- scan CSV ------------------------------------------------------------

ScanRow to_row(const ScanRecord& r) {
  ScanRow row;
  row.x = r.x;
  row.r_ces = r.r_ces;
  if (r.slopes.empty()) {
    row.slopes.assign(static_cast<std::size_t>(r.dim), std::nullopt);
  } else {
    for (double s : r.slopes) row.slopes.emplace_back(s);
  }
  row.r_rank = r.r_rank;
  row.trace_growth = r.trace_growth;
  row.r_flo = r.r_flo;
  row.flags = r.flags();
  return row;
}

std::string scan_csv(const std::vector<ScanRow>& rows, int dim) {
  std::string out = "x,r_ces";
  for (int r = 1; r <= dim; ++r) out += ",slope_r" + std::to_string(r);
  out += ",r_rank,trace_growth,r_flo,flags\n";
  for (const auto& row : rows) {
    if (static_cast<int>(row.slopes.size()) != dim) {
      throw Error(ErrorKind::invalid_input, "scan_csv: slope count does not match dimension");
    }
    out += fmt(row.x) + "," + fmt_opt(row.r_ces);
    for (const auto& s : row.slopes) out += "," + (s ? fmt(*s) : std::string("NA"));
    out += "," + fmt_opt(row.r_rank) + "," + (row.trace_growth ? fmt(*row.trace_growth) : "NA") +
           "," + fmt_opt(row.r_flo) + ",";
    for (std::size_t i = 0; i < row.flags.size(); ++i) out += (i ? "|" : "") + row.flags[i];
    out += "\n";
  }
  return out;
}

std::vector<ScanRow> parse_scan_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::invalid_input, "scan csv: missing header");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(s);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  const auto head = split(line);
  if (head.size() < 7 || head[0] != "x" || head[1] != "r_ces" || head.back() != "flags") {
    throw Error(ErrorKind::invalid_input, "scan csv: unexpected header");
  }
  const std::size_t dim = head.size() - 6;
  auto to_double = [](const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(ErrorKind::invalid_input, "scan csv: bad number '" + s + "'");
    return v;
  };
  auto opt_int = [](const std::string& s) -> std::optional<int> {
    if (s == "NA") return std::nullopt;
    return std::stoi(s);
  };
  std::vector<ScanRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != head.size()) throw Error(ErrorKind::invalid_input, "scan csv: ragged row");
    ScanRow row;
    row.x = to_double(cells[0]);
    row.r_ces = opt_int(cells[1]);
    for (std::size_t r = 0; r < dim; ++r) {
      const auto& c = cells[2 + r];
      row.slopes.push_back(c == "NA" ? std::nullopt : std::optional<double>(to_double(c)));
    }
    row.r_rank = opt_int(cells[2 + dim]);
    const auto& tg = cells[3 + dim];
    if (tg != "NA") row.trace_growth = to_double(tg);
    row.r_flo = opt_int(cells[4 + dim]);
    std::istringstream fs(cells[5 + dim]);
    std::string flag;
    while (std::getline(fs, flag, '|')) row.flags.push_back(flag);
    rows.push_back(std::move(row));
  }
  return rows;
}

void emit_csv(const std::vector<ScanRow>& rows, int dim, const std::string& path) {
  const std::string text = scan_csv(rows, dim);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::io, "write to '" + path + "' failed");
}

}  // namespace mjacobi
