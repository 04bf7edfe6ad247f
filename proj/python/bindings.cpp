#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mjacobi/classifier.hpp"
#include "mjacobi/weylm.hpp"

namespace py = pybind11;
using namespace mjacobi;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

Block to_block(const CArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1) || a.shape(0) == 0)
    throw py::value_error("expected a non-empty square matrix");
  const int l = static_cast<int>(a.shape(0));
  Block b(l);
  auto r = a.unchecked<2>();
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) b(i, j) = r(i, j);
  return b;
}

CArray to_array(const Block& b) {
  const int l = b.dim();
  CArray out({l, l});
  auto w = out.mutable_unchecked<2>();
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) w(i, j) = b(i, j);
  return out;
}

std::vector<Block> to_blocks(const std::vector<CArray>& xs) {
  std::vector<Block> out;
  for (const auto& x : xs) out.push_back(to_block(x));
  return out;
}

py::dict weyl_dict(const WeylM& w) {
  py::dict d;
  d["m"] = to_array(w.m);
  d["z"] = w.z;
  d["depth"] = w.depth;
  d["last_delta"] = w.last_delta;
  d["bumped"] = w.bumped;
  return d;
}

}  // namespace

PYBIND11_MODULE(_mjacobi, m) {
  m.doc() = "Block Jacobi operators: M-functions, solution growth and multiplicity";

  py::register_exception<Error>(m, "MJacobiError", PyExc_RuntimeError);

  py::class_<OperatorSpec>(m, "Operator")
      .def_property_readonly("dim", &OperatorSpec::dim)
      .def_property_readonly("period", &OperatorSpec::period)
      .def("coefficients", [](const OperatorSpec& s, std::int64_t n) {
        const auto c = s.coefficient_at(n);
        return py::make_tuple(to_array(c.d), to_array(c.v));
      });

  m.def("free", &OperatorSpec::free, py::arg("dim"));
  m.def(
      "periodic",
      [](const std::vector<CArray>& d, const std::vector<CArray>& v) {
        return OperatorSpec::periodic(to_blocks(d), to_blocks(v));
      },
      py::arg("d"), py::arg("v"));
  m.def(
      "diagonal",
      [](const std::vector<double>& potential) { return diagonal_model(potential); },
      py::arg("potential"));
  m.def("random_periodic", &random_periodic_model, py::arg("dim"), py::arg("period"), py::arg("seed"),
        py::arg("d_spread") = 0.2, py::arg("v_spread") = 0.5);

  m.def(
      "singular_values",
      [](const CArray& a) {
        const auto s = singular_values(to_block(a));
        std::vector<double> out;
        for (std::size_t k = 1; k <= s.size(); ++k) out.push_back(s.s(static_cast<int>(k)));
        return out;
      },
      py::arg("a"));

  m.def(
      "m_riccati", [](const OperatorSpec& s, cplx z, double tol) { return weyl_dict(m_riccati(s, z, tol)); },
      py::arg("spec"), py::arg("z"), py::arg("tol") = 1e-10);
  m.def(
      "m_resolvent",
      [](const OperatorSpec& s, cplx z, double tol) { return weyl_dict(m_resolvent(s, z, tol)); },
      py::arg("spec"), py::arg("z"), py::arg("tol") = 1e-10);

  m.def(
      "jl_bounds",
      [](const OperatorSpec& s, double x, double y) {
        const auto r = jl_bounds(s, x, y);
        py::dict d;
        d["L"] = r.L;
        d["lower"] = r.lower;
        d["upper"] = r.upper;
        d["m_norm"] = r.m_norm;
        d["k1"] = r.k1;
        d["k2"] = r.k2;
        d["verdict"] = r.verdict;
        return d;
      },
      py::arg("spec"), py::arg("x"), py::arg("y"));

  m.def(
      "floquet",
      [](const OperatorSpec& s, double x) {
        const auto f = floquet_multiplicity(s, x);
        py::dict d;
        d["r"] = f.r;
        d["band_edge"] = f.band_edge;
        d["moduli"] = f.moduli;
        return d;
      },
      py::arg("spec"), py::arg("x"));

  m.def(
      "cesaro",
      [](const OperatorSpec& s, double x, int lo, int hi, double threshold) {
        const auto p = cesaro_profile(s, x, dyadic_grid(lo, hi));
        const auto c = classify_multiplicity(p, threshold);
        py::dict d;
        d["r"] = c.r;
        d["low_confidence"] = c.low_confidence;
        d["slopes"] = p.slope;
        d["overflow"] = p.overflow;
        return d;
      },
      py::arg("spec"), py::arg("x"), py::arg("lo") = 8, py::arg("hi") = 16,
      py::arg("threshold") = kSlopeThreshold);

  m.def(
      "scan",
      [](const OperatorSpec& s, const std::vector<double>& xs, bool with_rank, int l_max_exponent,
         int threads) {
        ScanParams p;
        p.with_rank = with_rank;
        p.l_max_exponent = l_max_exponent;
        p.threads = threads;
        std::vector<ScanRecord> recs;
        {
          py::gil_scoped_release nogil;
          recs = scan_energy_grid(s, xs, p);
        }
        py::list out;
        for (const auto& r : recs) {
          py::dict d;
          d["x"] = r.x;
          d["r_ces"] = r.r_ces;
          d["r_rank"] = r.r_rank;
          d["r_flo"] = r.r_flo;
          d["near_edge"] = r.near_edge;
          d["flags"] = r.flags();
          d["error"] = r.error;
          out.append(d);
        }
        return out;
      },
      py::arg("spec"), py::arg("xs"), py::arg("with_rank") = true, py::arg("l_max_exponent") = 16,
      py::arg("threads") = 1);
}
