#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mjacobi/cli.hpp"
#include "oracles.hpp"

using namespace mjacobi;

namespace {

int schema_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return exit_code_for(e.kind());
  }
  return 0;
}

std::vector<std::string> csv_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string c;
  while (std::getline(ss, c, ',')) cells.push_back(c);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

}  // namespace

TEST(Config, MinimalValidateUsesDefaults) {
  const auto c = parse_config(R"({"model": {"type": "free", "dim": 2}, "task": {"type": "validate"}})");
  EXPECT_EQ(c.model.dim(), 2);
  EXPECT_EQ(c.task.kind, TaskKind::validate);
  const Numerics d;
  EXPECT_EQ(c.numerics.riccati_tol, d.riccati_tol);
  EXPECT_EQ(c.numerics.resolvent_tol, 1e-10);
  EXPECT_EQ(c.numerics.slope_threshold, kSlopeThreshold);
  EXPECT_EQ(c.numerics.y_ladder, default_y_ladder());
  EXPECT_EQ(c.numerics.tau_rel, ImMOptions{}.tau_rel);
  EXPECT_EQ(c.numerics.edge_radius, ScanParams{}.edge_radius);
  EXPECT_EQ(c.numerics.cesaro_min_exponent, ScanParams{}.l_min_exponent);
  EXPECT_EQ(c.numerics.cesaro_max_exponent, ScanParams{}.l_max_exponent);
  EXPECT_EQ(c.numerics.max_denominator, ConstancyParams{}.max_denominator);
  EXPECT_EQ(c.csv_name, "results.csv");
  EXPECT_EQ(c.report_name, "report.txt");
}

TEST(Config, SchemaErrors) {
  EXPECT_EQ(schema_kind("not json"), kExitSchema);
  EXPECT_EQ(schema_kind(R"({"task": {"type": "validate"}})"), kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free"}, "task": {"type": "validate"}, "extra": 1})"),
            kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free", "size": 2}, "task": {"type": "validate"}})"),
            kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free"}, "task": {"type": "dance"}})"), kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free"}, "task": {"type": "probe", "x": 0.3}})"),
            kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free"}, "task": {"type": "validate"},
                            "numerics": {"riccati_tol": -1}})"),
            kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free"}, "task": {"type": "validate"},
                            "numerics": {"ricati_tol": 1e-8}})"),
            kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "periodic", "d": [[[1, 0], [0, 1]]], "v": [[[0, 1]]]},
                            "task": {"type": "validate"}})"),
            kExitSchema);
  EXPECT_EQ(schema_kind(R"({"model": {"type": "free"}, "task": {"type": "scan", "grid": []}})"),
            kExitSchema);
}

TEST(Config, ModelKinds) {
  const auto p = parse_config(R"({"model": {"type": "periodic", "d": [1, 2], "v": [0, 0.5]},
                                  "task": {"type": "validate"}})");
  EXPECT_EQ(p.model.period(), 2);
  EXPECT_EQ(p.model.coefficient_at(3).d, Block::scalar(1, 2.0));

  const auto d = parse_config(R"({"model": {"type": "diagonal", "potential": [0, 1]},
                                  "task": {"type": "validate"}})");
  EXPECT_EQ(d.model.coefficient_at(4).v, Block::diagonal({0.0, 1.0}));

  const auto r = parse_config(R"({"model": {"type": "random_periodic", "dim": 2, "period": 3, "seed": 5},
                                  "task": {"type": "validate"}})");
  EXPECT_EQ(r.model.coefficient_at(1).d, random_periodic_model(2, 3, 5).coefficient_at(1).d);

  const auto g = parse_config(R"({"model": {"type": "dynamical", "rotation": [0.6180339887498949],
                                  "phase": [0.1],
                                  "d_map": {"type": "constant", "value": 1},
                                  "v_map": {"type": "cosine", "base": 0,
                                            "terms": [{"frequency": [1], "amplitude": 0.5}]}},
                                  "task": {"type": "validate"}})");
  EXPECT_TRUE(g.model.is_dynamical());
  EXPECT_NEAR(g.model.coefficient_at(0).v(0, 0).real(), 0.5 * std::cos(2 * M_PI * 0.1), 1e-15);
}

TEST(Config, GridFormsAndSeededPhases) {
  const auto a = parse_config(R"({"model": {"type": "free"},
                                  "task": {"type": "scan", "grid": {"start": -1, "stop": 1, "count": 5}}})");
  EXPECT_EQ(a.task.grid, (std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0}));

  const std::string text = R"({"model": {"type": "dynamical", "rotation": [0.6180339887498949], "phase": [0],
      "d_map": {"type": "constant", "value": 1},
      "v_map": {"type": "cosine", "base": 0, "terms": [{"frequency": [1], "amplitude": 0.5}]}},
      "task": {"type": "constancy", "grid": [0.0], "random_phases": 3}, "seed": 42})";
  const auto b = parse_config(text), c = parse_config(text);
  ASSERT_EQ(b.task.phases.size(), 3u);
  EXPECT_EQ(b.task.phases, c.task.phases);
  for (const auto& p : b.task.phases) {
    ASSERT_EQ(p.size(), 1u);
    EXPECT_GE(p[0], 0.0);
    EXPECT_LT(p[0], 1.0);
  }
}

TEST(Run, ValidateFreeModel) {
  const auto c = parse_config(R"({"model": {"type": "free", "dim": 3}, "task": {"type": "validate"}})");
  const auto out = execute(c);
  EXPECT_EQ(out.exit_code, kExitOk);
  EXPECT_NE(out.report.find("min s_l[D] = 1\n"), std::string::npos);
  EXPECT_NE(out.report.find("resolved configuration:"), std::string::npos);
}

TEST(Run, ValidationFailureExitCode) {
  const auto c = parse_config(R"({"model": {"type": "explicit", "d": [1, 1, 0, 1], "v": [0, 0, 0, 0]},
                                  "task": {"type": "probe", "x": 0.3, "y": 0.1}})");
  const auto out = execute(c);
  EXPECT_EQ(out.exit_code, kExitValidation);
  EXPECT_NE(out.report.find("validation FAILED at n = 2"), std::string::npos);
}

TEST(Run, ProbeMatchesClosedForm) {
  const auto c = parse_config(R"({"model": {"type": "free"}, "task": {"type": "probe", "x": 0.3, "y": 0.05}})");
  const auto out = execute(c);
  ASSERT_EQ(out.exit_code, kExitOk) << out.message;
  const auto lines = lines_of(out.csv);
  ASSERT_EQ(lines.size(), 3u);
  const auto head = csv_cells(lines[0]);
  const cplx m = oracle::free_m(cplx(0.3, 0.05));
  for (int row = 1; row <= 2; ++row) {
    const auto cells = csv_cells(lines[row]);
    ASSERT_EQ(cells.size(), head.size());
    EXPECT_NEAR(std::stod(cells[5]), m.real(), 1e-8);
    EXPECT_NEAR(std::stod(cells[6]), m.imag(), 1e-8);
  }
  EXPECT_EQ(head[5], "m_re_11");
}

TEST(Run, OverridesReachTheReport) {
  const auto c = parse_config(R"({"model": {"type": "free"}, "task": {"type": "probe", "x": 0.3, "y": 0.05},
                                  "numerics": {"riccati_tol": 1e-9}})");
  EXPECT_EQ(c.numerics.riccati_tol, 1e-9);
  const auto out = execute(c);
  EXPECT_NE(out.report.find("riccati tolerance = 1.0000000000000001e-09"), std::string::npos);
  EXPECT_NE(out.report.find("\"riccati_tol\": 1e-09"), std::string::npos);
}

TEST(Run, ScanOnThreePointFreeGrid) {
  const auto c = parse_config(R"({"model": {"type": "free"}, "task": {"type": "scan", "grid": [-3, 0, 3]}})");
  const auto out = execute(c);
  ASSERT_EQ(out.exit_code, kExitOk) << out.message;
  const auto rows = parse_scan_csv(out.csv);
  ASSERT_EQ(rows.size(), 3u);
  const int expected[] = {0, 1, 0};
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(rows[i].r_ces, expected[i]);
    EXPECT_EQ(rows[i].r_rank, expected[i]);
    EXPECT_EQ(rows[i].r_flo, expected[i]);
  }
  EXPECT_EQ(execute(c).csv, out.csv);
}

TEST(Run, JlSweep) {
  const auto c = parse_config(R"({"model": {"type": "free", "dim": 2},
      "task": {"type": "jl-sweep", "count": 5, "x_range": [-1, 1], "y_range": [0.05, 0.5], "log_y": true},
      "seed": 3})");
  const auto out = execute(c);
  ASSERT_EQ(out.exit_code, kExitOk) << out.message;
  EXPECT_NE(out.report.find("bounds hold = 5"), std::string::npos);
  EXPECT_EQ(lines_of(out.csv).size(), 6u);
}

TEST(ScanCsv, EmptyAndRoundTrip) {
  EXPECT_EQ(scan_csv({}, 2), "x,r_ces,slope_r1,slope_r2,r_rank,trace_growth,r_flo,flags\n");
  EXPECT_TRUE(parse_scan_csv(scan_csv({}, 2)).empty());

  ScanRow r;
  r.x = 0.1;
  r.r_ces = 1;
  r.slopes = {std::optional<double>(1.0 / 3.0), std::nullopt};
  r.r_rank = std::nullopt;
  r.trace_growth = -0.9999999999999999;
  r.r_flo = 1;
  r.flags = {"low_confidence", "near_edge"};
  const std::string text = scan_csv({r}, 2);
  EXPECT_EQ(lines_of(text).size(), 2u);
  const auto back = parse_scan_csv(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0], r);
}

TEST(ScanCsv, ScanRecordsRoundTripBitForBit) {
  const double pot[] = {0.0, 1.0};
  ScanParams p;
  p.l_max_exponent = 12;
  std::vector<double> xs;
  for (int i = 0; i < 9; ++i) xs.push_back(-3.2 + 0.8 * i);
  std::vector<ScanRow> rows;
  for (const auto& rec : scan_energy_grid(diagonal_model(pot), xs, p)) rows.push_back(to_row(rec));
  const auto back = parse_scan_csv(scan_csv(rows, 2));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(back[i], rows[i]) << i;
}

TEST(ScanCsv, EmitWritesFileOrReportsIo) {
  const auto dir = std::filesystem::temp_directory_path() / "mjacobi_emit_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "scan.csv").string();
  emit_csv({}, 1, path);
  std::ifstream in(path);
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(body, scan_csv({}, 1));
  try {
    emit_csv({}, 1, (dir / "missing" / "x.csv").string());
    FAIL() << "expected an io error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::nan("")), "NA");
}
