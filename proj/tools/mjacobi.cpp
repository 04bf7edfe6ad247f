// mjacobi run <config> [--out DIR] [--threads N]
// mjacobi validate <config> [--out DIR]

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "mjacobi/cli.hpp"

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw mjacobi::Error(mjacobi::ErrorKind::io, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw mjacobi::Error(mjacobi::ErrorKind::io, "write failed for '" + path.string() + "'");
}

int finish(const mjacobi::RunConfig& config, const mjacobi::RunOutcome& outcome,
           const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "mjacobi: cannot create '" << out_dir << "': " << ec.message() << "\n";
    return mjacobi::kExitIo;
  }
  try {
    write_file(fs::path(out_dir) / config.csv_name, outcome.csv);
    write_file(fs::path(out_dir) / config.report_name, outcome.report);
  } catch (const mjacobi::Error& e) {
    std::cerr << "mjacobi: " << e.what() << "\n";
    return mjacobi::kExitIo;
  }
  (outcome.exit_code == 0 ? std::cout : std::cerr) << "mjacobi: " << outcome.message << "\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral analysis of block Jacobi operators"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  int threads = 1;

  auto* run = app.add_subcommand("run", "Validate the model and run the configured task");
  run->add_option("config", config_path, "JSON configuration")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads, "Worker threads for grid tasks")
      ->check(CLI::Range(1, 256));

  auto* val = app.add_subcommand("validate", "Check the configuration and the model hypotheses");
  val->add_option("config", config_path, "JSON configuration")->required();
  val->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : mjacobi::kExitSchema;
  }

  mjacobi::RunConfig config;
  try {
    config = mjacobi::load_config(config_path);
  } catch (const mjacobi::Error& e) {
    std::cerr << "mjacobi: " << e.what() << "\n";
    return mjacobi::exit_code_for(e.kind());
  }

  try {
    const auto outcome =
        run->parsed() ? mjacobi::execute(config, threads) : mjacobi::validate_only(config);
    return finish(config, outcome, out_dir);
  } catch (const mjacobi::Error& e) {
    std::cerr << "mjacobi: " << e.what() << "\n";
    return mjacobi::exit_code_for(e.kind());
  }
}
