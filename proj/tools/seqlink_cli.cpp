// SPDX-License-Identifier: Apache-2.0
//
// seqlink: batch driver for the sequential phase-linking pipeline.
//
//   seqlink simulate   --config cfg.json --out data/
//   seqlink historical --config cfg.json --input data/ --out products/
//   seqlink forward    --config cfg.json --input data/ --out products/ [--state dir]
//   seqlink validate   --config cfg.json --out reports/ [--products dir]
//                      [--points series.csv] [--rmse] [--va2] [--consistency]
//
// Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "seqlink/config.hpp"
#include "seqlink/errors.hpp"
#include "seqlink/pipeline.hpp"
#include "seqlink/store.hpp"
#include "seqlink/validate.hpp"

namespace {

struct GlobalOpts {
  std::string config_path;
  int threads = -1;          // -1: keep config value
  std::int64_t seed = -1;    // -1: keep config value
  bool verbose = false;
};

void add_global_options(CLI::App* cmd, GlobalOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Pipeline configuration (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--threads", opts.threads, "Worker threads (overrides config)");
  cmd->add_option("--seed", opts.seed, "Simulation seed (overrides config)");
  cmd->add_flag("--verbose", opts.verbose, "Progress output on stderr");
}

seqlink::PipelineConfig load_with_overrides(const GlobalOpts& opts) {
  seqlink::PipelineConfig cfg = seqlink::load_config(opts.config_path);
  if (opts.threads >= 0) {
    cfg.threads = opts.threads;
    cfg.sequential.threads = opts.threads;
  }
  if (opts.seed >= 0) cfg.sim.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.verbose) cfg.verbose = true;
  return cfg;
}

int run_validate(const seqlink::PipelineConfig& cfg, const std::string& out_dir,
                 const std::string& products_dir, const std::string& points_csv,
                 bool want_rmse, bool want_va2, bool want_consistency) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  bool all_pass = true;

  if (want_rmse) {
    seqlink::RmseCurves curves = seqlink::rmse_study(cfg);
    seqlink::write_rmse_csv((fs::path(out_dir) / "rmse_curves.csv").string(), curves);
    std::cout << "rmse: " << curves.dates.size() << " dates scored, mean looks "
              << curves.mean_looks << " -> rmse_curves.csv\n";
  }

  if (want_consistency) {
    auto [truth, stack] = seqlink::simulate_from_config(cfg);
    seqlink::ConsistencyReport rep =
        seqlink::forward_vs_historical(cfg, stack, &truth);
    seqlink::write_consistency_csv((fs::path(out_dir) / "consistency.csv").string(),
                                   rep);
    double worst = 0.0;
    for (const auto& row : rep.rows) worst = std::max({worst, row.rms_1, row.rms_2});
    std::cout << "consistency: " << rep.rows.size() << " forward dates, worst rms "
              << worst << " rad -> consistency.csv\n";
  }

  if (want_va2) {
    seqlink::ResidualReport rep;
    if (!points_csv.empty()) {
      rep = seqlink::va2_point_series(seqlink::load_point_series(points_csv), cfg.va2);
    } else {
      seqlink::RasterStore store{fs::path(products_dir)};
      if (!store.exists("velocity"))
        throw seqlink::DataError("no velocity layer in " + products_dir +
                                 "; run historical mode first");
      seqlink::Raster<double> vel = store.read_real("velocity");
      seqlink::Raster<std::uint8_t> valid =
          store.exists("velocity_valid")
              ? store.read_uint8("velocity_valid")
              : seqlink::Raster<std::uint8_t>(vel.rows(), vel.cols(), 1);
      rep = seqlink::va2_residuals(vel, valid, cfg.pixel_spacing_m, cfg.va2);
    }
    seqlink::write_va2_csv((fs::path(out_dir) / "va2_report.csv").string(), rep);
    std::cout << "va2: " << rep.pairs_drawn << " pairs in " << rep.bins.size()
              << " bins, " << (rep.overall_pass ? "PASS" : "FAIL")
              << " -> va2_report.csv\n";
    all_pass = all_pass && rep.overall_pass;
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential InSAR phase linking"};
  app.require_subcommand(1);

  GlobalOpts sim_opts, hist_opts, fwd_opts, val_opts;
  std::string sim_out;
  std::string hist_in, hist_out;
  std::string fwd_state, fwd_in, fwd_out;
  std::string val_out, val_products, val_points;
  bool val_rmse = false, val_va2 = false, val_consistency = false;

  CLI::App* sim = app.add_subcommand("simulate", "Synthesize an SLC stack with truth");
  add_global_options(sim, sim_opts);
  sim->add_option("--out", sim_out, "Output store directory")->required();

  CLI::App* hist = app.add_subcommand("historical", "Process a full archive");
  add_global_options(hist, hist_opts);
  hist->add_option("--input", hist_in, "Input store with slc_* layers")->required();
  hist->add_option("--out", hist_out, "Product store directory")->required();

  CLI::App* fwd = app.add_subcommand("forward", "Ingest new acquisitions");
  add_global_options(fwd, fwd_opts);
  fwd->add_option("--input", fwd_in, "Store holding the new slc_* layers")->required();
  fwd->add_option("--out", fwd_out, "Product store directory")->required();
  fwd->add_option("--state", fwd_state, "State directory (default: config, else <out>/state)");

  CLI::App* val = app.add_subcommand("validate", "Score estimators and products");
  add_global_options(val, val_opts);
  val->add_option("--out", val_out, "Report directory")->required();
  val->add_option("--products", val_products, "Product store for the velocity check");
  val->add_option("--points", val_points, "Point time-series CSV for the velocity check");
  val->add_flag("--rmse", val_rmse, "Score estimator RMSE against simulated truth");
  val->add_flag("--va2", val_va2, "Velocity residual closure check");
  val->add_flag("--consistency", val_consistency, "Forward vs historical agreement");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) {
      seqlink::cmd_simulate(load_with_overrides(sim_opts), sim_out);
      std::cout << "simulated stack written to " << sim_out << "\n";
    } else if (hist->parsed()) {
      seqlink::cmd_historical(load_with_overrides(hist_opts), hist_in, hist_out);
      std::cout << "historical products written to " << hist_out << "\n";
    } else if (fwd->parsed()) {
      seqlink::PipelineConfig cfg = load_with_overrides(fwd_opts);
      std::string state_dir = !fwd_state.empty() ? fwd_state
                              : !cfg.state_dir.empty()
                                  ? cfg.state_dir
                                  : (std::filesystem::path(fwd_out) / "state").string();
      seqlink::cmd_forward(cfg, state_dir, fwd_in, fwd_out);
      std::cout << "forward products written to " << fwd_out << "\n";
    } else if (val->parsed()) {
      seqlink::PipelineConfig cfg = load_with_overrides(val_opts);
      bool any = val_rmse || val_va2 || val_consistency;
      bool want_rmse = any ? val_rmse : true;
      bool want_consistency = any ? val_consistency : true;
      bool want_va2 = any ? val_va2 : (!val_products.empty() || !val_points.empty());
      if (want_va2 && val_products.empty() && val_points.empty())
        throw seqlink::ConfigError(
            "--va2 needs --products (velocity raster) or --points (CSV series)");
      return run_validate(cfg, val_out, val_products, val_points, want_rmse,
                          want_va2, want_consistency);
    }
  } catch (const seqlink::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const seqlink::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const seqlink::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
