// Command-line front end. Subcommands: fit, simulate, mc, select-dim,
// hazard-grid. Every command is a deterministic function of its flags;
// randomness always flows from an explicit --seed.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical
// non-convergence. --help exits 0, unknown flags exit 1.

#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "censdr/pipeline.hpp"
#include "censdr/report.hpp"
#include "censdr/simgen.hpp"
#include "censdr/solver.hpp"
#include "censdr/survdata.hpp"
#include "censdr/threads.hpp"

namespace censdr {

namespace cli_detail {

// Runs `emit(os)` against the file at `path`, or stdout when empty.
template <typename Fn>
void with_output(const std::string& path, Fn&& emit) {
  if (path.empty()) {
    emit(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  emit(os);
  os.flush();
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline SurvivalDataset load_input(const std::string& path) {
  return load_csv(path);
}

inline StudyId study_arg(const std::string& s) {
  const auto id = parse_study(s);
  if (!id)
    throw std::invalid_argument("unknown study \"" + s +
                                "\" (expected s1..s5)");
  return *id;
}

inline std::optional<double> censor_arg(StudyId id, double rate) {
  if (rate == 0.0) return std::nullopt;
  if (!(rate > 0.0 && rate < 1.0))
    throw std::invalid_argument("--censoring must lie in [0, 1)");
  return censoring_constant(id, rate);
}

// Paper-style summary: coefficients across, bias/sd/median rows, a
// trailing lambda_max column (mean in the bias row, sd in the sd row).
inline void print_mc_table(std::ostream& os, const McSummary& s) {
  const Eigen::Index k = s.true_free.size();
  auto row = [&](const char* label, const Eigen::VectorXd& v,
                 const char* tail) {
    os << std::left << std::setw(10) << label << std::right;
    for (Eigen::Index j = 0; j < k; ++j)
      os << std::setw(9) << std::fixed << std::setprecision(4) << v[j];
    os << std::setw(11) << tail << '\n';
  };
  os << "study " << study_name(s.spec.study) << "  n="
     << (s.spec.n > 0 ? s.spec.n : study_default_n(s.spec.study))
     << "  reps=" << s.reps << "  failures=" << s.failures
     << "  non-converged=" << s.non_converged << '\n';
  os << std::left << std::setw(10) << "" << std::right;
  for (Eigen::Index j = 0; j < k; ++j) {
    std::ostringstream h;
    h << "beta_" << (j + 1);
    os << std::setw(9) << h.str();
  }
  os << std::setw(11) << "lambda_max" << '\n';
  char buf[32];
  row("true", s.true_free, "");
  row("mean", s.mean_beta, "");
  std::snprintf(buf, sizeof buf, "%.4f", s.lambda_max_mean);
  row("bias", s.bias, buf);
  std::snprintf(buf, sizeof buf, "%.4f", s.lambda_max_sd);
  row("sd", s.sd, buf);
  row("med|err|", s.median_abs_error, "");
  if (s.coverage.size() > 0 && s.coverage.allFinite())
    row("coverage", s.coverage, "");
  os.flush();
}

struct CommonArgs {
  std::string input;
  std::string out;
  int d = 1;
  std::uint64_t seed = 1;
  double h = 0.0;
  double b = 0.0;
  double tol = 1e-6;
  int threads = 0;
  int starts = 10;
  int max_iters = 200;
};

inline void add_fit_flags(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--seed", a.seed, "Seed for the multi-start draws");
  cmd->add_option("--h", a.h, "Index bandwidth override (>0)");
  cmd->add_option("--b", a.b, "Time bandwidth override (>0)");
  cmd->add_option("--tol", a.tol, "Score sup-norm convergence tolerance");
  cmd->add_option("--threads", a.threads,
                  "Worker threads (0 = CENSDR_THREADS or all cores)");
  cmd->add_option("--starts", a.starts, "Number of random starting values");
  cmd->add_option("--max-iters", a.max_iters, "Iteration cap per start");
}

inline FitConfig make_fit_config(const CommonArgs& a) {
  if (a.d < 1) throw std::invalid_argument("--d must be at least 1");
  if (!(a.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
  if (a.starts < 0) throw std::invalid_argument("--starts must be >= 0");
  if (a.max_iters < 1) throw std::invalid_argument("--max-iters must be >= 1");
  if (a.h < 0.0 || a.b < 0.0)
    throw std::invalid_argument("bandwidth overrides must be positive");
  FitConfig cfg;
  cfg.d = a.d;
  cfg.score_tol = a.tol;
  cfg.max_iters = a.max_iters;
  cfg.n_starts = a.starts;
  cfg.seed = a.seed;
  cfg.nthreads = resolve_threads(a.threads);
  cfg.h_override = a.h;
  cfg.b_override = a.b;
  return cfg;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv) {
  using cli_detail::CommonArgs;

  CLI::App app{"censdr: dimension-reduced hazard models for right-censored "
               "data"};
  app.require_subcommand(1);
  // Long-only help: the short -h alias would collide with the --h bandwidth
  // flag, and subcommands inherit this name.
  app.set_help_flag("--help", "Print this help message and exit");
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // fit ---------------------------------------------------------------
  CommonArgs fit_args;
  int fit_vic_dmax = 0;
  double fit_level = 0.95;
  CLI::App* cmd_fit =
      app.add_subcommand("fit", "Estimate the index coefficients from a CSV "
                                "dataset and write a JSON report");
  cmd_fit->add_option("--input", fit_args.input, "CSV with x1..xp,time,status")
      ->required();
  cmd_fit->add_option("--d", fit_args.d, "Number of linear indices");
  cmd_fit->add_option("--out", fit_args.out, "Report path (default stdout)");
  cmd_fit->add_option("--level", fit_level, "Confidence level in (0,1)");
  cmd_fit->add_option("--vic-dmax", fit_vic_dmax,
                      "Also run dimension selection up to this d (0 = off)");
  cli_detail::add_fit_flags(cmd_fit, fit_args);

  // simulate ----------------------------------------------------------
  std::string sim_study;
  CommonArgs sim_args;
  long sim_n = 0;
  double sim_censoring = 0.0;
  CLI::App* cmd_sim = app.add_subcommand(
      "simulate", "Generate one dataset from a built-in study design");
  cmd_sim->add_option("--study", sim_study, "Study id (s1..s5)")->required();
  cmd_sim->add_option("--n", sim_n, "Sample size (0 = study default)");
  cmd_sim->add_option("--censoring", sim_censoring,
                      "Target censoring fraction in [0,1); 0 disables");
  cmd_sim->add_option("--seed", sim_args.seed, "Generator seed");
  cmd_sim->add_option("--out", sim_args.out, "Dataset CSV (default stdout)");

  // mc ----------------------------------------------------------------
  std::string mc_study;
  CommonArgs mc_args;
  long mc_n = 0;
  int mc_reps = 0;
  double mc_censoring = 0.0;
  bool mc_record_se = false;
  std::string mc_long_csv;
  CLI::App* cmd_mc = app.add_subcommand(
      "mc", "Repeated generate-and-fit over a study design; writes a JSON "
            "summary, a per-replication CSV, and prints a summary table");
  cmd_mc->add_option("--study", mc_study, "Study id (s1..s5)")->required();
  cmd_mc->add_option("--n", mc_n, "Sample size (0 = study default)");
  cmd_mc->add_option("--reps", mc_reps, "Number of replications")->required();
  cmd_mc->add_option("--censoring", mc_censoring,
                     "Target censoring fraction in [0,1); 0 disables");
  cmd_mc->add_option("--out", mc_args.out,
                     "Output prefix; writes <prefix>.json and <prefix>.csv "
                     "(default: JSON to stdout, no per-rep CSV)");
  cmd_mc->add_flag("--record-se", mc_record_se,
                   "Record per-replication standard errors and CI coverage");
  cmd_mc->add_option("--long-csv", mc_long_csv,
                     "Also write a long-format rep,coef,value CSV");
  cli_detail::add_fit_flags(cmd_mc, mc_args);

  // select-dim ----------------------------------------------------------
  CommonArgs sel_args;
  sel_args.d = 3;
  CLI::App* cmd_sel = app.add_subcommand(
      "select-dim", "Choose the number of indices by validated information "
                    "criterion over d = 1..--d");
  cmd_sel->add_option("--input", sel_args.input,
                      "CSV with x1..xp,time,status")
      ->required();
  cmd_sel->add_option("--d", sel_args.d, "Largest candidate dimension");
  cmd_sel->add_option("--out", sel_args.out, "Report path (default stdout)");
  cli_detail::add_fit_flags(cmd_sel, sel_args);

  // hazard-grid ---------------------------------------------------------
  CommonArgs grid_args;
  std::string grid_report;
  GridSpec grid;
  CLI::App* cmd_grid = app.add_subcommand(
      "hazard-grid", "Tabulate the fitted hazard over a (time x index) grid "
                     "for external plotting");
  cmd_grid->add_option("--input", grid_args.input,
                       "CSV the report was fitted on")
      ->required();
  cmd_grid->add_option("--report", grid_report,
                       "Fit report JSON providing beta_hat")
      ->required();
  cmd_grid->add_option("--t-min", grid.t_min, "Grid start time");
  cmd_grid->add_option("--t-max", grid.t_max, "Grid end time");
  cmd_grid->add_option("--t-steps", grid.t_steps, "Time steps (>= 1)");
  cmd_grid->add_option("--index-min", grid.index_min, "Index grid start");
  cmd_grid->add_option("--index-max", grid.index_max, "Index grid end");
  cmd_grid->add_option("--index-steps", grid.index_steps,
                       "Steps per index coordinate (>= 1)");
  cmd_grid->add_option("--h", grid_args.h, "Index bandwidth override");
  cmd_grid->add_option("--b", grid_args.b, "Time bandwidth override");
  cmd_grid->add_option("--out", grid_args.out, "Grid CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(cmd_fit)) {
      const SurvivalDataset data = cli_detail::load_input(fit_args.input);
      if (fit_args.d >= data.p())
        throw std::invalid_argument("--d must be smaller than the number of "
                                    "covariates");
      AnalysisOptions opt;
      opt.fit = cli_detail::make_fit_config(fit_args);
      opt.ci_level = fit_level;
      const Analysis a = analyze(data, opt);
      std::optional<DimSelection> vic;
      if (fit_vic_dmax > 0) {
        if (fit_vic_dmax >= data.p())
          throw std::invalid_argument("--vic-dmax must be smaller than the "
                                      "number of covariates");
        auto [work, scaling] = standardize(data);
        (void)scaling;  // selection is scale-invariant
        vic = vic_select(work, fit_vic_dmax, opt.fit);
      }
      const json j = fit_report_json(a, data.n(), vic ? &*vic : nullptr);
      cli_detail::with_output(fit_args.out,
                              [&](std::ostream& os) { os << j.dump(2) << '\n'; });
      return a.fit.converged ? 0 : 2;
    }

    if (app.got_subcommand(cmd_sim)) {
      StudySpec spec;
      spec.study = cli_detail::study_arg(sim_study);
      if (sim_n < 0) throw std::invalid_argument("--n must be nonnegative");
      spec.n = sim_n;
      spec.seed = sim_args.seed;
      spec.censor_param = cli_detail::censor_arg(spec.study, sim_censoring);
      Eigen::MatrixXd truth;
      const SurvivalDataset data = gen_study(spec, &truth);
      cli_detail::with_output(
          sim_args.out, [&](std::ostream& os) { write_dataset_csv(os, data); });
      if (!sim_args.out.empty()) {
        json meta;
        meta["study"] = study_name(spec.study);
        meta["n"] = data.n();
        meta["seed"] = spec.seed;
        meta["censor_param"] =
            spec.censor_param ? json(*spec.censor_param) : json(nullptr);
        meta["observed_censoring"] =
            1.0 - static_cast<double>(data.events.sum()) /
                      static_cast<double>(data.n());
        meta["true_beta"] = detail::json_mat(truth);
        std::cout << meta.dump(2) << '\n';
      }
      return 0;
    }

    if (app.got_subcommand(cmd_mc)) {
      StudySpec spec;
      spec.study = cli_detail::study_arg(mc_study);
      if (mc_n < 0) throw std::invalid_argument("--n must be nonnegative");
      if (mc_reps < 1) throw std::invalid_argument("--reps must be >= 1");
      spec.n = mc_n;
      spec.seed = mc_args.seed;
      spec.censor_param = cli_detail::censor_arg(spec.study, mc_censoring);
      mc_args.d = study_d(spec.study);
      FitConfig cfg = cli_detail::make_fit_config(mc_args);
      const int nthreads = cfg.nthreads;
      cfg.nthreads = 1;  // replications own the parallelism
      const McSummary s =
          run_monte_carlo(spec, mc_reps, cfg, mc_record_se, nthreads);
      const json j = mc_summary_json(s);
      if (mc_args.out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        cli_detail::with_output(mc_args.out + ".json", [&](std::ostream& os) {
          os << j.dump(2) << '\n';
        });
        cli_detail::with_output(mc_args.out + ".csv", [&](std::ostream& os) {
          write_mc_csv(os, s);
        });
      }
      if (!mc_long_csv.empty()) {
        cli_detail::with_output(mc_long_csv, [&](std::ostream& os) {
          os << "rep,coef,value\n";
          for (const McRep& r : s.detail) {
            if (!r.ok) continue;
            for (Eigen::Index k = 0; k < r.beta_free.size(); ++k)
              os << r.rep << ",beta_" << (k + 1) << ','
                 << detail::csv_num(r.beta_free[k]) << '\n';
            os << r.rep << ",lambda_max," << detail::csv_num(r.lambda_max)
               << '\n';
          }
        });
      }
      cli_detail::print_mc_table(std::cerr, s);
      return s.failures == s.reps ? 2 : 0;
    }

    if (app.got_subcommand(cmd_sel)) {
      const SurvivalDataset data = cli_detail::load_input(sel_args.input);
      if (sel_args.d >= data.p())
        throw std::invalid_argument("--d must be smaller than the number of "
                                    "covariates");
      FitConfig cfg = cli_detail::make_fit_config(sel_args);
      auto [work, scaling] = standardize(data);
      (void)scaling;  // selection is scale-invariant
      const DimSelection sel = vic_select(work, sel_args.d, cfg);
      const json j = dim_selection_json(sel);
      cli_detail::with_output(sel_args.out,
                              [&](std::ostream& os) { os << j.dump(2) << '\n'; });
      return 0;
    }

    if (app.got_subcommand(cmd_grid)) {
      const SurvivalDataset data = cli_detail::load_input(grid_args.input);
      std::ifstream rep_is(grid_report);
      if (!rep_is)
        throw std::runtime_error("cannot open report file: " + grid_report);
      json rep;
      rep_is >> rep;
      if (!rep.contains("beta_hat") || !rep["beta_hat"].is_array() ||
          rep["beta_hat"].empty())
        throw std::runtime_error("report lacks a beta_hat matrix");
      const auto& rows = rep["beta_hat"];
      const Eigen::Index p = static_cast<Eigen::Index>(rows.size());
      const Eigen::Index d =
          static_cast<Eigen::Index>(rows.front().is_array() ? rows.front().size()
                                                            : 0);
      if (d < 1 || p != data.p())
        throw std::runtime_error("beta_hat shape does not match the dataset");
      Eigen::MatrixXd beta(p, d);
      for (Eigen::Index i = 0; i < p; ++i) {
        if (!rows[i].is_array() ||
            static_cast<Eigen::Index>(rows[i].size()) != d)
          throw std::runtime_error("beta_hat rows have uneven length");
        for (Eigen::Index m = 0; m < d; ++m) {
          if (!rows[i][m].is_number())
            throw std::runtime_error("beta_hat contains non-numeric entries");
          beta(i, m) = rows[i][m].get<double>();
        }
      }
      std::vector<std::string> warnings;
      cli_detail::with_output(grid_args.out, [&](std::ostream& os) {
        warnings = write_hazard_grid_csv(os, data, beta, grid, grid_args.h,
                                         grid_args.b);
      });
      for (const std::string& w : warnings)
        std::cerr << "warning: " << w << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "censdr: " << e.what() << '\n';
    return 1;
  }
  return 1;  // unreachable with require_subcommand(1)
}

}  // namespace censdr
