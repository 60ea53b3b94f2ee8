// JSON and CSV emission: fit reports, Monte-Carlo summaries, dimension
// selection, generated datasets, and hazard grids for plotting.
//
// JSON never carries NaN or infinities; undefined numbers become null
// so every emitted document is strictly valid. CSV numbers round-trip
// doubles exactly (max_digits10).

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "censdr/hazard.hpp"
#include "censdr/inference.hpp"
#include "censdr/pipeline.hpp"
#include "censdr/simgen.hpp"
#include "censdr/survdata.hpp"

namespace censdr {

using json = nlohmann::json;

namespace detail {

inline json json_num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline json json_vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(json_num(v[i]));
  return a;
}

inline json json_mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json_num(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline json dim_selection_json(const DimSelection& sel) {
  json j;
  j["criterion"] = json::array();
  for (double v : sel.criterion) j["criterion"].push_back(detail::json_num(v));
  j["loss"] = json::array();
  for (double v : sel.loss) j["loss"].push_back(detail::json_num(v));
  j["penalty"] = sel.penalty;
  j["fit_converged"] = sel.fit_converged;
  j["chosen_d"] = sel.chosen_d;
  j["warnings"] = sel.warnings;
  return j;
}

inline json fit_report_json(const Analysis& a, Eigen::Index n,
                            const DimSelection* vic = nullptr) {
  json j;
  j["n"] = n;
  j["p"] = a.beta_orig.rows();
  j["d"] = a.beta_orig.cols();
  j["converged"] = a.fit.converged;
  j["beta_hat"] = detail::json_mat(a.beta_orig);
  j["beta_hat_standardized"] = detail::json_mat(a.beta_std);
  if (a.se.size() > 0) {
    j["se"] = detail::json_vec(a.se);
    j["ci"] = {{"level", a.ci.level},
               {"lower", detail::json_vec(a.ci.lower)},
               {"upper", detail::json_vec(a.ci.upper)}};
  } else {
    j["se"] = nullptr;
    j["ci"] = nullptr;
  }
  j["score_norm"] = detail::json_num(a.fit.score_norm());
  j["bandwidths"] = {{"h", a.fit.bandwidths.h},
                     {"b", a.fit.bandwidths.b},
                     {"nu", a.fit.bandwidths.nu}};
  j["diagnostics"] = {
      {"iterations", a.fit.iterations},
      {"score_evaluations", a.fit.score_evaluations},
      {"starts_tried", a.fit.starts_tried},
      {"event_terms", a.fit.score.diag.event_terms},
      {"clamped_hazards", a.fit.score.diag.clamped_hazards},
      {"floored_risk_sums", a.fit.score.diag.floored_risk_sums},
      {"information_rank", a.se.size() > 0 ? json(a.info.rank) : json(nullptr)},
      {"standardization",
       {{"means", detail::json_vec(a.scaling.means)},
        {"scales", detail::json_vec(a.scaling.scales)}}},
      {"warnings", a.warnings}};
  if (vic) j["vic"] = dim_selection_json(*vic);
  return j;
}

inline json mc_summary_json(const McSummary& s) {
  json j;
  j["study"] = study_name(s.spec.study);
  j["n"] = s.spec.n > 0 ? s.spec.n : study_default_n(s.spec.study);
  j["seed"] = s.spec.seed;
  if (s.spec.censor_param)
    j["censor_param"] = *s.spec.censor_param;
  else
    j["censor_param"] = nullptr;
  j["reps"] = s.reps;
  j["failures"] = s.failures;
  j["non_converged"] = s.non_converged;
  j["true_beta_free"] = detail::json_vec(s.true_free);
  j["mean_beta"] = detail::json_vec(s.mean_beta);
  j["bias"] = detail::json_vec(s.bias);
  j["sd"] = detail::json_vec(s.sd);
  j["median_abs_error"] = detail::json_vec(s.median_abs_error);
  j["mean_se"] = detail::json_vec(s.mean_se);
  j["coverage"] = detail::json_vec(s.coverage);
  j["lambda_max"] = {{"mean", detail::json_num(s.lambda_max_mean)},
                     {"sd", detail::json_num(s.lambda_max_sd)}};
  j["elapsed_seconds"] = s.elapsed_seconds;
  return j;
}

// One row per replication: rep, free coefficients, projection distance,
// convergence flag. Failed replications carry nan estimates.
inline void write_mc_csv(std::ostream& os, const McSummary& s) {
  const Eigen::Index nfree = s.true_free.size();
  os << "rep";
  for (Eigen::Index k = 0; k < nfree; ++k) os << ",beta_" << (k + 1);
  os << ",lambda_max,converged\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const McRep& r : s.detail) {
    os << r.rep;
    for (Eigen::Index k = 0; k < nfree; ++k)
      os << ',' << detail::csv_num(r.ok ? r.beta_free[k] : nan);
    os << ',' << detail::csv_num(r.ok ? r.lambda_max : nan);
    os << ',' << (r.ok && r.converged ? 1 : 0) << '\n';
  }
}

inline void write_dataset_csv(std::ostream& os, const SurvivalDataset& data) {
  const Eigen::Index n = data.n(), p = data.p();
  for (Eigen::Index j = 0; j < p; ++j) os << 'x' << (j + 1) << ',';
  os << "time,status\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j)
      os << detail::csv_num(data.covariates(i, j)) << ',';
    os << detail::csv_num(data.times[i]) << ',' << data.events[i] << '\n';
  }
}

struct GridSpec {
  double t_min = 0.0, t_max = 0.0;          // equal means "use data range"
  int t_steps = 20;
  double index_min = 0.0, index_max = 0.0;  // equal means "use data range"
  int index_steps = 20;
};

// Cumulative hazard and hazard density over a (t x index^d) lattice in
// the original covariate scale. Returns warnings (grid outside the
// observed support).
inline std::vector<std::string> write_hazard_grid_csv(
    std::ostream& os, const SurvivalDataset& data, const Eigen::MatrixXd& beta,
    GridSpec grid, double h = 0.0, double b = 0.0) {
  if (beta.rows() != data.p())
    throw std::invalid_argument("hazard grid: beta row count != p");
  if (grid.t_steps < 1 || grid.index_steps < 1)
    throw std::invalid_argument("hazard grid: steps must be >= 1");
  const Eigen::Index d = beta.cols();
  const Eigen::MatrixXd u = data.covariates * beta;

  std::vector<std::string> warnings;
  const double t_lo = data.times.minCoeff(), t_hi = data.times.maxCoeff();
  if (grid.t_min == grid.t_max) {
    grid.t_min = t_lo;
    grid.t_max = t_hi;
  } else if (grid.t_min < t_lo || grid.t_max > t_hi) {
    warnings.push_back("time grid extends outside the observed range");
  }
  const double u_lo = u.minCoeff(), u_hi = u.maxCoeff();
  if (grid.index_min == grid.index_max) {
    grid.index_min = u_lo;
    grid.index_max = u_hi;
  } else if (grid.index_min < u_lo || grid.index_max > u_hi) {
    warnings.push_back("index grid extends outside the observed range");
  }

  const double u_scale = detail::index_scale(u);
  const double t_scale = detail::sample_sd(data.times);
  if (!(h > 0.0) && !(u_scale > 0.0))
    throw std::invalid_argument("hazard grid: degenerate index scale");
  if (!(b > 0.0) && !(t_scale > 0.0))
    throw std::invalid_argument("hazard grid: constant observed times");
  Bandwidths bw;
  bw.h = h > 0.0
             ? h
             : std::pow(static_cast<double>(data.n()), -9.0 / 32.0) * u_scale;
  bw.b = b > 0.0
             ? b
             : std::pow(static_cast<double>(data.n()), -1.0 / 8.0) * t_scale;
  const HazardModel model(u, data.times, data.events, bw);

  auto lin = [](double lo, double hi, int steps, int k) {
    return steps == 1 ? 0.5 * (lo + hi)
                      : lo + (hi - lo) * static_cast<double>(k) /
                                static_cast<double>(steps - 1);
  };

  os << 't';
  for (Eigen::Index m = 0; m < d; ++m) os << ",index_" << (m + 1);
  os << ",cum_hazard,hazard\n";

  // Odometer over the d index coordinates; t varies fastest.
  std::vector<int> pos(static_cast<std::size_t>(d), 0);
  while (true) {
    Eigen::VectorXd v(d);
    for (Eigen::Index m = 0; m < d; ++m)
      v[m] = lin(grid.index_min, grid.index_max, grid.index_steps,
                 pos[static_cast<std::size_t>(m)]);
    const HazardCurve curve = model.curve(v);
    for (int tk = 0; tk < grid.t_steps; ++tk) {
      const double t = lin(grid.t_min, grid.t_max, grid.t_steps, tk);
      os << detail::csv_num(t);
      for (Eigen::Index m = 0; m < d; ++m) os << ',' << detail::csv_num(v[m]);
      os << ',' << detail::csv_num(curve.cum_hazard(t)) << ','
         << detail::csv_num(curve.hazard(t)) << '\n';
    }
    Eigen::Index carry = d - 1;
    while (carry >= 0 &&
           ++pos[static_cast<std::size_t>(carry)] == grid.index_steps) {
      pos[static_cast<std::size_t>(carry)] = 0;
      --carry;
    }
    if (carry < 0) break;
  }
  return warnings;
}

}  // namespace censdr
