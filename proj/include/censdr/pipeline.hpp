// End-to-end fit: standardize covariates, solve the estimating
// equation, estimate the variance, and map everything back to the
// original covariate scale.
//
// Fitting happens on covariates scaled to unit sd so the single index
// bandwidth treats all directions comparably. Because the index matrix
// is identified by its upper identity block, the back-map is the
// componentwise rescaling
//
//   beta_orig[j, m] = beta_std[j, m] * s_m / s_j
//
// (s_j the original sd of covariate j): dividing each covariate by its
// sd multiplies the coefficient, and renormalizing the upper block back
// to the identity divides column m by its pivot scale. Centering only
// shifts the index, which the unspecified link absorbs, so means drop
// out. Standard errors and interval endpoints map by the same positive
// factors.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "censdr/inference.hpp"
#include "censdr/solver.hpp"
#include "censdr/survdata.hpp"

namespace censdr {

struct AnalysisOptions {
  FitConfig fit;
  bool standardize_covariates = true;
  bool with_inference = true;
  double ci_level = 0.95;
};

struct Analysis {
  FitResult fit;             // in the fitted (standardized) scale
  Standardization scaling;   // identity when standardization is off
  Eigen::MatrixXd beta_std;  // p x d as fitted
  Eigen::MatrixXd beta_orig; // p x d in original covariate scale
  EfficientInfo info;        // fitted scale
  Eigen::VectorXd se;        // original scale, free-vec order; NaN if undefined
  ConfidenceIntervals ci;    // original scale
  std::vector<std::string> warnings;
};

inline Analysis analyze(const SurvivalDataset& data,
                        const AnalysisOptions& opt) {
  data.validate();
  Analysis out;

  SurvivalDataset work = data;
  if (opt.standardize_covariates) {
    auto [std_data, scaling] = standardize(data);
    work = std::move(std_data);
    out.scaling = std::move(scaling);
  } else {
    out.scaling.means = Eigen::VectorXd::Zero(data.p());
    out.scaling.scales = Eigen::VectorXd::Ones(data.p());
  }

  out.fit = fit(work, opt.fit);
  out.beta_std = out.fit.param.matrix();
  for (const auto& w : out.fit.warnings) out.warnings.push_back(w);
  if (!out.fit.converged)
    out.warnings.push_back("fit did not converge; estimates are best-effort");
  if (out.fit.score.diag.clamp_share() > 0.01)
    out.warnings.push_back(
        "hazard density clamped on more than 1% of event terms; "
        "bandwidths may be too small for this sample");

  const int d = opt.fit.d;
  const Eigen::Index p = data.p();
  out.beta_orig.resize(p, d);
  for (Eigen::Index j = 0; j < p; ++j)
    for (int m = 0; m < d; ++m)
      out.beta_orig(j, m) =
          out.beta_std(j, m) * out.scaling.scales[m] / out.scaling.scales[j];

  if (opt.with_inference) {
    out.info = efficient_info(work, out.fit.param, out.fit.bandwidths,
                              opt.fit.index_kernel, opt.fit.time_family,
                              opt.fit.nthreads);
    const ConfidenceIntervals ci_std =
        confidence_intervals(out.fit, out.info, opt.ci_level);
    const Eigen::Index q = p - d;
    Eigen::VectorXd factor(q * d);
    for (int m = 0; m < d; ++m)
      for (Eigen::Index k = 0; k < q; ++k)
        factor[m * q + k] =
            out.scaling.scales[m] / out.scaling.scales[d + k];
    // NaN stays NaN under the positive rescaling, so no special case.
    out.se = (out.info.se.array() * factor.array()).matrix();
    out.ci.level = ci_std.level;
    out.ci.estimate = (ci_std.estimate.array() * factor.array()).matrix();
    out.ci.lower = (ci_std.lower.array() * factor.array()).matrix();
    out.ci.upper = (ci_std.upper.array() * factor.array()).matrix();
    if (!out.info.invertible)
      out.warnings.push_back(
          "information matrix numerically singular (rank " +
          std::to_string(out.info.rank) + "); standard errors undefined");
  }
  return out;
}

}  // namespace censdr
