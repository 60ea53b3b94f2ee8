// Root finding for the estimating equation.
//
// The unknowns are the free index coefficients; the equation count
// equals the unknown count, so the solver drives the vectorized score
// to zero with a Levenberg-damped quasi-Newton iteration on a forward-
// difference Jacobian: solve (J'J + mu I) s = -J' g, accept the step
// when it shrinks |g|^2, otherwise raise the damping and retry. Steps
// are capped in norm so one aggressive iteration cannot leave the
// basin the start was selected for.
//
// Zeros of the score are not all alike: a coefficient block that
// isolates the observations in index space satisfies the equation too,
// because every leave-one-out smoother then runs out of neighbours at
// once. The solver therefore scores each candidate and each endpoint
// by a leave-one-out pseudo-likelihood of the fitted hazard. Starts (a
// caller-supplied block if any, the zero block, and seeded standard-
// normal draws) are attempted in pseudo-likelihood order; a converged
// root is accepted outright only when its fit is no worse than the
// best start's, and otherwise the endpoint with the best fit wins.
// Everything is sequential and seeded, so a fit is a deterministic
// function of (data, config).
//
// Bandwidths follow the data scale: b from the sd of the observed
// times, h from the geometric mean sd of the starting value's indices,
// both held fixed while the iteration refines that start.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "censdr/hazard.hpp"
#include "censdr/index_param.hpp"
#include "censdr/kernels.hpp"
#include "censdr/rng.hpp"
#include "censdr/score.hpp"
#include "censdr/survdata.hpp"

namespace censdr {

// The score cannot distinguish parameter values: no events, or constant
// observed times.
class UnidentifiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitConfig {
  int d = 1;
  double score_tol = 1e-6;
  int max_iters = 200;
  int n_starts = 10;
  std::uint64_t seed = 1;
  int nthreads = 1;
  // Zero means the n- and scale-based rule decides.
  double h_override = 0.0;
  double b_override = 0.0;
  KernelSpec index_kernel{};
  KernelFamily time_family = KernelFamily::gaussian;
  std::optional<Eigen::MatrixXd> initial_free;
};

struct FitResult {
  IndexParam param;
  ScoreValue score;
  Bandwidths bandwidths;
  int iterations = 0;
  long score_evaluations = 0;
  bool converged = false;
  int starts_tried = 0;
  std::vector<std::string> warnings;

  double score_norm() const { return score.sup_norm(); }
};

namespace detail {

// Norm cap on a single quasi-Newton step.
inline constexpr double kStepCap = 0.5;

// A converged root is accepted outright when its pseudo-likelihood is
// within this slack of the best start's; isolating roots miss by an
// order of magnitude more.
inline constexpr double kLossSlack = 0.02;

inline double sample_sd(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 2) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() /
                   static_cast<double>(n - 1));
}

// Geometric-mean column sd of the candidate's indices; 0 when degenerate.
inline double index_scale(const Eigen::MatrixXd& U) {
  double log_gm = 0.0;
  for (Eigen::Index m = 0; m < U.cols(); ++m) {
    const double sd = sample_sd(U.col(m));
    if (!(sd > 0.0) || !std::isfinite(sd)) return 0.0;
    log_gm += std::log(sd);
  }
  return std::exp(log_gm / static_cast<double>(U.cols()));
}

inline double time_bandwidth(const SurvivalDataset& data,
                             const FitConfig& cfg) {
  if (cfg.b_override > 0.0) return cfg.b_override;
  const double sd_time = sample_sd(data.times);
  if (!(sd_time > 0.0))
    throw UnidentifiableError("fit: observed times are constant");
  return std::pow(static_cast<double>(data.n()), -1.0 / 8.0) * sd_time;
}

// Mean negative log pseudo-likelihood of the fitted hazard, each
// observation scored against the estimator built without it. Lower is
// better. Self-inclusive scoring would be blind here for the same
// reason the score sums leave i out: an isolating coefficient block
// rates its own self term perfectly.
inline double pseudo_loss(const SurvivalDataset& data,
                          const Eigen::MatrixXd& U, double h, double b,
                          const KernelSpec& index_kernel,
                          KernelFamily time_family) {
  HazardModel model(U, data.times, data.events, Bandwidths{h, b},
                    index_kernel, time_family);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const HazardCurve c = model.curve(U.row(i).transpose(), false, false, i);
    loss += c.cum_hazard(data.times[i]);
    if (data.events[i] == 1)
      loss -= std::log(std::max(c.hazard(data.times[i]), kHazardFloor));
  }
  loss /= static_cast<double>(data.n());
  return std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
}

struct Candidate {
  IndexParam param;
  double h = 0.0;
  ScoreValue score;
  double norm2 = 0.0;
  double loss = std::numeric_limits<double>::infinity();
};

// Evaluates every start and returns them sorted by score norm
// (ascending, ties by generation order).
inline std::vector<Candidate> ranked_candidates(const SurvivalDataset& data,
                                                const FitConfig& cfg,
                                                const ScoreAssembler& assembler,
                                                long& evals,
                                                std::vector<std::string>* warnings) {
  const int p = static_cast<int>(data.p());
  const int d = cfg.d;
  const Eigen::Index n = data.n();

  std::vector<Eigen::MatrixXd> starts;
  if (cfg.initial_free) {
    if (cfg.initial_free->rows() != p - d || cfg.initial_free->cols() != d)
      throw std::invalid_argument("fit: initial free block shape mismatch");
    starts.push_back(*cfg.initial_free);
  }
  starts.push_back(Eigen::MatrixXd::Zero(p - d, d));
  CounterRng rng = CounterRng(cfg.seed).derive(0x73746172 /* starts */);
  for (int s = 0; s < cfg.n_starts; ++s) {
    Eigen::MatrixXd f(p - d, d);
    for (Eigen::Index c = 0; c < f.cols(); ++c)
      for (Eigen::Index r = 0; r < f.rows(); ++r) f(r, c) = rng.normal();
    starts.push_back(std::move(f));
  }

  std::vector<Candidate> cands;
  for (const auto& free : starts) {
    Candidate c;
    c.param = IndexParam::from_free(p, d, free);
    const Eigen::MatrixXd U = c.param.indices(data.covariates);
    if (cfg.h_override > 0.0) {
      c.h = cfg.h_override;
    } else {
      const double scale = index_scale(U);
      if (scale <= 0.0) {
        if (warnings)
          warnings->push_back("start skipped: degenerate index scale");
        continue;
      }
      c.h = std::pow(static_cast<double>(n), -9.0 / 32.0) * scale;
    }
    c.score = assembler(U, c.h);
    ++evals;
    if (!c.score.g.allFinite()) {
      if (warnings) warnings->push_back("start skipped: non-finite score");
      continue;
    }
    c.norm2 = c.score.squared_norm();
    cands.push_back(std::move(c));
  }
  if (cands.empty())
    throw UnidentifiableError("fit: no usable starting value");
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return a.norm2 < b.norm2;
                   });
  return cands;
}

inline void validate_fit_inputs(const SurvivalDataset& data,
                                const FitConfig& cfg) {
  const int p = static_cast<int>(data.p());
  if (cfg.d < 1 || cfg.d >= p)
    throw std::invalid_argument("fit: need 1 <= d < p");
  if (!(cfg.score_tol > 0.0))
    throw std::invalid_argument("fit: score_tol must be positive");
  if (cfg.n_starts < 1)
    throw std::invalid_argument("fit: need n_starts >= 1");
  if (data.events.sum() == 0)
    throw UnidentifiableError("fit: every observation is censored");
}

inline ScoreAssembler make_assembler(const SurvivalDataset& data,
                                     const FitConfig& cfg, double b) {
  return ScoreAssembler(data.covariates.rightCols(data.p() - cfg.d),
                        data.times, data.events, b, cfg.index_kernel,
                        cfg.time_family, cfg.nthreads);
}

}  // namespace detail

// Best starting value by score norm; the same pool the full fit draws
// from.
inline IndexParam initial_estimate(const SurvivalDataset& data,
                                   const FitConfig& cfg) {
  detail::validate_fit_inputs(data, cfg);
  const double b = detail::time_bandwidth(data, cfg);
  const ScoreAssembler assembler = detail::make_assembler(data, cfg, b);
  long evals = 0;
  return detail::ranked_candidates(data, cfg, assembler, evals, nullptr)
      .front()
      .param;
}

inline FitResult fit(const SurvivalDataset& data, const FitConfig& cfg) {
  detail::validate_fit_inputs(data, cfg);
  const int p = static_cast<int>(data.p());
  const int d = cfg.d;

  const double b = detail::time_bandwidth(data, cfg);
  const ScoreAssembler assembler = detail::make_assembler(data, cfg, b);

  FitResult res;
  res.param = IndexParam(p, d);
  std::vector<detail::Candidate> cands = detail::ranked_candidates(
      data, cfg, assembler, res.score_evaluations, &res.warnings);

  double pool_min_loss = std::numeric_limits<double>::infinity();
  for (auto& cand : cands) {
    cand.loss =
        detail::pseudo_loss(data, cand.param.indices(data.covariates), cand.h,
                            b, cfg.index_kernel, cfg.time_family);
    pool_min_loss = std::min(pool_min_loss, cand.loss);
  }
  // Attempt order: best fit first; ties keep the score-norm order.
  std::stable_sort(cands.begin(), cands.end(),
                   [](const detail::Candidate& a, const detail::Candidate& b) {
                     return a.loss < b.loss;
                   });

  const Eigen::Index nfree = static_cast<Eigen::Index>(p - d) * d;
  bool have_best = false;
  bool best_converged = false;
  detail::Candidate best_final;
  Bandwidths best_bw;
  int best_iters = 0;

  for (auto& cand : cands) {
    ++res.starts_tried;
    Eigen::VectorXd theta = cand.param.to_vector();
    ScoreValue g = cand.score;
    const double h = cand.h;
    double mu = 1e-3;
    bool converged = g.sup_norm() <= cfg.score_tol;
    bool stalled = false;
    int iters = 0;

    auto eval = [&](const Eigen::VectorXd& th) {
      ++res.score_evaluations;
      return assembler(
          IndexParam::from_vector(p, d, th).indices(data.covariates), h);
    };

    while (!converged && !stalled && iters < cfg.max_iters) {
      ++iters;
      Eigen::MatrixXd jac(nfree, nfree);
      const Eigen::VectorXd gvec = g.vec();
      for (Eigen::Index k = 0; k < nfree; ++k) {
        const double step = 1e-7 * (1.0 + std::fabs(theta[k]));
        Eigen::VectorXd th = theta;
        th[k] += step;
        jac.col(k) = (eval(th).vec() - gvec) / step;
      }
      if (!jac.allFinite()) {
        stalled = true;
        break;
      }
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd jtg = jac.transpose() * gvec;

      bool accepted = false;
      for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
        Eigen::MatrixXd damped = jtj;
        damped.diagonal().array() += mu;
        Eigen::VectorXd step = damped.ldlt().solve(-jtg);
        if (!step.allFinite()) {
          mu *= 10.0;
          continue;
        }
        const double sn = step.norm();
        if (sn > detail::kStepCap) step *= detail::kStepCap / sn;
        const ScoreValue gt = eval(theta + step);
        if (gt.g.allFinite() && gt.squared_norm() < g.squared_norm()) {
          theta += step;
          g = gt;
          mu = std::max(mu * 0.3, 1e-12);
          accepted = true;
        } else {
          mu *= 10.0;
        }
      }
      if (!accepted) {
        stalled = true;
        break;
      }
      converged = g.sup_norm() <= cfg.score_tol;
    }

    detail::Candidate final;
    final.param = IndexParam::from_vector(p, d, theta);
    final.h = h;
    final.score = g;
    final.norm2 = g.squared_norm();
    final.loss =
        detail::pseudo_loss(data, final.param.indices(data.covariates), h, b,
                            cfg.index_kernel, cfg.time_family);

    if (!have_best || final.loss < best_final.loss) {
      have_best = true;
      best_converged = converged;
      best_final = final;
      best_bw.h = h;
      best_bw.b = b;
      best_iters = iters;
    }

    if (converged) {
      if (final.loss <= pool_min_loss + detail::kLossSlack) {
        res.param = final.param;
        res.score = final.score;
        res.bandwidths.h = h;
        res.bandwidths.b = b;
        res.iterations = iters;
        res.converged = true;
        for (const auto& w : res.bandwidths.validate(d))
          res.warnings.push_back(w);
        return res;
      }
      res.warnings.push_back(
          "converged root rejected: pseudo-likelihood worse than the best start");
    }
  }

  res.param = best_final.param;
  res.score = best_final.score;
  res.bandwidths = best_bw;
  res.iterations = best_iters;
  res.converged = best_converged;
  if (!res.converged)
    res.warnings.push_back("no acceptable root reached the score tolerance");
  for (const auto& w : res.bandwidths.validate(d))
    res.warnings.push_back(w);
  return res;
}

}  // namespace censdr
