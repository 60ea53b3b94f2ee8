// Variance estimation, confidence intervals, subspace distance, and
// sample-split selection of the index count d.
//
// The sample information matrix averages the squared vectorized
// per-event score terms; its inverse over n estimates the covariance of
// the free coefficients. A numerically rank-deficient information
// matrix leaves the standard errors undefined (NaN) and records the
// rank instead of fabricating a pseudo-variance.
//
// Dimension selection splits the sample in half, fits each candidate d
// on one half, scores the fitted hazard on the other half by its
// negative local log-likelihood, and adds a log(n) d (p - d) complexity
// penalty; the smallest penalized loss wins.

#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "censdr/hazard.hpp"
#include "censdr/index_param.hpp"
#include "censdr/normal.hpp"
#include "censdr/rng.hpp"
#include "censdr/score.hpp"
#include "censdr/solver.hpp"
#include "censdr/survdata.hpp"

namespace censdr {

struct EfficientInfo {
  Eigen::MatrixXd info;  // q x q, q = (p-d) d, ordered like ScoreValue::vec
  Eigen::MatrixXd cov;   // info^{-1} / n; NaN when not invertible
  Eigen::VectorXd se;
  bool invertible = false;
  Eigen::Index rank = 0;
};

inline EfficientInfo efficient_info(const SurvivalDataset& data,
                                    const IndexParam& beta_hat,
                                    const Bandwidths& bw,
                                    KernelSpec index_kernel = {},
                                    KernelFamily time_family = KernelFamily::gaussian,
                                    int nthreads = 1) {
  const Eigen::Index n = data.n();
  const Eigen::Index qdim =
      static_cast<Eigen::Index>(data.p() - beta_hat.d) * beta_hat.d;
  const ScoreAssembler assembler(
      data.covariates.rightCols(data.p() - beta_hat.d), data.times,
      data.events, bw.b, index_kernel, time_family, nthreads);
  const ScoreAssembler::EventFactors f =
      assembler.event_factors(beta_hat.indices(data.covariates), bw.h);

  EfficientInfo out;
  out.info = Eigen::MatrixXd::Zero(qdim, qdim);
  for (Eigen::Index k = 0; k < f.r.rows(); ++k) {
    // vec(r w') stacks columns: kron(w, r).
    Eigen::VectorXd term(qdim);
    for (Eigen::Index m = 0; m < f.w.cols(); ++m)
      term.segment(m * f.r.cols(), f.r.cols()) =
          f.w(k, m) * f.r.row(k).transpose();
    out.info.noalias() += term * term.transpose();
  }
  out.info /= static_cast<double>(n);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.info);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double emax = ev.size() ? ev.maxCoeff() : 0.0;
  const double tol = std::max(emax, 0.0) * 1e-12;
  out.rank = (ev.array() > tol).count();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (out.rank < qdim || emax <= 0.0) {
    out.invertible = false;
    out.cov = Eigen::MatrixXd::Constant(qdim, qdim, nan);
    out.se = Eigen::VectorXd::Constant(qdim, nan);
    return out;
  }
  out.invertible = true;
  out.cov = es.eigenvectors() * ev.cwiseInverse().asDiagonal() *
            es.eigenvectors().transpose() / static_cast<double>(n);
  out.se = out.cov.diagonal().cwiseSqrt();
  return out;
}

struct ConfidenceIntervals {
  double level = 0.95;
  Eigen::VectorXd estimate;  // free coefficients, vec order
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

inline ConfidenceIntervals confidence_intervals(const FitResult& fit,
                                                const EfficientInfo& info,
                                                double level = 0.95) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("confidence_intervals: level must be in (0,1)");
  ConfidenceIntervals ci;
  ci.level = level;
  ci.estimate = fit.param.to_vector();
  const double zq = normal_quantile(0.5 * (1.0 + level));
  ci.lower = ci.estimate - zq * info.se;
  ci.upper = ci.estimate + zq * info.se;
  return ci;
}

// Largest singular value of the difference of the two column-space
// projections; 0 iff the spans coincide, 1 when some direction of one
// span is orthogonal to all of the other.
inline double projection_distance(const Eigen::MatrixXd& beta_a,
                                  const Eigen::MatrixXd& beta_b) {
  if (beta_a.rows() != beta_b.rows())
    throw std::invalid_argument("projection_distance: row dimension mismatch");
  auto projector = [](const Eigen::MatrixXd& m) {
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
    if (qr.rank() < m.cols())
      throw std::domain_error("projection_distance: rank-deficient basis");
    const Eigen::MatrixXd thin_q =
        Eigen::HouseholderQR<Eigen::MatrixXd>(m).householderQ() *
        Eigen::MatrixXd::Identity(m.rows(), m.cols());
    return Eigen::MatrixXd(thin_q * thin_q.transpose());
  };
  const Eigen::MatrixXd diff = projector(beta_a) - projector(beta_b);
  // Symmetric, so the largest singular value is the largest |eigenvalue|.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct DimSelection {
  std::vector<double> criterion;  // entry d-1 for candidate d; +inf if failed
  std::vector<double> loss;       // validated negative log-likelihood part
  std::vector<double> penalty;
  std::vector<bool> fit_converged;
  int chosen_d = 0;
  std::vector<std::string> warnings;
};

// Sample-split selection of d over 1..d_max.
inline DimSelection vic_select(const SurvivalDataset& data, int d_max,
                               const FitConfig& base_cfg) {
  const Eigen::Index n = data.n();
  const int p = static_cast<int>(data.p());
  if (d_max < 1 || d_max >= p)
    throw std::invalid_argument("vic_select: need 1 <= d_max < p");

  // Seeded half split; the larger half trains.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  CounterRng rng = CounterRng(base_cfg.seed).derive(0x766963 /* vic */);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(rng.uniform01() *
                                             static_cast<double>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(std::min(j, i))]);
  }
  const Eigen::Index n_train = (n + 1) / 2;
  const Eigen::Index n_val = n - n_train;
  if (n_train < 4 || n_val < 4)
    throw std::invalid_argument("vic_select: sample too small to split");

  auto subset = [&](Eigen::Index lo, Eigen::Index count) {
    SurvivalDataset s;
    s.covariates.resize(count, p);
    s.times.resize(count);
    s.events.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      const Eigen::Index src = perm[static_cast<std::size_t>(lo + i)];
      s.covariates.row(i) = data.covariates.row(src);
      s.times[i] = data.times[src];
      s.events[i] = data.events[src];
    }
    return s;
  };
  const SurvivalDataset train = subset(0, n_train);
  const SurvivalDataset val = subset(n_train, n_val);

  DimSelection out;
  out.criterion.assign(static_cast<std::size_t>(d_max),
                       std::numeric_limits<double>::infinity());
  out.loss = out.criterion;
  out.penalty.assign(static_cast<std::size_t>(d_max), 0.0);
  out.fit_converged.assign(static_cast<std::size_t>(d_max), false);

  const double log_n = std::log(static_cast<double>(n));
  for (int d = 1; d <= d_max; ++d) {
    FitConfig cfg = base_cfg;
    cfg.d = d;
    cfg.seed = CounterRng(base_cfg.seed).derive(static_cast<std::uint64_t>(d)).next_u64();
    cfg.initial_free.reset();
    const std::size_t slot = static_cast<std::size_t>(d - 1);
    out.penalty[slot] = log_n * d * (p - d);
    try {
      const FitResult fr = fit(train, cfg);
      out.fit_converged[slot] = fr.converged;
      if (!fr.converged)
        out.warnings.push_back("d=" + std::to_string(d) +
                               ": fit did not converge; using best value");
      const HazardModel model(fr.param.indices(train.covariates), train.times,
                              train.events, fr.bandwidths, cfg.index_kernel,
                              cfg.time_family);
      const Eigen::MatrixXd u_val = fr.param.indices(val.covariates);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < n_val; ++i) {
        const HazardCurve c = model.curve(u_val.row(i).transpose());
        const double lam = std::max(c.hazard(val.times[i]), kHazardFloor);
        loss -= val.events[i] * std::log(lam) - c.cum_hazard(val.times[i]);
      }
      if (!std::isfinite(loss)) {
        out.warnings.push_back("d=" + std::to_string(d) +
                               ": non-finite validated loss; excluded");
        continue;
      }
      out.loss[slot] = loss;
      out.criterion[slot] = loss + out.penalty[slot];
    } catch (const std::exception& e) {
      out.warnings.push_back("d=" + std::to_string(d) +
                             ": " + e.what() + "; excluded");
    }
  }

  const auto best = std::min_element(out.criterion.begin(), out.criterion.end());
  if (best == out.criterion.end() || !std::isfinite(*best))
    throw std::runtime_error("vic_select: no candidate dimension could be fit");
  out.chosen_d = static_cast<int>(best - out.criterion.begin()) + 1;
  return out;
}

}  // namespace censdr
