// The estimating equation.
//
// For observation i with event indicator D_i, index u_i and payload row
// a_i (the free-block covariates for the efficient equation, or any
// transformation of them), the sample score is the q x d matrix
//
//   g = (1/n) sum_i D_i r_i w_i'
//
//   r_i = a_i - N(Z_i, u_i) / D(Z_i, u_i)      (at-risk payload residual)
//   w_i = l_grad(Z_i, u_i) / l(Z_i, u_i)       (relative index-sensitivity
//                                               of the hazard density)
//
// Every sum behind r_i and w_i leaves observation i out. Self-inclusive
// sums are degenerate: whenever the index configuration isolates the
// observations relative to h, each self term dominates its own sums,
// r_i collapses to zero exactly, and the equation acquires a manifold
// of artificial roots far from the identified parameter. Leaving i out
// removes the artifact while changing each sum by one O(1/(nh)) term.
//
// A root in the free index coefficients identifies the model. Each
// event term needs all at-risk sums at its own index point, so one
// evaluation costs O(n^2 (d + q)) through the profile machinery.
//
// The hazard density in the denominator of w_i can be tiny when an
// event sits in a sparse index region; the ratio is computed against a
// floored density and the clamp is counted. A clamp share above a few
// percent means the bandwidths are too small for the sample.
//
// Per-event contributions are written to private slots and reduced in
// fixed event order, so results are bitwise reproducible for any thread
// count.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "censdr/hazard.hpp"
#include "censdr/index_param.hpp"
#include "censdr/kernels.hpp"
#include "censdr/smoothers.hpp"
#include "censdr/survdata.hpp"
#include "censdr/threads.hpp"

namespace censdr {

inline constexpr double kHazardFloor = 1e-12;

struct ScoreDiagnostics {
  long event_terms = 0;
  long clamped_hazards = 0;
  long floored_risk_sums = 0;

  double clamp_share() const {
    return event_terms > 0
               ? static_cast<double>(clamped_hazards) / event_terms
               : 0.0;
  }
};

struct ScoreValue {
  Eigen::MatrixXd g;  // q x d: payload rows by index columns
  ScoreDiagnostics diag;

  // Column-major stacking; entry m*q + k is g(k, m).
  Eigen::VectorXd vec() const {
    return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  }
  double sup_norm() const { return g.size() ? g.cwiseAbs().maxCoeff() : 0.0; }
  double squared_norm() const { return g.squaredNorm(); }
};

class ScoreAssembler {
 public:
  // payload: n x q, evaluated once; times/events fixed per dataset. The
  // time bandwidth b is fixed here so the time-kernel weights between
  // every observation and every event can be cached across evaluations.
  ScoreAssembler(Eigen::MatrixXd payload, Eigen::VectorXd times,
                 Eigen::VectorXi events, double b, KernelSpec index_kernel = {},
                 KernelFamily time_family = KernelFamily::gaussian,
                 int nthreads = 1)
      : a_(std::move(payload)),
        z_(std::move(times)),
        events_(std::move(events)),
        b_(b),
        index_kernel_(index_kernel),
        time_family_(time_family),
        nthreads_(nthreads) {
    const Eigen::Index n = z_.size();
    if (a_.rows() != n || events_.size() != n)
      throw std::invalid_argument("ScoreAssembler: input size mismatch");
    if (!(b_ > 0.0))
      throw std::invalid_argument("ScoreAssembler: time bandwidth must be positive");
    for (Eigen::Index j = 0; j < n; ++j)
      if (events_[j] == 1) ev_.push_back(j);
    std::sort(ev_.begin(), ev_.end(),
              [this](Eigen::Index a, Eigen::Index b) { return z_[a] < z_[b]; });
    kb_.resize(n, static_cast<Eigen::Index>(ev_.size()));
    for (std::size_t k = 0; k < ev_.size(); ++k)
      for (Eigen::Index j = 0; j < n; ++j)
        kb_(j, static_cast<Eigen::Index>(k)) =
            time_kernel(z_[j] - z_[ev_[k]], b_, time_family_);
  }

  Eigen::Index n() const { return z_.size(); }
  Eigen::Index n_events() const { return static_cast<Eigen::Index>(ev_.size()); }
  Eigen::Index q() const { return a_.cols(); }
  double time_bandwidth() const { return b_; }

  // Score at the index configuration U (n x d) with index bandwidth h.
  ScoreValue operator()(const Eigen::MatrixXd& U, double h) const {
    const EventFactors f = event_factors(U, h);
    ScoreValue out;
    out.g = f.r.transpose() * f.w / static_cast<double>(z_.size());
    out.diag = f.diag;
    return out;
  }

  // Per-event outer-product factors (r_i, w_i); the score is their
  // averaged outer product and the information matrix their averaged
  // vectorized second moment. Order follows ascending event time.
  struct EventFactors {
    Eigen::MatrixXd r;  // m x q
    Eigen::MatrixXd w;  // m x d
    ScoreDiagnostics diag;
  };

  EventFactors event_factors(const Eigen::MatrixXd& U, double h) const {
    const Eigen::Index d = U.cols();
    const Eigen::Index q = a_.cols();
    const Eigen::Index m = n_events();
    EventFactors out;
    out.r.resize(m, q);
    out.w.resize(m, d);
    if (m == 0) return out;

    Bandwidths bw;
    bw.h = h;
    bw.b = b_;
    const HazardModel model(U, z_, events_, bw, index_kernel_, time_family_, a_);
    std::vector<ScoreDiagnostics> slot_diag(static_cast<std::size_t>(m));
    parallel_for(0, m, nthreads_, [&](long k) {
      const Eigen::Index e = ev_[static_cast<std::size_t>(k)];
      const HazardCurve c = model.curve(U.row(e).transpose(), true, true, e);
      const Profile& pr = c.profile();
      out.r.row(k) =
          a_.row(e) - pr.payload_risk().row(e) / pr.risk()[e];
      const HazardPoint hp = c.hazard_with_grad(kb_.col(k));
      double lam = hp.hazard;
      ScoreDiagnostics& sd = slot_diag[static_cast<std::size_t>(k)];
      sd.event_terms = 1;
      if (lam < kHazardFloor) {
        lam = kHazardFloor;
        sd.clamped_hazards = 1;
      }
      sd.floored_risk_sums = pr.diagnostics().floored_risk_sums;
      out.w.row(k) = (hp.grad / lam).transpose();
    });
    for (const auto& sd : slot_diag) {
      out.diag.event_terms += sd.event_terms;
      out.diag.clamped_hazards += sd.clamped_hazards;
      out.diag.floored_risk_sums += sd.floored_risk_sums;
    }
    return out;
  }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd z_;
  Eigen::VectorXi events_;
  double b_;
  KernelSpec index_kernel_;
  KernelFamily time_family_;
  int nthreads_;
  std::vector<Eigen::Index> ev_;
  Eigen::MatrixXd kb_;  // n x #events cache of K_b(Z_j - Z_event)
};

// The efficient estimating function at a given parameter value.
inline ScoreValue efficient_score(const SurvivalDataset& data,
                                  const IndexParam& beta, const Bandwidths& bw,
                                  KernelSpec index_kernel = {},
                                  KernelFamily time_family = KernelFamily::gaussian,
                                  int nthreads = 1) {
  const ScoreAssembler assembler(data.covariates.rightCols(data.p() - beta.d),
                                 data.times, data.events, bw.b, index_kernel,
                                 time_family, nthreads);
  return assembler(beta.indices(data.covariates), bw.h);
}

// The wider estimating-equation family: an arbitrary index weight
// g_fn(z, index) -> d-vector in place of the hazard ratio, and an
// arbitrary covariate transform a_fn(x_l) -> m-vector in place of X_l.
// Plugging the fitted hazard ratio and the identity back in recovers
// the efficient score.
template <typename GFn, typename AFn>
Eigen::MatrixXd general_score(const SurvivalDataset& data,
                              const IndexParam& beta, const Bandwidths& bw,
                              GFn&& g_fn, AFn&& a_fn,
                              KernelSpec index_kernel = {}) {
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.p() - beta.d;
  const Eigen::MatrixXd u = beta.indices(data.covariates);
  Eigen::MatrixXd payload;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd ai =
        a_fn(Eigen::VectorXd(data.covariates.row(i).tail(q).transpose()));
    if (i == 0) payload.resize(n, ai.size());
    if (ai.size() != payload.cols())
      throw std::invalid_argument("general_score: a_fn output size varies");
    payload.row(i) = ai.transpose();
  }
  const LocalSmoother sm(u, data.times, bw.h, index_kernel, payload);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(payload.cols(), beta.d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.events[i] != 1) continue;
    const Profile pr = sm.profile(u.row(i).transpose(), false, true, i);
    const Eigen::VectorXd r =
        payload.row(i).transpose() -
        pr.payload_risk().row(i).transpose() / pr.risk()[i];
    const Eigen::VectorXd w = g_fn(data.times[i], Eigen::VectorXd(u.row(i).transpose()));
    if (w.size() != beta.d)
      throw std::invalid_argument("general_score: g_fn output size mismatch");
    out += r * w.transpose();
  }
  return out / static_cast<double>(n);
}

}  // namespace censdr
