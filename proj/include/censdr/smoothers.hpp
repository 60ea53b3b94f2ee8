// Kernel-weighted at-risk sums on the index scale.
//
// Everything downstream (cumulative hazard, hazard density, estimating
// equation) reduces to sums of the form
//
//   D(z, v)  = sum_j 1{Z_j >= z} K_h(u_j - v)
//   N(z, v)  = sum_j A_j 1{Z_j >= z} K_h(u_j - v)
//   S(v)     = sum_j K_h(u_j - v)
//
// over all observations j, where u_j is the d-vector index of
// observation j and A_j an optional payload row (covariates or a
// transformation of them). A Profile fixes v and precomputes these sums
// for every threshold z = Z_j at once: observations are sorted by Z
// descending with ties grouped, so each D(Z_j, v) is a prefix sum and
// an arbitrary-z query is one binary search. Building a profile is
// O(n (d + q)); querying it is O(1) per risk value.
//
// A profile can exclude one observation from every sum. Evaluating a
// smoother at an observation's own point with itself included is
// degenerate: as the index spreads relative to h, each self term comes
// to dominate its own sums, every residual collapses to zero exactly,
// and the estimating equation acquires artificial roots. Downstream
// score evaluation therefore always excludes the observation it is
// evaluating at (the leave-one-out form).
//
// Risk denominators can underflow to zero when v sits far from every
// index or z exceeds every observed time with kernel mass. Divisions
// floor the denominator and count the event instead of propagating
// infinities.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "censdr/index_param.hpp"
#include "censdr/kernels.hpp"
#include "censdr/survdata.hpp"

namespace censdr {

inline constexpr double kDenomFloor = 1e-300;

struct SmoothDiagnostics {
  long floored_risk_sums = 0;
  long floored_kernel_sums = 0;

  void merge(const SmoothDiagnostics& other) {
    floored_risk_sums += other.floored_risk_sums;
    floored_kernel_sums += other.floored_kernel_sums;
  }
};

class LocalSmoother;

// All at-risk sums at a fixed index-space point v. Each profile keeps
// its own flooring counters so profiles built in parallel never touch
// shared state.
class Profile {
 public:
  // K_h(u_j - v) per observation j.
  const Eigen::VectorXd& kernel_weights() const { return k_; }
  double kernel_sum() const { return kernel_sum_; }

  // d/dv K_h(u_j - v), row j. Only present when built with gradients.
  const Eigen::MatrixXd& kernel_weight_grads() const { return kgrad_; }

  // D(Z_j, v) per observation j, floored away from zero.
  const Eigen::VectorXd& risk() const { return risk_; }
  // d/dv D(Z_j, v), row j.
  const Eigen::MatrixXd& risk_grad() const { return riskgrad_; }
  // N(Z_j, v), row j.
  const Eigen::MatrixXd& payload_risk() const { return payload_risk_; }

  double risk_at(double z) const { return floor_risk(prefix_k_[cut(z)]); }

  Eigen::VectorXd risk_grad_at(double z) const {
    return prefix_grad_.row(cut(z)).transpose();
  }

  Eigen::VectorXd payload_risk_at(double z) const {
    return prefix_payload_.row(cut(z)).transpose();
  }

  bool has_grads() const { return kgrad_.size() > 0; }
  bool has_payload() const { return prefix_payload_.size() > 0; }

  const SmoothDiagnostics& diagnostics() const { return diag_; }

 private:
  friend class LocalSmoother;

  // Number of tie groups with group time >= z.
  Eigen::Index cut(double z) const {
    auto it = std::partition_point(group_z_.begin(), group_z_.end(),
                                   [z](double gz) { return gz >= z; });
    return static_cast<Eigen::Index>(it - group_z_.begin());
  }

  double floor_risk(double value) const {
    if (value < kDenomFloor) {
      ++diag_.floored_risk_sums;
      return kDenomFloor;
    }
    return value;
  }

  Eigen::VectorXd k_;
  double kernel_sum_ = 0.0;
  Eigen::MatrixXd kgrad_;
  Eigen::VectorXd risk_;
  Eigen::MatrixXd riskgrad_;
  Eigen::MatrixXd payload_risk_;

  // Tie-grouped prefix sums in Z-descending order; row g holds the sum
  // over the g largest-time groups, row 0 is empty.
  std::vector<double> group_z_;
  Eigen::VectorXd prefix_k_;
  Eigen::MatrixXd prefix_grad_;
  Eigen::MatrixXd prefix_payload_;

  mutable SmoothDiagnostics diag_;
};

class LocalSmoother {
 public:
  // indices: n x d, times: n, payload: n x q (pass an empty matrix when
  // no payload sums are needed).
  LocalSmoother(Eigen::MatrixXd indices, Eigen::VectorXd times, double h,
                KernelSpec spec = {},
                Eigen::MatrixXd payload = Eigen::MatrixXd())
      : u_(std::move(indices)),
        z_(std::move(times)),
        a_(std::move(payload)),
        h_(h),
        spec_(spec) {
    const Eigen::Index n = u_.rows();
    if (z_.size() != n)
      throw std::invalid_argument("LocalSmoother: times/indices size mismatch");
    if (a_.size() > 0 && a_.rows() != n)
      throw std::invalid_argument("LocalSmoother: payload row mismatch");
    if (!(h_ > 0.0))
      throw std::invalid_argument("LocalSmoother: bandwidth must be positive");
    spec_.dim = static_cast<int>(u_.cols());

    // Z-descending order with tie groups.
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), Eigen::Index{0});
    std::sort(order_.begin(), order_.end(),
              [this](Eigen::Index a, Eigen::Index b) { return z_[a] > z_[b]; });
    group_of_.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r > 0 && z_[order_[r]] == z_[order_[r - 1]])
        group_of_[order_[r]] = group_of_[order_[r - 1]];
      else
        group_of_[order_[r]] = static_cast<Eigen::Index>(group_z_.size()),
        group_z_.push_back(z_[order_[r]]);
    }
  }

  Eigen::Index n() const { return u_.rows(); }
  Eigen::Index d() const { return u_.cols(); }
  double bandwidth() const { return h_; }
  const Eigen::MatrixXd& indices() const { return u_; }
  const Eigen::VectorXd& times() const { return z_; }

  // exclude >= 0 drops that observation from every sum (leave-one-out).
  Profile profile(const Eigen::VectorXd& v, bool with_grads = false,
                  bool with_payload = false, Eigen::Index exclude = -1) const {
    const Eigen::Index n = u_.rows();
    const Eigen::Index d = u_.cols();
    const Eigen::Index q = a_.cols();
    if (v.size() != d)
      throw std::invalid_argument("Profile: evaluation point dimension");
    if (with_payload && a_.size() == 0)
      throw std::invalid_argument("Profile: no payload configured");
    if (exclude >= n)
      throw std::invalid_argument("Profile: exclude out of range");

    Profile pr;
    pr.group_z_ = group_z_;
    pr.k_.resize(n);
    if (with_grads) pr.kgrad_.resize(n, d);

    if (spec_.family == KernelFamily::gaussian) {
      // Product of gaussians collapses to one exp per pair.
      const double norm_const =
          std::pow(0.3989422804014326779399461, static_cast<double>(d)) *
          std::pow(h_, -static_cast<double>(d));
      const double inv_h2 = 1.0 / (h_ * h_);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::VectorXd w = u_.row(j).transpose() - v;
        const double kj = norm_const * std::exp(-0.5 * inv_h2 * w.squaredNorm());
        pr.k_[j] = kj;
        // d/dv K_h(u_j - v) = K_h * (u_j - v) / h^2 for the gaussian.
        if (with_grads) pr.kgrad_.row(j) = (kj * inv_h2) * w.transpose();
      }
    } else {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::VectorXd w = u_.row(j).transpose() - v;
        pr.k_[j] = scaled_kernel(w, h_, spec_);
        if (with_grads)
          pr.kgrad_.row(j) = -scaled_kernel_grad(w, h_, spec_).transpose();
      }
    }
    // The excluded observation vanishes from every downstream sum: its
    // kernel weight carries it into the prefixes, the payload rows, and
    // the event weights alike.
    if (exclude >= 0) {
      pr.k_[exclude] = 0.0;
      if (with_grads) pr.kgrad_.row(exclude).setZero();
    }
    pr.kernel_sum_ = pr.k_.sum();

    // Prefix sums over tie groups, largest times first.
    const Eigen::Index ngroups = static_cast<Eigen::Index>(group_z_.size());
    pr.prefix_k_ = Eigen::VectorXd::Zero(ngroups + 1);
    if (with_grads) pr.prefix_grad_ = Eigen::MatrixXd::Zero(ngroups + 1, d);
    if (with_payload)
      pr.prefix_payload_ = Eigen::MatrixXd::Zero(ngroups + 1, q);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index j = order_[r];
      const Eigen::Index g = group_of_[j] + 1;
      pr.prefix_k_[g] += pr.k_[j];
      if (with_grads) pr.prefix_grad_.row(g) += pr.kgrad_.row(j);
      if (with_payload) pr.prefix_payload_.row(g) += pr.k_[j] * a_.row(j);
    }
    for (Eigen::Index g = 1; g <= ngroups; ++g) {
      pr.prefix_k_[g] += pr.prefix_k_[g - 1];
      if (with_grads) pr.prefix_grad_.row(g) += pr.prefix_grad_.row(g - 1);
      if (with_payload)
        pr.prefix_payload_.row(g) += pr.prefix_payload_.row(g - 1);
    }

    pr.risk_.resize(n);
    if (with_grads) pr.riskgrad_.resize(n, d);
    if (with_payload) pr.payload_risk_.resize(n, q);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index g = group_of_[j] + 1;
      pr.risk_[j] = pr.floor_risk(pr.prefix_k_[g]);
      if (with_grads) pr.riskgrad_.row(j) = pr.prefix_grad_.row(g);
      if (with_payload) pr.payload_risk_.row(j) = pr.prefix_payload_.row(g);
    }
    return pr;
  }

  // E{ Y(z) | index = v }: kernel-weighted at-risk fraction.
  double cond_exp_y(double z, const Eigen::VectorXd& v) const {
    Profile pr = profile(v);
    const double num = pr.risk_at(z);
    double s = pr.kernel_sum();
    if (s < kDenomFloor) {
      ++pr.diag_.floored_kernel_sums;
      s = kDenomFloor;
    }
    diag.merge(pr.diagnostics());
    return num / s;
  }

  // E{ A Y(z) | index = v }.
  Eigen::VectorXd cond_exp_ay(double z, const Eigen::VectorXd& v) const {
    Profile pr = profile(v, false, true);
    const Eigen::VectorXd num = pr.payload_risk_at(z);
    double s = pr.kernel_sum();
    if (s < kDenomFloor) {
      ++pr.diag_.floored_kernel_sums;
      s = kDenomFloor;
    }
    diag.merge(pr.diagnostics());
    return num / s;
  }

  // E{ A Y(z) | v } / E{ Y(z) | v }: mean payload among those still at
  // risk at z, locally at v. The marginal kernel sum cancels.
  Eigen::VectorXd at_risk_mean(double z, const Eigen::VectorXd& v) const {
    Profile pr = profile(v, false, true);
    const Eigen::VectorXd out = pr.payload_risk_at(z) / pr.risk_at(z);
    diag.merge(pr.diagnostics());
    return out;
  }

  struct CondExpGrads {
    Eigen::VectorXd ey_grad;   // d/dv of E{Y(z)|v}, length d
    Eigen::MatrixXd eay_grad;  // d/dv of E{A Y(z)|v}, q x d
  };

  // Analytic quotient-rule gradients of the two conditional
  // expectations with respect to the evaluation point v. Direct
  // summation; this is the reference path, used at grid points.
  CondExpGrads cond_exp_grads(double z, const Eigen::VectorXd& v) const {
    const Eigen::Index n = u_.rows();
    const Eigen::Index d = u_.cols();
    const Eigen::Index q = a_.cols();
    if (v.size() != d)
      throw std::invalid_argument("cond_exp_grads: evaluation point dimension");
    double s = 0.0, dd = 0.0;
    Eigen::VectorXd sg = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd dg = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd nn = Eigen::VectorXd::Zero(q);
    Eigen::MatrixXd ng = Eigen::MatrixXd::Zero(q, d);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd w = u_.row(j).transpose() - v;
      const double kj = scaled_kernel(w, h_, spec_);
      // d/dv K_h(u_j - v) flips the sign of the kernel-argument gradient.
      const Eigen::VectorXd gj = -scaled_kernel_grad(w, h_, spec_);
      s += kj;
      sg += gj;
      if (z_[j] >= z) {
        dd += kj;
        dg += gj;
        if (q > 0) {
          nn += kj * a_.row(j).transpose();
          ng += a_.row(j).transpose() * gj.transpose();
        }
      }
    }
    if (s < kDenomFloor) {
      ++diag.floored_kernel_sums;
      s = kDenomFloor;
    }
    CondExpGrads out;
    // Factored so the floored denominator is never squared (s*s can
    // underflow to zero).
    out.ey_grad = (dg - (dd / s) * sg) / s;
    out.eay_grad = (ng - (nn / s) * sg.transpose()) / s;
    return out;
  }

  mutable SmoothDiagnostics diag;

 private:
  Eigen::MatrixXd u_;
  Eigen::VectorXd z_;
  Eigen::MatrixXd a_;
  double h_;
  KernelSpec spec_;
  std::vector<Eigen::Index> order_;
  std::vector<Eigen::Index> group_of_;
  std::vector<double> group_z_;
};

// Conditional at-risk expectations evaluated at every observation's own
// (Z_i, index_i), the form the estimating equation consumes. X_l is the
// block of covariates matched to the free index coefficients.
struct AtRiskSmooth {
  Eigen::VectorXd ey;     // E{Y_i(Z_i) | index_i}
  Eigen::MatrixXd exy;    // E{X_li Y_i(Z_i) | index_i}, n x (p-d)
  Eigen::MatrixXd ratio;  // exy / ey, rowwise
  SmoothDiagnostics diag;
};

inline AtRiskSmooth at_risk_smooth(const SurvivalDataset& data,
                                   const IndexParam& beta, double h,
                                   KernelSpec spec = {}) {
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.p() - beta.d;
  const Eigen::MatrixXd u = beta.indices(data.covariates);
  const LocalSmoother sm(u, data.times, h, spec,
                         data.covariates.rightCols(q));
  AtRiskSmooth out;
  out.ey.resize(n);
  out.exy.resize(n, q);
  out.ratio.resize(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Profile pr = sm.profile(u.row(i).transpose(), false, true);
    double s = pr.kernel_sum();
    if (s < kDenomFloor) {
      ++out.diag.floored_kernel_sums;
      s = kDenomFloor;
    }
    out.ey[i] = pr.risk()[i] / s;
    out.exy.row(i) = pr.payload_risk().row(i) / s;
    out.ratio.row(i) = pr.payload_risk().row(i) / pr.risk()[i];
    out.diag.merge(pr.diagnostics());
  }
  return out;
}

inline Eigen::VectorXd cond_exp_y(const SurvivalDataset& data,
                                  const IndexParam& beta, double h,
                                  KernelSpec spec = {}) {
  return at_risk_smooth(data, beta, h, spec).ey;
}

inline Eigen::MatrixXd cond_exp_xy(const SurvivalDataset& data,
                                   const IndexParam& beta, double h,
                                   KernelSpec spec = {}) {
  return at_risk_smooth(data, beta, h, spec).exy;
}

// Index-gradients of both smoothers at every observation.
struct CondExpGradsAll {
  Eigen::MatrixXd ey_grad;               // n x d
  std::vector<Eigen::MatrixXd> exy_grad;  // n entries, each (p-d) x d
};

inline CondExpGradsAll cond_exp_grads(const SurvivalDataset& data,
                                      const IndexParam& beta, double h,
                                      KernelSpec spec = {}) {
  const Eigen::Index n = data.n();
  const Eigen::Index q = data.p() - beta.d;
  const Eigen::MatrixXd u = beta.indices(data.covariates);
  const LocalSmoother sm(u, data.times, h, spec,
                         data.covariates.rightCols(q));
  CondExpGradsAll out;
  out.ey_grad.resize(n, beta.d);
  out.exy_grad.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto g = sm.cond_exp_grads(data.times[i], u.row(i).transpose());
    out.ey_grad.row(i) = g.ey_grad.transpose();
    out.exy_grad.push_back(std::move(g.eay_grad));
  }
  return out;
}

}  // namespace censdr
