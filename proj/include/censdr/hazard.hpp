// Local Nelson-Aalen estimation on the index scale.
//
// At a fixed index point v the cumulative hazard of T given index v is
// estimated by the kernel-localized Nelson-Aalen sum
//
//   L(t, v) = sum_k D_k=1, Z_k <= t  K_h(u_k - v) / D(Z_k, v)
//
// and the hazard density by replacing the time indicator with a kernel
//
//   l(t, v) = sum_k D_k=1  K_b(Z_k - t) K_h(u_k - v) / D(Z_k, v).
//
// The index gradient d l / d v follows by differentiating both kernel
// factors in v; it is the numerator of the weight the estimating
// equation puts on each event.
//
// A HazardCurve fixes v: construction is O(n (d + 1)) on top of the
// smoother profile, cumulative hazard queries are O(log n) via a
// prefix over event times, density queries are O(#events).

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "censdr/index_param.hpp"
#include "censdr/kernels.hpp"
#include "censdr/smoothers.hpp"
#include "censdr/survdata.hpp"

namespace censdr {

// K_b(x) = K(x/b)/b for the univariate time kernel.
inline double time_kernel(double x, double b,
                          KernelFamily family = KernelFamily::gaussian) {
  return detail::kernel1(x / b, family) / b;
}

struct HazardPoint {
  double hazard = 0.0;
  Eigen::VectorXd grad;  // d/dv of the hazard density
};

class HazardCurve {
 public:
  double cum_hazard(double t) const {
    auto it = std::upper_bound(ev_z_.begin(), ev_z_.end(), t);
    return ev_wsum_[it - ev_z_.begin()];
  }

  double hazard(double t) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < ev_z_.size(); ++k)
      acc += time_kernel(ev_z_[k] - t, b_, time_family_) * ev_w_[k];
    return acc;
  }

  HazardPoint hazard_with_grad(double t) const {
    HazardPoint out;
    out.grad = Eigen::VectorXd::Zero(ev_g_.cols());
    for (std::size_t k = 0; k < ev_z_.size(); ++k) {
      const double kb = time_kernel(ev_z_[k] - t, b_, time_family_);
      out.hazard += kb * ev_w_[k];
      out.grad += kb * ev_g_.row(static_cast<Eigen::Index>(k)).transpose();
    }
    return out;
  }

  // Fast path for repeated evaluation with precomputed time-kernel
  // weights; kb is indexed by original observation, kb[j] = K_b(Z_j - t).
  HazardPoint hazard_with_grad(const Eigen::VectorXd& kb) const {
    HazardPoint out;
    out.grad = Eigen::VectorXd::Zero(ev_g_.cols());
    for (std::size_t k = 0; k < ev_z_.size(); ++k) {
      const double w = kb[ev_orig_[k]];
      out.hazard += w * ev_w_[k];
      out.grad += w * ev_g_.row(static_cast<Eigen::Index>(k)).transpose();
    }
    return out;
  }

  bool has_grads() const { return ev_g_.size() > 0; }
  const Profile& profile() const { return profile_; }

 private:
  friend class HazardModel;

  Profile profile_;
  double b_ = 0.0;
  KernelFamily time_family_ = KernelFamily::gaussian;

  // Event data in Z-ascending order: original index, time, Nelson-Aalen
  // weight K_h(u_k - v)/D(Z_k, v), its v-gradient, and a prefix of the
  // weights (ev_wsum_[m] sums the first m weights).
  std::vector<Eigen::Index> ev_orig_;
  std::vector<double> ev_z_;
  std::vector<double> ev_w_;
  Eigen::MatrixXd ev_g_;
  std::vector<double> ev_wsum_;
};

class HazardModel {
 public:
  // payload rows ride along in the smoother so the estimating equation
  // can read at-risk payload sums off the same profile.
  HazardModel(Eigen::MatrixXd indices, Eigen::VectorXd times,
              Eigen::VectorXi events, Bandwidths bw, KernelSpec index_kernel = {},
              KernelFamily time_family = KernelFamily::gaussian,
              Eigen::MatrixXd payload = Eigen::MatrixXd())
      : smoother_(std::move(indices), std::move(times), bw.h, index_kernel,
                  std::move(payload)),
        events_(std::move(events)),
        b_(bw.b),
        time_family_(time_family) {
    if (events_.size() != smoother_.n())
      throw std::invalid_argument("HazardModel: events size mismatch");
    if (!(b_ > 0.0))
      throw std::invalid_argument("HazardModel: time bandwidth must be positive");
    for (Eigen::Index j = 0; j < events_.size(); ++j)
      if (events_[j] == 1) event_idx_.push_back(j);
    // Event order fixed ascending in time so cumulative sums are prefixes.
    std::sort(event_idx_.begin(), event_idx_.end(),
              [this](Eigen::Index a, Eigen::Index b) {
                return smoother_.times()[a] < smoother_.times()[b];
              });
  }

  Eigen::Index n() const { return smoother_.n(); }
  Eigen::Index d() const { return smoother_.d(); }
  Eigen::Index n_events() const {
    return static_cast<Eigen::Index>(event_idx_.size());
  }
  const LocalSmoother& smoother() const { return smoother_; }
  const Eigen::VectorXi& events() const { return events_; }
  double time_bandwidth() const { return b_; }

  // exclude >= 0 removes that observation from the profile sums and,
  // when it is an event, from the hazard sum (its weight K/D is zero).
  HazardCurve curve(const Eigen::VectorXd& v, bool with_grads = false,
                    bool with_payload = false, Eigen::Index exclude = -1) const {
    HazardCurve c;
    c.profile_ = smoother_.profile(v, with_grads, with_payload, exclude);
    c.b_ = b_;
    c.time_family_ = time_family_;
    const std::size_t m = event_idx_.size();
    c.ev_orig_.resize(m);
    c.ev_z_.resize(m);
    c.ev_w_.resize(m);
    if (with_grads) c.ev_g_.resize(static_cast<Eigen::Index>(m), d());
    c.ev_wsum_.assign(m + 1, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const Eigen::Index j = event_idx_[k];
      const double dj = c.profile_.risk()[j];
      c.ev_orig_[k] = j;
      c.ev_z_[k] = smoother_.times()[j];
      c.ev_w_[k] = c.profile_.kernel_weights()[j] / dj;
      if (with_grads)
        // d/dv [K_j / D_j] by the quotient rule, factored so the floored
        // denominator is never squared (dj*dj can underflow to zero).
        c.ev_g_.row(static_cast<Eigen::Index>(k)) =
            (c.profile_.kernel_weight_grads().row(j) -
             c.ev_w_[k] * c.profile_.risk_grad().row(j)) /
            dj;
      c.ev_wsum_[k + 1] = c.ev_wsum_[k] + c.ev_w_[k];
    }
    return c;
  }

 private:
  LocalSmoother smoother_;
  Eigen::VectorXi events_;
  double b_;
  KernelFamily time_family_;
  std::vector<Eigen::Index> event_idx_;
};

// Single-point conveniences over a dataset. Each call rebuilds the
// model, so repeated evaluation should construct a HazardModel and hold
// HazardCurve objects instead.
inline double cum_hazard(double z, const Eigen::VectorXd& index,
                         const SurvivalDataset& data, const IndexParam& beta,
                         double h, KernelSpec spec = {}) {
  Bandwidths bw;
  bw.h = h;
  bw.b = 1.0;  // unused by the cumulative hazard
  const HazardModel model(beta.indices(data.covariates), data.times,
                          data.events, bw, spec);
  return model.curve(index).cum_hazard(z);
}

inline double hazard(double z, const Eigen::VectorXd& index,
                     const SurvivalDataset& data, const IndexParam& beta,
                     double h, double b, KernelSpec spec = {},
                     KernelFamily time_family = KernelFamily::gaussian) {
  Bandwidths bw;
  bw.h = h;
  bw.b = b;
  const HazardModel model(beta.indices(data.covariates), data.times,
                          data.events, bw, spec, time_family);
  return model.curve(index).hazard(z);
}

inline Eigen::VectorXd hazard_grad(double z, const Eigen::VectorXd& index,
                                   const SurvivalDataset& data,
                                   const IndexParam& beta, double h, double b,
                                   KernelSpec spec = {},
                                   KernelFamily time_family = KernelFamily::gaussian) {
  Bandwidths bw;
  bw.h = h;
  bw.b = b;
  const HazardModel model(beta.indices(data.covariates), data.times,
                          data.events, bw, spec, time_family);
  return model.curve(index, true).hazard_with_grad(z).grad;
}

}  // namespace censdr
