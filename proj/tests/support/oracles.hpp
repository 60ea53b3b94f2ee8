// Independent reference implementations used to freeze expected test
// values: plain double loops, no shared code with the library under
// test beyond Eigen containers.

#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double phi(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Product gaussian kernel with one bandwidth for every coordinate.
inline double kh(const Eigen::VectorXd& w, double h) {
  double out = 1.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) out *= phi(w[j] / h) / h;
  return out;
}

inline double kernel_sum(const Eigen::MatrixXd& u, const Eigen::VectorXd& v,
                         double h) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < u.rows(); ++j)
    s += kh(u.row(j).transpose() - v, h);
  return s;
}

// At-risk kernel mass D(z, v) = sum_{Z_j >= z} K_h(u_j - v).
inline double risk_sum(const Eigen::MatrixXd& u, const Eigen::VectorXd& z,
                       double zq, const Eigen::VectorXd& v, double h) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < u.rows(); ++j)
    if (z[j] >= zq) s += kh(u.row(j).transpose() - v, h);
  return s;
}

// Payload-weighted at-risk mass, one output per payload column.
inline Eigen::VectorXd payload_risk_sum(const Eigen::MatrixXd& u,
                                        const Eigen::VectorXd& z,
                                        const Eigen::MatrixXd& a, double zq,
                                        const Eigen::VectorXd& v, double h) {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(a.cols());
  for (Eigen::Index j = 0; j < u.rows(); ++j)
    if (z[j] >= zq) s += a.row(j).transpose() * kh(u.row(j).transpose() - v, h);
  return s;
}

// Local cumulative hazard: event-time jumps K/D accumulated up to t.
inline double cum_hazard(const Eigen::MatrixXd& u, const Eigen::VectorXd& z,
                         const Eigen::VectorXi& ev, double t,
                         const Eigen::VectorXd& v, double h) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (ev[k] != 1 || z[k] > t) continue;
    const double num = kh(u.row(k).transpose() - v, h);
    const double den = risk_sum(u, z, z[k], v, h);
    s += num / den;
  }
  return s;
}

// Local hazard density: time-kernel smoothed jumps.
inline double hazard(const Eigen::MatrixXd& u, const Eigen::VectorXd& z,
                     const Eigen::VectorXi& ev, double t,
                     const Eigen::VectorXd& v, double h, double b) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (ev[k] != 1) continue;
    const double num = kh(u.row(k).transpose() - v, h);
    const double den = risk_sum(u, z, z[k], v, h);
    s += phi((z[k] - t) / b) / b * num / den;
  }
  return s;
}

// Central finite difference of a scalar field over R^d.
inline Eigen::VectorXd fd_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                               const Eigen::VectorXd& v, double step = 1e-5) {
  Eigen::VectorXd g(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    Eigen::VectorXd hi = v, lo = v;
    hi[j] += step;
    lo[j] -= step;
    g[j] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

// Estimating function assembled term by term; the hazard-ratio weight
// uses finite differences of the naive hazard, so no analytic gradient
// convention is shared with the library.
inline Eigen::MatrixXd efficient_score(const Eigen::MatrixXd& x,
                                       const Eigen::VectorXd& z,
                                       const Eigen::VectorXi& ev,
                                       const Eigen::MatrixXd& beta, double h,
                                       double b, double fd_step = 1e-6) {
  const Eigen::Index n = x.rows(), p = x.cols(), d = beta.cols();
  const Eigen::Index q = p - d;
  const Eigen::MatrixXd u = x * beta;
  const Eigen::MatrixXd xl = x.rightCols(q);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(q, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (ev[i] != 1) continue;
    const Eigen::VectorXd v = u.row(i).transpose();
    const double den = risk_sum(u, z, z[i], v, h);
    const Eigen::VectorXd num = payload_risk_sum(u, z, xl, z[i], v, h);
    const Eigen::VectorXd r = xl.row(i).transpose() - num / den;
    const double lam = hazard(u, z, ev, z[i], v, h, b);
    const Eigen::VectorXd lam1 = fd_grad(
        [&](const Eigen::VectorXd& vv) { return hazard(u, z, ev, z[i], vv, h, b); },
        v, fd_step);
    g += r * (lam1 / lam).transpose();
  }
  return g / static_cast<double>(n);
}

// Largest absolute eigenvalue of a symmetric matrix by power iteration.
inline double spectral_norm_sym(const Eigen::MatrixXd& m, int iters = 5000) {
  if (m.rows() != m.cols()) throw std::invalid_argument("square input only");
  Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows());
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] += 0.01 * static_cast<double>(j);
  v.normalize();
  double lam = 0.0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = m * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    v = w / norm;
    lam = norm;
  }
  return lam;
}

// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::fabs((static_cast<double>(i) + 1.0) / n - f));
    d = std::max(d, std::fabs(static_cast<double>(i) / n - f));
  }
  return d;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace oracle
