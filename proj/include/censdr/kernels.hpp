// Product kernels, their gradients, scaled forms K_h, and the default
// bandwidth rule.
//
// The d-dimensional kernel is the product of d copies of a symmetric
// univariate kernel; the scaled form is K_h(v) = h^{-d} prod_j K(v_j/h)
// applied per coordinate. The gaussian family is the default: it is
// strictly positive, so at-risk denominators never vanish, and smooth,
// so the index gradients exist everywhere. Epanechnikov is offered for
// density-style smoothing only; its gradient is undefined at the support
// boundary |u| = 1.

#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace censdr {

enum class KernelFamily { gaussian, epanechnikov };

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  int dim = 1;
};

namespace detail {

inline double kernel1(double u, KernelFamily f) {
  if (f == KernelFamily::gaussian) {
    static constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * u * u);
  }
  const double a = std::fabs(u);
  return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

inline double kernel1_deriv(double u, KernelFamily f) {
  if (f == KernelFamily::gaussian) return -u * kernel1(u, f);
  const double a = std::fabs(u);
  if (a == 1.0)
    throw std::domain_error(
        "epanechnikov kernel is not differentiable at |u| = 1");
  return a < 1.0 ? -1.5 * u : 0.0;
}

}  // namespace detail

inline double kernel_eval(const Eigen::VectorXd& u, const KernelSpec& spec) {
  double prod = 1.0;
  for (Eigen::Index j = 0; j < u.size(); ++j)
    prod *= detail::kernel1(u[j], spec.family);
  return prod;
}

// Componentwise gradient of the product kernel.
inline Eigen::VectorXd kernel_grad(const Eigen::VectorXd& u,
                                   const KernelSpec& spec) {
  const Eigen::Index d = u.size();
  Eigen::VectorXd vals(d), derivs(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    vals[j] = detail::kernel1(u[j], spec.family);
    derivs[j] = detail::kernel1_deriv(u[j], spec.family);
  }
  Eigen::VectorXd g(d);
  for (Eigen::Index m = 0; m < d; ++m) {
    double prod = derivs[m];
    for (Eigen::Index j = 0; j < d; ++j)
      if (j != m) prod *= vals[j];
    g[m] = prod;
  }
  return g;
}

inline double scaled_kernel(const Eigen::VectorXd& v, double h,
                            const KernelSpec& spec) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
  const double scale = std::pow(h, -static_cast<double>(v.size()));
  return scale * kernel_eval(v / h, spec);
}

// Gradient of K_h; each component scales as h^{-(d+1)}.
inline Eigen::VectorXd scaled_kernel_grad(const Eigen::VectorXd& v, double h,
                                          const KernelSpec& spec) {
  if (!(h > 0.0)) throw std::invalid_argument("bandwidth h must be positive");
  const double scale = std::pow(h, -static_cast<double>(v.size()) - 1.0);
  return scale * kernel_grad(v / h, spec);
}

// Index-space bandwidth h, time bandwidth b, kernel moment order nu.
struct Bandwidths {
  double h = 0.0;
  double b = 0.0;
  int nu = 2;

  // Throws on nonpositive bandwidths; returns human-readable warnings for
  // soft violations (moment order too low for the index dimension).
  std::vector<std::string> validate(int d) const {
    if (!(h > 0.0) || !(b > 0.0))
      throw std::invalid_argument("bandwidths must be positive");
    std::vector<std::string> warnings;
    if (2 * nu <= d + 1)
      warnings.push_back("kernel moment order nu=" + std::to_string(nu) +
                         " too low for d=" + std::to_string(d) +
                         " (need 2*nu > d+1)");
    return warnings;
  }
};

// h = n^(-9/32) * geometric mean of the index standard deviations,
// b = n^(-1/8) * sd of the observed times, nu = 2.
inline Bandwidths default_bandwidths(Eigen::Index n, int d,
                                     const Eigen::VectorXd& sd_index,
                                     double sd_time) {
  if (n < 2) throw std::invalid_argument("default_bandwidths: need n >= 2");
  if (sd_index.size() != d)
    throw std::invalid_argument("default_bandwidths: sd_index size != d");
  if (!(sd_index.minCoeff() > 0.0) || !(sd_time > 0.0))
    throw std::invalid_argument("default_bandwidths: sds must be positive");
  double log_gm = 0.0;
  for (int j = 0; j < d; ++j) log_gm += std::log(sd_index[j]);
  log_gm /= d;
  Bandwidths bw;
  bw.h = std::pow(static_cast<double>(n), -9.0 / 32.0) * std::exp(log_gm);
  bw.b = std::pow(static_cast<double>(n), -1.0 / 8.0) * sd_time;
  bw.nu = 2;
  return bw;
}

}  // namespace censdr
