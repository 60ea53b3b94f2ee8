#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Core>
#include <cmath>

#include "censdr/kernels.hpp"

using censdr::Bandwidths;
using censdr::KernelFamily;
using censdr::KernelSpec;

namespace {

// Trapezoid mass of the scaled 1-d kernel over [-8h, 8h].
double mass_1d(double h, KernelFamily f) {
  const int steps = 80000;
  const double lo = -8.0 * h, hi = 8.0 * h;
  const double dx = (hi - lo) / steps;
  double s = 0.0;
  for (int i = 0; i <= steps; ++i) {
    Eigen::VectorXd v(1);
    v[0] = lo + i * dx;
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    s += w * censdr::scaled_kernel(v, h, {f, 1});
  }
  return s * dx;
}

}  // namespace

TEST_CASE("scaled kernels integrate to one") {
  CHECK_THAT(mass_1d(1.0, KernelFamily::gaussian),
             Catch::Matchers::WithinAbs(1.0, 1e-6));
  CHECK_THAT(mass_1d(0.35, KernelFamily::gaussian),
             Catch::Matchers::WithinAbs(1.0, 1e-6));
  CHECK_THAT(mass_1d(1.0, KernelFamily::epanechnikov),
             Catch::Matchers::WithinAbs(1.0, 1e-6));
  CHECK_THAT(mass_1d(2.5, KernelFamily::epanechnikov),
             Catch::Matchers::WithinAbs(1.0, 1e-6));
}

TEST_CASE("product kernel equals the product of univariate factors") {
  Eigen::VectorXd u(3);
  u << 0.3, -1.1, 0.7;
  const KernelSpec spec{KernelFamily::gaussian, 3};
  double prod = 1.0;
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd one(1);
    one[0] = u[j];
    prod *= censdr::kernel_eval(one, {KernelFamily::gaussian, 1});
  }
  CHECK_THAT(censdr::kernel_eval(u, spec),
             Catch::Matchers::WithinRel(prod, 1e-14));

  // Symmetry in every coordinate.
  CHECK(censdr::kernel_eval(-u, spec) == censdr::kernel_eval(u, spec));
}

TEST_CASE("kernel gradients match central differences") {
  const double step = 1e-6;
  for (KernelFamily f : {KernelFamily::gaussian, KernelFamily::epanechnikov}) {
    Eigen::VectorXd u(2);
    u << 0.4, -0.25;
    const KernelSpec spec{f, 2};
    const Eigen::VectorXd g = censdr::kernel_grad(u, spec);
    for (int j = 0; j < 2; ++j) {
      Eigen::VectorXd hi = u, lo = u;
      hi[j] += step;
      lo[j] -= step;
      const double fd =
          (censdr::kernel_eval(hi, spec) - censdr::kernel_eval(lo, spec)) /
          (2 * step);
      CHECK_THAT(g[j], Catch::Matchers::WithinAbs(fd, 1e-8));
    }
  }
}

TEST_CASE("scaled kernel gradient carries the h^-(d+1) factor") {
  Eigen::VectorXd v(2);
  v << 0.2, 0.5;
  const double h = 0.37;
  const KernelSpec spec{KernelFamily::gaussian, 2};
  const Eigen::VectorXd g = censdr::scaled_kernel_grad(v, h, spec);
  const double step = 1e-6;
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd hi = v, lo = v;
    hi[j] += step;
    lo[j] -= step;
    const double fd = (censdr::scaled_kernel(hi, h, spec) -
                       censdr::scaled_kernel(lo, h, spec)) /
                      (2 * step);
    CHECK_THAT(g[j], Catch::Matchers::WithinAbs(fd, 1e-6));
  }
}

TEST_CASE("epanechnikov gradient is undefined on the support boundary") {
  Eigen::VectorXd u(1);
  u << 1.0;
  CHECK_THROWS_AS(censdr::kernel_grad(u, {KernelFamily::epanechnikov, 1}),
                  std::domain_error);
  u << 1.5;
  CHECK(censdr::kernel_grad(u, {KernelFamily::epanechnikov, 1})[0] == 0.0);
}

TEST_CASE("bandwidth rule follows the documented exponents") {
  Eigen::VectorXd sd(1);
  sd << 2.0;
  const Bandwidths bw = censdr::default_bandwidths(100, 1, sd, 3.0);
  CHECK_THAT(bw.h, Catch::Matchers::WithinRel(
                       std::pow(100.0, -9.0 / 32.0) * 2.0, 1e-14));
  CHECK_THAT(bw.b, Catch::Matchers::WithinRel(
                       std::pow(100.0, -1.0 / 8.0) * 3.0, 1e-14));

  Eigen::VectorXd sd2(2);
  sd2 << 1.0, 4.0;  // geometric mean 2
  const Bandwidths bw2 = censdr::default_bandwidths(100, 2, sd2, 3.0);
  CHECK_THAT(bw2.h, Catch::Matchers::WithinRel(bw.h, 1e-12));

  CHECK_THROWS_AS(censdr::default_bandwidths(1, 1, sd, 3.0),
                  std::invalid_argument);
  Eigen::VectorXd bad(1);
  bad << 0.0;
  CHECK_THROWS_AS(censdr::default_bandwidths(100, 1, bad, 3.0),
                  std::invalid_argument);
}

TEST_CASE("bandwidth validation flags a low moment order") {
  Bandwidths bw;
  bw.h = 0.5;
  bw.b = 0.5;
  bw.nu = 2;
  CHECK(bw.validate(1).empty());
  CHECK(bw.validate(2).empty());
  CHECK_FALSE(bw.validate(3).empty());  // needs 2*nu > d+1

  bw.h = 0.0;
  CHECK_THROWS_AS(bw.validate(1), std::invalid_argument);
}
