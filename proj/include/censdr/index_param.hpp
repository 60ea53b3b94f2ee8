// Identified parametrization of the p x d index matrix.
//
// The upper d x d block is pinned to the identity; only the lower
// (p - d) x d block is free. This fixes the usual rotation/scale
// ambiguity of the column span, so two parameter vectors are equal
// iff their index matrices are equal. The free block is vectorized
// column-major: theta[m*(p-d) + k] is entry (k, m) of the free block.

#pragma once

#include <Eigen/Core>
#include <stdexcept>

namespace censdr {

struct IndexParam {
  int p = 0;
  int d = 0;
  // (p - d) x d free coefficients below the identity block.
  Eigen::MatrixXd free;

  IndexParam() = default;

  IndexParam(int p_, int d_) : p(p_), d(d_) {
    if (d_ < 1 || p_ <= d_)
      throw std::invalid_argument("IndexParam: need 1 <= d < p");
    free = Eigen::MatrixXd::Zero(p_ - d_, d_);
  }

  static IndexParam from_free(int p_, int d_, const Eigen::MatrixXd& free_) {
    IndexParam ip(p_, d_);
    if (free_.rows() != p_ - d_ || free_.cols() != d_)
      throw std::invalid_argument("IndexParam: free block shape mismatch");
    ip.free = free_;
    return ip;
  }

  // Expands a column-major vectorization of the free block.
  static IndexParam from_vector(int p_, int d_, const Eigen::VectorXd& theta) {
    IndexParam ip(p_, d_);
    if (theta.size() != static_cast<Eigen::Index>(p_ - d_) * d_)
      throw std::invalid_argument("IndexParam: theta length mismatch");
    ip.free = Eigen::Map<const Eigen::MatrixXd>(theta.data(), p_ - d_, d_);
    return ip;
  }

  Eigen::VectorXd to_vector() const {
    return Eigen::Map<const Eigen::VectorXd>(free.data(), free.size());
  }

  // Full p x d matrix with exact identity upper block.
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd b(p, d);
    b.topRows(d) = Eigen::MatrixXd::Identity(d, d);
    b.bottomRows(p - d) = free;
    return b;
  }

  Eigen::Index n_free() const {
    return static_cast<Eigen::Index>(p - d) * d;
  }

  // n x d matrix of indices beta' x_i for each row of x.
  Eigen::MatrixXd indices(const Eigen::MatrixXd& x) const {
    if (x.cols() != p)
      throw std::invalid_argument("IndexParam: covariate dimension mismatch");
    return x * matrix();
  }
};

}  // namespace censdr
