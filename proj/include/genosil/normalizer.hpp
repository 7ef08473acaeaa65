#pragma once

#include <Eigen/Dense>

#include "genosil/error.hpp"

namespace genosil {

// Per-component affine map x -> (x - center) / half_range. Built from the
// sampler ranges so that in-range values land in [-1, 1].
struct AffineNormalizer {
  Eigen::VectorXd center;
  Eigen::VectorXd half_range;

  static AffineNormalizer identity(Eigen::Index width) {
    return {Eigen::VectorXd::Zero(width), Eigen::VectorXd::Ones(width)};
  }

  static AffineNormalizer from_bounds(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    require(lower.size() == upper.size(), "normalizer bounds must have equal width");
    AffineNormalizer n{0.5 * (lower + upper), 0.5 * (upper - lower)};
    // Pinned ranges (lower == upper) fall back to unit scale.
    for (Eigen::Index i = 0; i < n.half_range.size(); ++i) {
      if (!(n.half_range[i] > 1e-12)) n.half_range[i] = 1.0;
    }
    return n;
  }

  Eigen::Index width() const { return center.size(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    require(x.size() == center.size(), "normalizer width mismatch");
    return (x - center).cwiseQuotient(half_range);
  }

  Eigen::MatrixXd apply_columns(const Eigen::MatrixXd& x) const {
    require(x.rows() == center.size(), "normalizer width mismatch");
    return (x.colwise() - center).array().colwise() / half_range.array();
  }

  Eigen::VectorXd invert(const Eigen::VectorXd& y) const {
    require(y.size() == center.size(), "normalizer width mismatch");
    return y.cwiseProduct(half_range) + center;
  }
};

}  // namespace genosil
