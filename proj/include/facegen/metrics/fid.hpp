#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace facegen::metrics {

/// Gaussian fit of an embedded image set.
struct FeatureMoments {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;  // unbiased covariance
  std::size_t n = 0;

  Eigen::Index dim() const { return mu.size(); }
};

/// Streaming mean / covariance (pairwise-merge Welford). Rows must be added in
/// a fixed order for reproducible sums.
class MomentAccumulator {
 public:
  explicit MomentAccumulator(std::size_t dim);
  void add(std::span<const double> row);
  std::size_t count() const { return n_; }
  /// Throws InvalidArgument with fewer than two rows.
  FeatureMoments finish() const;

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
};

/// n x d row-major feature matrix -> moments. Requires n >= 2.
FeatureMoments compute_moments(const Eigen::MatrixXd& features);

struct SqrtmProduct {
  Eigen::MatrixXd root;  // principal square root of sigma1 * sigma2
  double trace = 0.0;
};

/// (sigma1 sigma2)^{1/2} through the symmetric form
/// sigma1^{1/2} sigma2 sigma1^{1/2}. Negative eigenvalues from round-off are
/// clipped to zero. Throws InvalidArgument on non-finite input.
SqrtmProduct sqrtm_product(const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma2);

/// Squared mean distance plus the covariance trace term, clamped at zero.
double fid(const FeatureMoments& a, const FeatureMoments& b);

}  // namespace facegen::metrics
