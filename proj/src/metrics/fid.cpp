#include "facegen/metrics/fid.hpp"

#include <algorithm>
#include <cmath>

#include "facegen/errors.hpp"

namespace facegen::metrics {

MomentAccumulator::MomentAccumulator(std::size_t dim)
    : mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      m2_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

void MomentAccumulator::add(std::span<const double> row) {
  if (static_cast<Eigen::Index>(row.size()) != mean_.size()) {
    throw DimensionMismatch("feature row has wrong dimension");
  }
  const Eigen::Map<const Eigen::VectorXd> x(row.data(), mean_.size());
  ++n_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_.noalias() += delta * (x - mean_).transpose();
}

FeatureMoments MomentAccumulator::finish() const {
  if (n_ < 2) throw InvalidArgument("moments need at least two samples");
  FeatureMoments m;
  m.mu = mean_;
  // symmetrize: the rank-one updates are only symmetric up to round-off
  m.sigma = (m2_ + m2_.transpose()) / (2.0 * static_cast<double>(n_ - 1));
  m.n = n_;
  return m;
}

FeatureMoments compute_moments(const Eigen::MatrixXd& features) {
  MomentAccumulator acc(static_cast<std::size_t>(features.cols()));
  Eigen::VectorXd row(features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    row = features.row(i).transpose();
    acc.add({row.data(), static_cast<std::size_t>(row.size())});
  }
  return acc.finish();
}

SqrtmProduct sqrtm_product(const Eigen::MatrixXd& sigma1, const Eigen::MatrixXd& sigma2) {
  if (sigma1.rows() != sigma1.cols() || sigma1.rows() != sigma2.rows() || sigma2.rows() != sigma2.cols()) {
    throw DimensionMismatch("sqrtm_product: incompatible shapes");
  }
  if (!sigma1.allFinite() || !sigma2.allFinite()) throw InvalidArgument("sqrtm_product: non-finite entries");

  const Eigen::MatrixXd s1 = 0.5 * (sigma1 + sigma1.transpose());
  const Eigen::MatrixXd s2 = 0.5 * (sigma2 + sigma2.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es1(s1);
  const Eigen::VectorXd lam = es1.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd half = lam.cwiseSqrt();
  const double cutoff = 1e-12 * std::max(1.0, lam.maxCoeff());
  Eigen::VectorXd inv_half(half.size());
  for (Eigen::Index i = 0; i < half.size(); ++i) inv_half[i] = lam[i] > cutoff ? 1.0 / half[i] : 0.0;
  const Eigen::MatrixXd& v = es1.eigenvectors();
  const Eigen::MatrixXd s1_half = v * half.asDiagonal() * v.transpose();
  const Eigen::MatrixXd s1_inv_half = v * inv_half.asDiagonal() * v.transpose();

  Eigen::MatrixXd inner = s1_half * s2 * s1_half;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(inner);
  const Eigen::VectorXd inner_ev = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt();

  SqrtmProduct out;
  out.trace = inner_ev.sum();
  const Eigen::MatrixXd inner_root = es2.eigenvectors() * inner_ev.asDiagonal() * es2.eigenvectors().transpose();
  out.root = s1_half * inner_root * s1_inv_half;
  return out;
}

double fid(const FeatureMoments& a, const FeatureMoments& b) {
  if (a.dim() != b.dim() || a.sigma.rows() != b.sigma.rows()) throw DimensionMismatch("fid: feature dimension mismatch");
  if (a.mu == b.mu && a.sigma == b.sigma) return 0.0;
  const double mean_term = (a.mu - b.mu).squaredNorm();
  const double trace_term = a.sigma.trace() + b.sigma.trace() - 2.0 * sqrtm_product(a.sigma, b.sigma).trace;
  return std::max(0.0, mean_term + trace_term);
}

}  // namespace facegen::metrics
