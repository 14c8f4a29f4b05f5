#include "upacrl/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "upacrl/errors.hpp"

namespace upacrl {

RegularizedDesign::RegularizedDesign(int dim, double lambda, std::size_t recondition_every)
    : dim_(dim), lambda_(lambda), recondition_every_(recondition_every) {
  if (dim < 1) {
    throw std::invalid_argument("RegularizedDesign: dim must be >= 1, got " + std::to_string(dim));
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("RegularizedDesign: lambda must be positive, got " +
                                std::to_string(lambda));
  }
  if (recondition_every_ == 0) recondition_every_ = kDefaultReconditionEvery;
  cov_ = lambda_ * Matrix::Identity(dim_, dim_);
  cov_inv_ = (1.0 / lambda_) * Matrix::Identity(dim_, dim_);
  target_ = Vector::Zero(dim_);
}

void RegularizedDesign::check_dim(const VectorRef& x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("RegularizedDesign: expected vector of size " +
                                std::to_string(dim_) + ", got " + std::to_string(x.size()));
  }
}

void RegularizedDesign::rank_one_update(const VectorRef& x) {
  check_dim(x);
  const double norm = x.norm();
  if (!(norm <= 1.0 + kNormSlack)) {
    throw std::invalid_argument("RegularizedDesign: update vector norm " + std::to_string(norm) +
                                " exceeds 1");
  }
  cov_.noalias() += x * x.transpose();
  ++count_;
  ++updates_since_recondition_;

  if (updates_since_recondition_ >= recondition_every_) {
    recondition();
    return;
  }
  // Sherman-Morrison: (A + x x^T)^{-1} = A^{-1} - (A^{-1}x)(A^{-1}x)^T / (1 + x^T A^{-1} x).
  const Vector u = cov_inv_ * x;
  const double denom = 1.0 + x.dot(u);
  cov_inv_.noalias() -= (u * u.transpose()) / denom;

  if (norm > 0.0) {
    // O(d^2) probe: cov * (cov_inv * x) should reproduce x.
    const Vector probe = cov_ * (cov_inv_ * x) - x;
    if (probe.cwiseAbs().maxCoeff() > kResidualTolerance * norm) recondition();
  }
}

void RegularizedDesign::accumulate_target(const VectorRef& x, double y) {
  check_dim(x);
  target_.noalias() += y * x;
}

void RegularizedDesign::reset_targets() { target_.setZero(); }

void RegularizedDesign::recondition() {
  Matrix inv = cov_.ldlt().solve(Matrix::Identity(dim_, dim_));
  cov_inv_ = 0.5 * (inv + inv.transpose());
  updates_since_recondition_ = 0;
}

Vector RegularizedDesign::ridge_solve() const { return cov_inv_ * target_; }

double RegularizedDesign::elliptical_norm(const VectorRef& x) const {
  check_dim(x);
  double q = x.dot(cov_inv_ * x);
  if (q >= 0.0) return std::sqrt(q);
  if (q >= -kClampTolerance) return 0.0;
  // The cached inverse drifted; retry against a fresh factorization of cov.
  q = x.dot(cov_.ldlt().solve(x));
  if (q >= 0.0) return std::sqrt(q);
  if (q >= -kClampTolerance) return 0.0;
  throw NumericalError("elliptical_norm: quadratic form " + std::to_string(q) +
                       " is negative after refactorization");
}

double RegularizedDesign::design_norm(const VectorRef& v) const {
  check_dim(v);
  return std::sqrt(std::max(0.0, v.dot(cov_ * v)));
}

double RegularizedDesign::identity_residual() const {
  return (cov_ * cov_inv_ - Matrix::Identity(dim_, dim_)).cwiseAbs().maxCoeff();
}

}  // namespace upacrl
