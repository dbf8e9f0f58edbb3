#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>

#include "json.hpp"
#include "ztwin/trace.hpp"

namespace ztwin {

// J x (N+1) design matrix: leading intercept column of ones, then the five
// contextual features in fixed order speed, RSRP, RSRQ, SINR, CQI.
using DesignMatrix = Eigen::MatrixXd;
// J x 2 response matrix: columns {uplink, downlink} in Mbps.
using ResponseMatrix = Eigen::MatrixXd;

DesignMatrix make_design(std::span<const ContextSample> samples);
ResponseMatrix make_response(std::span<const ContextSample> samples);

struct FitOptions {
  double tolerance = 0.5;             // residual convergence bound, Mbps
  double condition_threshold = 1e12;  // above this (or on rank loss) apply ridge
  double ridge_scale = 1e-6;          // rho = ridge_scale * trace(X'X)/(N+1)
};

struct Prediction {
  ResponseMatrix rates;    // nonnegative; negatives clamped to zero
  int clamped_count = 0;   // entries clamped
};

// Closed-form multivariate least-squares rate estimator. Solved through a
// column-pivoted QR of the design matrix; the normal-equation inverse appears
// only in test oracles. Immutable once fitted, safe to share across threads.
class RateEstimator {
 public:
  static RateEstimator fit(const DesignMatrix& design, const ResponseMatrix& response,
                           const FitOptions& options = {});

  const Eigen::MatrixXd& coefficients() const { return coefficients_; }  // (N+1) x 2
  const Eigen::Matrix2d& covariance() const { return covariance_; }      // unbiased, 2 x 2
  const Eigen::MatrixXd& residuals() const { return residuals_; }        // J x 2
  double tolerance() const { return tolerance_; }
  bool regularized() const { return regularized_; }
  double ridge_strength() const { return ridge_strength_; }
  bool covariance_defined() const { return covariance_defined_; }  // false when J == N+1

  Prediction predict(const DesignMatrix& design) const;

  double max_abs_residual() const;
  // True iff max |residual| <= tolerance (inclusive bound).
  bool residual_converged() const;

  nlohmann::ordered_json to_json() const;
  static RateEstimator from_json(const nlohmann::ordered_json& j);

 private:
  RateEstimator() = default;

  Eigen::MatrixXd coefficients_;
  Eigen::Matrix2d covariance_ = Eigen::Matrix2d::Zero();
  Eigen::MatrixXd residuals_;
  double tolerance_ = 0.5;
  bool regularized_ = false;
  double ridge_strength_ = 0.0;
  bool covariance_defined_ = false;
};

// (1/(J-N-1)) * (Y - X xi)' (Y - X xi). Requires J > N+1.
Eigen::Matrix2d unbiased_covariance(const RateEstimator& estimator, const DesignMatrix& design,
                                    const ResponseMatrix& response);

// Pluggable regression interface; only the closed-form least-squares model
// ships, alternatives slot in behind the same contract.
class RateModel {
 public:
  virtual ~RateModel() = default;
  virtual void fit(const DesignMatrix& design, const ResponseMatrix& response) = 0;
  virtual Prediction predict(const DesignMatrix& design) const = 0;
  virtual double max_abs_residual() const = 0;
  virtual bool converged() const = 0;
};

class LeastSquaresModel final : public RateModel {
 public:
  explicit LeastSquaresModel(FitOptions options = {}) : options_(options) {}

  void fit(const DesignMatrix& design, const ResponseMatrix& response) override;
  Prediction predict(const DesignMatrix& design) const override;
  double max_abs_residual() const override;
  bool converged() const override;

  const RateEstimator& estimator() const;

 private:
  FitOptions options_;
  std::shared_ptr<const RateEstimator> estimator_;
};

}  // namespace ztwin
