#include "ztwin/regressor.hpp"

#include <cmath>
#include <limits>

#include "ztwin/errors.hpp"

namespace ztwin {

DesignMatrix make_design(std::span<const ContextSample> samples) {
  DesignMatrix x(static_cast<Eigen::Index>(samples.size()), kNumFeatures + 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 1.0;
    const auto f = samples[static_cast<std::size_t>(i)].features();
    for (int k = 0; k < kNumFeatures; ++k) x(i, k + 1) = f[static_cast<std::size_t>(k)];
  }
  return x;
}

ResponseMatrix make_response(std::span<const ContextSample> samples) {
  ResponseMatrix y(static_cast<Eigen::Index>(samples.size()), 2);
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    y(i, 0) = s.uplink_rate;
    y(i, 1) = s.downlink_rate;
  }
  return y;
}

RateEstimator RateEstimator::fit(const DesignMatrix& design, const ResponseMatrix& response,
                                 const FitOptions& options) {
  const Eigen::Index rows = design.rows();
  const Eigen::Index cols = design.cols();
  if (response.rows() != rows)
    throw ValidationError("fit: design and response row counts differ");
  if (response.cols() != 2) throw ValidationError("fit: response must have 2 columns");
  if (rows < cols)
    throw EstimationError("fit: underdetermined system, need at least " + std::to_string(cols) +
                          " rows");
  if (!design.allFinite() || !response.allFinite())
    throw ValidationError("fit: non-finite input");

  RateEstimator est;
  est.tolerance_ = options.tolerance;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  const bool rank_deficient = qr.rank() < cols;

  // Condition estimate from the R diagonal of the pivoted factorization.
  double cond = std::numeric_limits<double>::infinity();
  if (!rank_deficient) {
    const auto diag = qr.matrixR().diagonal().head(cols).cwiseAbs();
    cond = diag.maxCoeff() / diag.minCoeff();
  }

  if (rank_deficient || cond > options.condition_threshold) {
    const double rho =
        options.ridge_scale * (design.transpose() * design).trace() / static_cast<double>(cols);
    Eigen::MatrixXd gram = design.transpose() * design;
    gram.diagonal().array() += rho;
    est.coefficients_ = gram.ldlt().solve(design.transpose() * response);
    est.regularized_ = true;
    est.ridge_strength_ = rho;
  } else {
    est.coefficients_ = qr.solve(response);
  }

  est.residuals_ = response - design * est.coefficients_;
  if (rows > cols) {
    est.covariance_ = est.residuals_.transpose() * est.residuals_ /
                      static_cast<double>(rows - cols);
    // symmetrize against round-off
    est.covariance_ = 0.5 * (est.covariance_ + est.covariance_.transpose()).eval();
    est.covariance_defined_ = true;
  }
  return est;
}

Prediction RateEstimator::predict(const DesignMatrix& design) const {
  if (design.cols() != coefficients_.rows())
    throw ValidationError("predict: design column count does not match fitted coefficients");
  Prediction p;
  p.rates = design * coefficients_;
  for (Eigen::Index i = 0; i < p.rates.rows(); ++i)
    for (Eigen::Index k = 0; k < 2; ++k)
      if (p.rates(i, k) < 0.0) {
        p.rates(i, k) = 0.0;
        ++p.clamped_count;
      }
  return p;
}

double RateEstimator::max_abs_residual() const {
  return residuals_.size() == 0 ? 0.0 : residuals_.cwiseAbs().maxCoeff();
}

bool RateEstimator::residual_converged() const { return max_abs_residual() <= tolerance_; }

Eigen::Matrix2d unbiased_covariance(const RateEstimator& estimator, const DesignMatrix& design,
                                    const ResponseMatrix& response) {
  const Eigen::Index rows = design.rows();
  const Eigen::Index cols = design.cols();
  if (rows <= cols)
    throw EstimationError("covariance: needs J > N+1 degrees of freedom");
  if (estimator.coefficients().rows() != cols)
    throw ValidationError("covariance: estimator does not match design");
  const Eigen::MatrixXd resid = response - design * estimator.coefficients();
  Eigen::Matrix2d cov = resid.transpose() * resid / static_cast<double>(rows - cols);
  return 0.5 * (cov + cov.transpose());
}

namespace {

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::ordered_json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = j.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>();
  return m;
}

}  // namespace

nlohmann::ordered_json RateEstimator::to_json() const {
  nlohmann::ordered_json j;
  j["coefficients"] = matrix_to_json(coefficients_);
  j["covariance"] = matrix_to_json(covariance_);
  j["covariance_defined"] = covariance_defined_;
  j["tolerance"] = tolerance_;
  j["regularized"] = regularized_;
  j["ridge_strength"] = ridge_strength_;
  j["max_abs_residual"] = max_abs_residual();
  return j;
}

RateEstimator RateEstimator::from_json(const nlohmann::ordered_json& j) {
  RateEstimator est;
  est.coefficients_ = matrix_from_json(j.at("coefficients"));
  est.covariance_ = matrix_from_json(j.at("covariance"));
  est.covariance_defined_ = j.at("covariance_defined").get<bool>();
  est.tolerance_ = j.at("tolerance").get<double>();
  est.regularized_ = j.at("regularized").get<bool>();
  est.ridge_strength_ = j.at("ridge_strength").get<double>();
  est.residuals_.resize(0, 2);
  return est;
}

void LeastSquaresModel::fit(const DesignMatrix& design, const ResponseMatrix& response) {
  estimator_ = std::make_shared<const RateEstimator>(RateEstimator::fit(design, response, options_));
}

Prediction LeastSquaresModel::predict(const DesignMatrix& design) const {
  return estimator().predict(design);
}

double LeastSquaresModel::max_abs_residual() const { return estimator().max_abs_residual(); }

bool LeastSquaresModel::converged() const { return estimator().residual_converged(); }

const RateEstimator& LeastSquaresModel::estimator() const {
  if (!estimator_) throw EstimationError("least-squares model is not fitted");
  return *estimator_;
}

}  // namespace ztwin
