#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/QR>

#include "bmlselect/covariance.hpp"
#include "bmlselect/error.hpp"

namespace bmlselect {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)

/// Relative pivot below which a whitened design column counts as dependent.
inline constexpr double kRankTolerance = 1e-10;

/// Response, full design and error covariance family. Columns are treated
/// symmetrically: no intercept is added or forced.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x_full;
  CovarianceSpec cov;

  int n() const { return static_cast<int>(y.size()); }
  int p_omega() const { return static_cast<int>(x_full.cols()); }
};

/// Shape and finiteness checks. Column rank is not enforced here: selection
/// excludes rank-deficient candidates and the phi estimator checks the full
/// model itself.
inline void validate(const Dataset& data) {
  if (data.n() < 1) throw InputError("dataset has no observations");
  if (data.p_omega() < 1) throw InputError("dataset has no explanatory variables");
  if (data.x_full.rows() != data.y.size())
    throw InputError("design has " + std::to_string(data.x_full.rows()) + " rows but response has " +
                     std::to_string(data.y.size()));
  if (!data.y.allFinite()) throw InputError("response contains non-finite values");
  if (!data.x_full.allFinite()) throw InputError("design contains non-finite values");
  check_admissible(data.cov, data.n());
}

/// A subset j of the full-model columns, stored 0-based and strictly
/// increasing. The empty subset is the null model.
class CandidateModel {
 public:
  CandidateModel() = default;

  explicit CandidateModel(std::vector<int> indices) : indices_(std::move(indices)) {
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (indices_[k] < 0)
        throw NumericalError(ErrorKind::invalid_argument, "candidate index must be non-negative");
      if (k > 0 && indices_[k] <= indices_[k - 1])
        throw NumericalError(ErrorKind::invalid_argument, "candidate indices must be strictly increasing");
    }
  }

  /// Builds from 1-based column numbers (the user-facing convention).
  static CandidateModel from_one_based(std::vector<int> columns) {
    std::sort(columns.begin(), columns.end());
    for (int& c : columns) --c;
    return CandidateModel(std::move(columns));
  }

  const std::vector<int>& indices() const { return indices_; }
  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }

  void check_bounds(int p_omega) const {
    if (!indices_.empty() && indices_.back() >= p_omega)
      throw NumericalError(ErrorKind::invalid_argument,
                           "candidate " + to_string() + " exceeds p_omega = " + std::to_string(p_omega));
  }

  /// 1-based, e.g. "{1,2,4}"; the null model is "{}".
  std::string to_string() const {
    std::string out = "{";
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(indices_[k] + 1);
    }
    return out + "}";
  }

  friend bool operator==(const CandidateModel& a, const CandidateModel& b) { return a.indices_ == b.indices_; }

  /// Size first, then lexicographic: the enumeration and tie-break order.
  friend bool operator<(const CandidateModel& a, const CandidateModel& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a.indices_ < b.indices_;
  }

 private:
  std::vector<int> indices_;
};

/// L^-1 y and L^-1 X_full for a factor V = L L', with log|V|.
struct WhitenedData {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  double logdet_v = 0.0;
  double yty = 0.0;  // y' V^-1 y

  int n() const { return static_cast<int>(y.size()); }
  int p_omega() const { return static_cast<int>(x.cols()); }

  Eigen::MatrixXd columns(const CandidateModel& model) const {
    model.check_bounds(p_omega());
    return x(Eigen::all, model.indices());
  }
};

namespace detail {

/// Applies L^-1 to the rows of `m` in place and returns log|V|. The AR(1)
/// and NERM factors are the exact Cholesky factors of V(phi), applied in
/// O(n) per column (AR(1)) or blockwise (NERM).
inline double apply_inverse_factor(const CovarianceSpec& spec, Eigen::Ref<Eigen::MatrixXd> m) {
  const int n = static_cast<int>(m.rows());
  check_admissible(spec, n);
  if (spec.needs_phi() && !spec.phi)
    throw NumericalError(ErrorKind::invalid_argument, "phi must be resolved before whitening");
  switch (spec.kind) {
    case CovarianceSpec::Kind::identity:
      return 0.0;
    case CovarianceSpec::Kind::ar1: {
      const double phi = *spec.phi;
      const double one_minus = 1.0 - phi * phi;
      if (!(one_minus > 0.0)) throw NumericalError(ErrorKind::covariance_not_pd, "ar1 with |phi| >= 1");
      const double scale = 1.0 / std::sqrt(one_minus);
      for (int i = n - 1; i >= 1; --i) m.row(i) = (m.row(i) - phi * m.row(i - 1)) * scale;
      return (n - 1) * std::log(one_minus);
    }
    case CovarianceSpec::Kind::nerm: {
      const double phi = *spec.phi;
      double logdet = 0.0;
      int start = 0;
      for (int g : spec.group_sizes) {
        Eigen::MatrixXd block = Eigen::MatrixXd::Constant(g, g, phi);
        block.diagonal().array() += 1.0;
        Eigen::LLT<Eigen::MatrixXd> llt(block);
        if (llt.info() != Eigen::Success) throw NumericalError(ErrorKind::covariance_not_pd, "nerm block");
        auto rows = m.middleRows(start, g);
        llt.matrixL().solveInPlace(rows);
        logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
        start += g;
      }
      return logdet;
    }
  }
  return 0.0;
}

inline WhitenedData pack(const Eigen::MatrixXd& combined, double logdet) {
  WhitenedData out;
  out.y = combined.col(0);
  out.x = combined.rightCols(combined.cols() - 1);
  out.logdet_v = logdet;
  out.yty = out.y.squaredNorm();
  return out;
}

}  // namespace detail

/// Whitens response and design by the Cholesky factor of V(phi). phi must be
/// known (estimate it first when the family has a free parameter).
inline WhitenedData whiten(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const CovarianceSpec& cov) {
  Eigen::MatrixXd combined(y.size(), x.cols() + 1);
  combined.col(0) = y;
  combined.rightCols(x.cols()) = x;
  const double logdet = detail::apply_inverse_factor(cov, combined);
  return detail::pack(combined, logdet);
}

inline WhitenedData whiten(const Dataset& data) { return whiten(data.y, data.x_full, data.cov); }

/// Generic path for an arbitrary dense V.
inline WhitenedData whiten(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const Eigen::MatrixXd& v) {
  Eigen::LLT<Eigen::MatrixXd> llt(v);
  if (llt.info() != Eigen::Success || v.rows() != y.size())
    throw NumericalError(ErrorKind::covariance_not_pd, "Cholesky factorisation of V failed");
  Eigen::MatrixXd combined(y.size(), x.cols() + 1);
  combined.col(0) = y;
  combined.rightCols(x.cols()) = x;
  llt.matrixL().solveInPlace(combined);
  return detail::pack(combined, 2.0 * llt.matrixLLT().diagonal().array().log().sum());
}

/// Per-candidate GLS cache. Everything a criterion needs is here.
struct WhitenedFit {
  int p = 0;
  int n = 0;
  Eigen::VectorXd beta_hat;
  double yty = 0.0;                          // y'V^-1y
  double ypy = 0.0;                          // y'Py
  std::optional<double> yay;                 // y'Ay, with a prior only
  double sigma2_hat = 0.0;                   // y'Py / n
  double sigma2_tilde = 0.0;                 // y'Py / (n - p); NaN when p >= n
  double logdet_v = 0.0;                     // log|V|
  double logdet_xvx = 0.0;                   // log|X'V^-1X|
  std::optional<double> logdet_wxvx_plus_i;  // log|W X'V^-1X + I_p|, with a prior only
  std::optional<double> lambda;              // prior scale used, if any
};

namespace detail {

struct QrSolve {
  Eigen::VectorXd beta;
  double ypy = 0.0;
  double logdet_gram = 0.0;
};

/// Column-pivoted Householder QR of the whitened candidate design.
inline QrSolve qr_solve(const Eigen::MatrixXd& xj, const Eigen::VectorXd& y, const CandidateModel& model) {
  QrSolve out;
  const int p = static_cast<int>(xj.cols());
  const int n = static_cast<int>(xj.rows());
  if (p == 0) {
    out.ypy = y.squaredNorm();
    return out;
  }
  if (p > n)
    throw NumericalError(ErrorKind::singular_design, "candidate " + model.to_string() + " has more columns than rows");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xj);
  const auto r_diag = qr.matrixQR().diagonal().cwiseAbs();
  const double largest = r_diag(0);
  if (!(largest > 0.0) || r_diag(p - 1) < kRankTolerance * largest)
    throw NumericalError(ErrorKind::singular_design, "candidate " + model.to_string());
  Eigen::VectorXd qty = y;
  qty.applyOnTheLeft(qr.householderQ().transpose());
  out.ypy = qty.tail(n - p).squaredNorm();
  Eigen::VectorXd z = qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(qty.head(p));
  out.beta = qr.colsPermutation() * z;
  out.logdet_gram = 2.0 * r_diag.array().log().sum();
  return out;
}

}  // namespace detail

/// GLS fit of one candidate on whitened data. With a resolved prior scale the
/// marginal-likelihood quantities y'Ay and log|W X'V^-1X + I| are filled in
/// through p x p factorisations; A and P are never formed.
inline WhitenedFit gls_fit(const WhitenedData& w, const CandidateModel& model,
                           const std::optional<PriorScale>& prior = std::nullopt) {
  const Eigen::MatrixXd xj = w.columns(model);
  const auto solved = detail::qr_solve(xj, w.y, model);

  WhitenedFit fit;
  fit.p = model.size();
  fit.n = w.n();
  fit.beta_hat = solved.beta;
  fit.yty = w.yty;
  fit.ypy = solved.ypy;
  fit.sigma2_hat = fit.ypy / fit.n;
  fit.sigma2_tilde = fit.p < fit.n ? fit.ypy / (fit.n - fit.p) : std::numeric_limits<double>::quiet_NaN();
  fit.logdet_v = w.logdet_v;
  fit.logdet_xvx = solved.logdet_gram;

  if (prior) {
    fit.lambda = prior->lambda;
    if (fit.p == 0) {
      fit.yay = w.yty;
      fit.logdet_wxvx_plus_i = 0.0;
      return fit;
    }
    const Eigen::MatrixXd gram = xj.transpose() * xj;
    const Eigen::MatrixXd precision = prior_precision(*prior, gram);
    const Eigen::MatrixXd m = gram + precision;
    Eigen::LLT<Eigen::MatrixXd> llt_m(m);
    Eigen::LLT<Eigen::MatrixXd> llt_p(precision);
    if (llt_m.info() != Eigen::Success || llt_p.info() != Eigen::Success)
      throw NumericalError(ErrorKind::singular_design, "prior-augmented Gram of " + model.to_string());
    // y'Ay = y'Py + b' G (G + W^-1)^-1 W^-1 b, which stays non-negative.
    const Eigen::VectorXd g_beta = gram * fit.beta_hat;
    const Eigen::VectorXd w_beta = precision * fit.beta_hat;
    fit.yay = fit.ypy + g_beta.dot(llt_m.solve(w_beta));
    fit.logdet_wxvx_plus_i = 2.0 * llt_m.matrixLLT().diagonal().array().log().sum() -
                             2.0 * llt_p.matrixLLT().diagonal().array().log().sum();
  }
  return fit;
}

namespace detail {

inline void require_positive_variance(const WhitenedFit& fit, double variance, const char* what) {
  // Householder residuals carry O(eps * |y|) noise, so an interpolating fit
  // leaves a tiny positive y'Py rather than an exact zero.
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor = 1e3 * fit.n * eps * eps * fit.yty;
  if (!(variance > 0.0) || !std::isfinite(variance) || fit.ypy <= floor)
    throw NumericalError(ErrorKind::degenerate_variance, what);
}

}  // namespace detail

/// -2 log f_pi(y | sigma2_hat): the Gaussian marginal likelihood with beta
/// integrated against N(0, sigma^2 W).
inline double neg2_log_marginal(const WhitenedFit& fit) {
  if (!fit.yay || !fit.logdet_wxvx_plus_i)
    throw NumericalError(ErrorKind::invalid_argument, "marginal likelihood requires a prior scale");
  detail::require_positive_variance(fit, fit.sigma2_hat, "sigma2_hat = 0");
  return fit.n * (kLog2Pi + std::log(fit.sigma2_hat)) + fit.logdet_v + *fit.logdet_wxvx_plus_i +
         *fit.yay / fit.sigma2_hat;
}

/// -2 log f_r(y | sigma2_tilde): the residual (REML) likelihood. The last term
/// y'Py / sigma2_tilde is exactly n - p and is emitted as that integer.
inline double neg2_log_residual(const WhitenedFit& fit) {
  if (fit.p >= fit.n)
    throw NumericalError(ErrorKind::saturated_model, "p = " + std::to_string(fit.p) + " >= n");
  detail::require_positive_variance(fit, fit.sigma2_tilde, "sigma2_tilde = 0");
  const int dof = fit.n - fit.p;
  return dof * (kLog2Pi + std::log(fit.sigma2_tilde)) + fit.logdet_v + fit.logdet_xvx + static_cast<double>(dof);
}

}  // namespace bmlselect
