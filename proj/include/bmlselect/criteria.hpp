#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bmlselect/covariance.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/model_core.hpp"

namespace bmlselect {

// Every criterion is scored on the -2 log-likelihood scale: lower is better.
enum class Criterion { ic_pi1, ic_pi1_star, ic_pi2, ic_r, ic_r_star, ric, aic, bic, dic, ml };

inline constexpr std::array<Criterion, 10> kAllCriteria = {
    Criterion::ic_pi1, Criterion::ic_pi1_star, Criterion::ic_pi2, Criterion::ic_r, Criterion::ic_r_star,
    Criterion::ric,    Criterion::aic,         Criterion::bic,    Criterion::dic,  Criterion::ml};

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::ic_pi1: return "ic_pi1";
    case Criterion::ic_pi1_star: return "ic_pi1_star";
    case Criterion::ic_pi2: return "ic_pi2";
    case Criterion::ic_r: return "ic_r";
    case Criterion::ic_r_star: return "ic_r_star";
    case Criterion::ric: return "ric";
    case Criterion::aic: return "aic";
    case Criterion::bic: return "bic";
    case Criterion::dic: return "dic";
    case Criterion::ml: return "ml";
  }
  return "";
}

inline std::optional<Criterion> parse_criterion(std::string_view name) {
  for (Criterion c : kAllCriteria)
    if (to_string(c) == name) return c;
  return std::nullopt;
}

/// Criteria built on the normal prior N(0, sigma^2 W) need a resolved lambda.
inline bool requires_prior(Criterion c) {
  return c == Criterion::ic_pi1 || c == Criterion::ic_pi1_star || c == Criterion::dic || c == Criterion::ml;
}

struct CriterionScore {
  Criterion criterion;
  double value;
  CandidateModel candidate;
};

namespace detail {

inline int penalty_denominator(const WhitenedFit& fit) {
  const int d = fit.n - fit.p - 2;
  if (d <= 0)
    throw NumericalError(ErrorKind::penalty_undefined,
                         "n - p - 2 = " + std::to_string(d) + " <= 0 (n = " + std::to_string(fit.n) +
                             ", p = " + std::to_string(fit.p) + ")");
  return d;
}

inline double ml_fit_term(const WhitenedFit& fit) {
  require_positive_variance(fit, fit.sigma2_hat, "sigma2_hat = 0");
  return fit.n * (kLog2Pi + std::log(fit.sigma2_hat)) + fit.logdet_v;
}

inline double reml_fit_term(const WhitenedFit& fit) {
  if (fit.p >= fit.n) throw NumericalError(ErrorKind::saturated_model, "p >= n");
  require_positive_variance(fit, fit.sigma2_tilde, "sigma2_tilde = 0");
  return (fit.n - fit.p) * (kLog2Pi + std::log(fit.sigma2_tilde)) + fit.logdet_v;
}

inline double log_n(const WhitenedFit& fit) { return std::log(static_cast<double>(fit.n)); }

}  // namespace detail

/// Marginal likelihood criterion: -2 log f_pi(y | sigma2_hat).
inline double ml(const WhitenedFit& fit) { return neg2_log_marginal(fit); }

/// Unbiased estimator of the frequentist KL information of f_pi:
/// -2 log f_pi(y | sigma2_hat) + 2n / (n - p - 2).
inline double ic_pi1(const WhitenedFit& fit) {
  const int d = detail::penalty_denominator(fit);
  return neg2_log_marginal(fit) + 2.0 * fit.n / d;
}

/// Large-n form of ic_pi1, replacing log|WX'V^-1X + I| by p log n.
inline double ic_pi1_star(const WhitenedFit& fit) {
  if (!fit.yay) throw NumericalError(ErrorKind::invalid_argument, "ic_pi1_star requires a prior scale");
  return detail::ml_fit_term(fit) + fit.p * detail::log_n(fit) + 2.0 + *fit.yay / fit.sigma2_hat;
}

/// Prior-averaged large-n criterion; matches the consistent AIC penalty p log n + p.
inline double ic_pi2(const WhitenedFit& fit) {
  return detail::ml_fit_term(fit) + fit.p * detail::log_n(fit) + fit.p;
}

/// Uniform-prior (residual likelihood) criterion:
/// -2 log f_r(y | sigma2_tilde) + 2(n - p) / (n - p - 2).
inline double ic_r(const WhitenedFit& fit) {
  const int d = detail::penalty_denominator(fit);
  return neg2_log_residual(fit) + 2.0 * (fit.n - fit.p) / d;
}

inline double ic_r_star(const WhitenedFit& fit) {
  const int d = detail::penalty_denominator(fit);
  const double dof = fit.n - fit.p;
  return detail::reml_fit_term(fit) + fit.p * detail::log_n(fit) + dof * dof / d;
}

/// Residual information criterion, via IC*_r = RIC + n + 2 - p log(2 pi sigma2_tilde).
inline double ric(const WhitenedFit& fit) {
  const double star = ic_r_star(fit);
  return star - (fit.n + 2.0) + fit.p * (kLog2Pi + std::log(fit.sigma2_tilde));
}

/// n log(2 pi sigma2_hat) + log|V| + n + 2(p + 1). The GLS residual sum of
/// squares and log|V| generalise the V = I form.
inline double aic(const WhitenedFit& fit) { return detail::ml_fit_term(fit) + fit.n + 2.0 * (fit.p + 1); }

inline double bic(const WhitenedFit& fit) {
  return detail::ml_fit_term(fit) + fit.n + fit.p * detail::log_n(fit);
}

/// Pieces of DIC(sigma2_hat) under beta | y ~ N(beta_tilde, sigma2_hat (G + W^-1)^-1).
struct DicTerms {
  Eigen::VectorXd beta_tilde;
  double expected_deviance = 0.0;  // E_{beta|y}[D(beta)]
  double deviance_at_mean = 0.0;   // D(beta_tilde)
  double effective_dimension = 0.0;  // tr(G (G + W^-1)^-1)
  double value = 0.0;              // 2 E[D] - D(beta_tilde)
};

/// Closed-form DIC with the full Gaussian deviance
/// D(beta) = n log(2 pi sigma^2) + log|V| + (y - X beta)'V^-1(y - X beta) / sigma^2
/// evaluated at sigma^2 = sigma2_hat. Constants are kept because sigma2_hat
/// differs between candidates.
inline DicTerms dic_terms(const WhitenedFit& fit, const WhitenedData& w, const CandidateModel& model,
                          const PriorScale& prior) {
  const double base = detail::ml_fit_term(fit);
  DicTerms out;
  if (model.empty()) {
    out.deviance_at_mean = base + w.yty / fit.sigma2_hat;
    out.expected_deviance = out.deviance_at_mean;
    out.value = out.deviance_at_mean;
    return out;
  }
  const Eigen::MatrixXd xj = w.columns(model);
  const Eigen::MatrixXd gram = xj.transpose() * xj;
  const Eigen::LLT<Eigen::MatrixXd> llt(gram + prior_precision(prior, gram));
  if (llt.info() != Eigen::Success)
    throw NumericalError(ErrorKind::singular_design, "posterior precision of " + model.to_string());
  out.beta_tilde = llt.solve(xj.transpose() * w.y);
  const double rss_tilde = (w.y - xj * out.beta_tilde).squaredNorm();
  out.effective_dimension = llt.solve(gram).trace();
  out.deviance_at_mean = base + rss_tilde / fit.sigma2_hat;
  out.expected_deviance = out.deviance_at_mean + out.effective_dimension;
  out.value = 2.0 * out.expected_deviance - out.deviance_at_mean;
  return out;
}

inline double dic(const WhitenedFit& fit, const WhitenedData& w, const CandidateModel& model,
                  const PriorScale& prior) {
  return dic_terms(fit, w, model, prior).value;
}

/// Scores one criterion. Prior-based criteria need `prior` with lambda set;
/// the fit must have been computed with that same prior.
inline double score(Criterion c, const WhitenedFit& fit, const WhitenedData& w, const CandidateModel& model,
                    const std::optional<PriorScale>& prior) {
  if (requires_prior(c) && !prior)
    throw NumericalError(ErrorKind::invalid_argument, std::string(to_string(c)) + " requires a prior scale");
  switch (c) {
    case Criterion::ic_pi1: return ic_pi1(fit);
    case Criterion::ic_pi1_star: return ic_pi1_star(fit);
    case Criterion::ic_pi2: return ic_pi2(fit);
    case Criterion::ic_r: return ic_r(fit);
    case Criterion::ic_r_star: return ic_r_star(fit);
    case Criterion::ric: return ric(fit);
    case Criterion::aic: return aic(fit);
    case Criterion::bic: return bic(fit);
    case Criterion::dic: return dic(fit, w, model, *prior);
    case Criterion::ml: return ml(fit);
  }
  return 0.0;
}

}  // namespace bmlselect
