#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "bmlselect/error.hpp"

namespace bmlselect {

/// Scaled error covariance family V(phi). Every family has unit diagonal
/// except NERM, whose diagonal is 1 + phi.
struct CovarianceSpec {
  enum class Kind { identity, ar1, nerm };

  Kind kind = Kind::identity;
  /// Empty means "unknown, estimate on the full model".
  std::optional<double> phi;
  /// NERM cluster sizes n_1..n_m; must sum to n.
  std::vector<int> group_sizes;

  static CovarianceSpec identity() { return {}; }
  static CovarianceSpec ar1(std::optional<double> phi = std::nullopt) {
    return {Kind::ar1, phi, {}};
  }
  static CovarianceSpec nerm(std::vector<int> groups, std::optional<double> phi = std::nullopt) {
    return {Kind::nerm, phi, std::move(groups)};
  }

  bool needs_phi() const { return kind != Kind::identity; }
  bool phi_known() const { return !needs_phi() || phi.has_value(); }

  CovarianceSpec with_phi(double value) const {
    CovarianceSpec out = *this;
    out.phi = value;
    return out;
  }
};

inline const char* to_string(CovarianceSpec::Kind kind) {
  switch (kind) {
    case CovarianceSpec::Kind::identity: return "identity";
    case CovarianceSpec::Kind::ar1: return "ar1";
    case CovarianceSpec::Kind::nerm: return "nerm";
  }
  return "identity";
}

/// Search bounds used by the full-model phi estimator.
inline constexpr double kAr1PhiBound = 0.99;
inline constexpr double kNermPhiMax = 1e4;

/// Throws parameter_out_of_range unless phi is admissible for the family and
/// the NERM groups partition n.
inline void check_admissible(const CovarianceSpec& spec, int n) {
  if (n < 1) throw NumericalError(ErrorKind::invalid_argument, "n must be positive");
  if (spec.kind == CovarianceSpec::Kind::nerm) {
    if (spec.group_sizes.empty())
      throw NumericalError(ErrorKind::parameter_out_of_range, "nerm requires group sizes");
    long total = 0;
    for (int g : spec.group_sizes) {
      if (g < 1) throw NumericalError(ErrorKind::parameter_out_of_range, "nerm group size must be positive");
      total += g;
    }
    if (total != n)
      throw NumericalError(ErrorKind::parameter_out_of_range,
                           "nerm group sizes sum to " + std::to_string(total) + ", expected n = " +
                               std::to_string(n));
  }
  if (!spec.phi) return;
  const double phi = *spec.phi;
  switch (spec.kind) {
    case CovarianceSpec::Kind::identity:
      break;
    case CovarianceSpec::Kind::ar1:
      if (!std::isfinite(phi) || std::abs(phi) >= 1.0)
        throw NumericalError(ErrorKind::parameter_out_of_range,
                             "ar1 phi must satisfy |phi| < 1, got " + std::to_string(phi));
      break;
    case CovarianceSpec::Kind::nerm:
      if (!std::isfinite(phi) || phi < 0.0)
        throw NumericalError(ErrorKind::parameter_out_of_range,
                             "nerm phi must be >= 0, got " + std::to_string(phi));
      break;
  }
}

/// Dense V(phi) of size n. Used by the generic whitening path and by tests.
inline Eigen::MatrixXd build_v(const CovarianceSpec& spec, int n) {
  check_admissible(spec, n);
  if (spec.needs_phi() && !spec.phi)
    throw NumericalError(ErrorKind::invalid_argument, "phi must be resolved before building V");
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  switch (spec.kind) {
    case CovarianceSpec::Kind::identity:
      break;
    case CovarianceSpec::Kind::ar1: {
      const double phi = *spec.phi;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) v(i, j) = std::pow(phi, std::abs(i - j));
      break;
    }
    case CovarianceSpec::Kind::nerm: {
      const double phi = *spec.phi;
      int start = 0;
      for (int g : spec.group_sizes) {
        v.block(start, start, g, g).array() += phi;
        start += g;
      }
      break;
    }
  }
  return v;
}

/// Prior scale W for the regression coefficients, parameterised through its
/// inverse (the prior precision in units of sigma^-2):
///   ridge:   W = lambda^-1 I_p        =>  W^-1 = lambda I_p
///   zellner: W = (lambda X'V^-1X)^-1  =>  W^-1 = lambda X'V^-1X
/// Zellner uses the whitened Gram matrix, which is X'X when V = I.
struct PriorScale {
  enum class Kind { ridge, zellner };

  Kind kind = Kind::ridge;
  /// Empty means "estimate per candidate by maximising the marginal likelihood".
  std::optional<double> lambda;

  static PriorScale ridge(std::optional<double> lambda = std::nullopt) { return {Kind::ridge, lambda}; }
  static PriorScale zellner(std::optional<double> lambda = std::nullopt) { return {Kind::zellner, lambda}; }

  PriorScale with_lambda(double value) const { return {kind, value}; }
};

inline const char* to_string(PriorScale::Kind kind) {
  return kind == PriorScale::Kind::ridge ? "ridge" : "zellner";
}

inline constexpr double kLambdaMin = 1e-16;
inline constexpr double kLambdaMax = 1e16;

/// W^-1 for a candidate with whitened Gram matrix `gram`.
inline Eigen::MatrixXd prior_precision(const PriorScale& prior, const Eigen::MatrixXd& gram) {
  if (!prior.lambda)
    throw NumericalError(ErrorKind::invalid_argument, "lambda must be resolved before use");
  const double lambda = *prior.lambda;
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw NumericalError(ErrorKind::parameter_out_of_range, "lambda must be positive and finite");
  if (prior.kind == PriorScale::Kind::ridge)
    return lambda * Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  return lambda * gram;
}

}  // namespace bmlselect
