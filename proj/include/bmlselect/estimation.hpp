#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "bmlselect/covariance.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/model_core.hpp"

namespace bmlselect {

inline constexpr int kSearchGridPoints = 201;
inline constexpr double kSearchTolerance = 1e-8;

struct ScalarSearchResult {
  double argmin = 0.0;
  double value = std::numeric_limits<double>::infinity();
  bool at_boundary = false;
  bool ok = false;  // false when f was non-finite on the whole grid
};

/// Minimises f on [lo, hi]: a uniform grid locates the best cell, then golden
/// section refines inside the two neighbouring grid intervals. Deterministic.
template <class F>
ScalarSearchResult grid_then_golden(F&& f, double lo, double hi, int grid_points = kSearchGridPoints,
                                    double tol = kSearchTolerance) {
  ScalarSearchResult best;
  const double step = (hi - lo) / (grid_points - 1);
  auto grid_at = [&](int k) { return k == grid_points - 1 ? hi : lo + k * step; };
  int best_k = -1;
  for (int k = 0; k < grid_points; ++k) {
    const double value = f(grid_at(k));
    if (std::isfinite(value) && value < best.value) {
      best.value = value;
      best_k = k;
    }
  }
  if (best_k < 0) return best;
  best.ok = true;
  best.argmin = grid_at(best_k);

  double a = grid_at(std::max(best_k - 1, 0));
  double b = grid_at(std::min(best_k + 1, grid_points - 1));
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  auto finite_or_inf = [](double v) { return std::isfinite(v) ? v : std::numeric_limits<double>::infinity(); };
  fc = finite_or_inf(fc);
  fd = finite_or_inf(fd);
  while (b - a > tol * std::max(1.0, std::abs(0.5 * (a + b)))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = finite_or_inf(f(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = finite_or_inf(f(d));
    }
  }
  const double x = 0.5 * (a + b);
  const double fx = finite_or_inf(f(x));
  if (fx <= best.value) {
    best.value = fx;
    best.argmin = x;
  }
  const double edge_tol = 10.0 * tol * std::max(1.0, std::abs(best.argmin));
  best.at_boundary = std::abs(best.argmin - lo) <= edge_tol || std::abs(hi - best.argmin) <= edge_tol;
  return best;
}

/// -2 log f_pi(y | sigma2_hat, lambda) for one candidate as a function of
/// lambda alone. In the eigenbasis of the whitened Gram matrix G the prior
/// terms separate, so one evaluation costs O(p):
///   sum_i log(1 + e_i / lambda) + (y'Py + sum_i w_i lambda / (e_i + lambda)) / sigma2_hat
/// ridge:   e = eig(G), w_i = e_i (Q'beta_hat)_i^2
/// zellner: e_i = 1,    w as above (sum w = beta_hat' G beta_hat)
struct MarginalProfile {
  int n = 0;
  double logdet_v = 0.0;
  double ypy = 0.0;
  double sigma2_hat = 0.0;
  Eigen::VectorXd e;
  Eigen::VectorXd w;

  double operator()(double lambda) const {
    double logdet = 0.0;
    double shrink = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
      logdet += std::log1p(e(i) / lambda);
      shrink += w(i) * lambda / (e(i) + lambda);
    }
    return n * (kLog2Pi + std::log(sigma2_hat)) + logdet_v + logdet + (ypy + shrink) / sigma2_hat;
  }
};

inline MarginalProfile marginal_profile(const WhitenedData& w, const CandidateModel& model, PriorScale::Kind kind) {
  const Eigen::MatrixXd xj = w.columns(model);
  const auto solved = detail::qr_solve(xj, w.y, model);
  MarginalProfile prof;
  prof.n = w.n();
  prof.logdet_v = w.logdet_v;
  prof.ypy = solved.ypy;
  prof.sigma2_hat = solved.ypy / w.n();
  if (!(prof.sigma2_hat > 0.0))
    throw NumericalError(ErrorKind::degenerate_variance, "candidate " + model.to_string());
  if (model.empty()) return prof;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xj.transpose() * xj);
  const Eigen::VectorXd gamma = eig.eigenvectors().transpose() * solved.beta;
  prof.w = eig.eigenvalues().cwiseProduct(gamma.cwiseAbs2());
  prof.e = kind == PriorScale::Kind::ridge ? Eigen::VectorXd(eig.eigenvalues())
                                           : Eigen::VectorXd::Ones(model.size());
  return prof;
}

struct LambdaEstimate {
  double lambda = 1.0;
  bool at_boundary = false;
  double neg2_log_marginal = 0.0;
};

/// Empirical-Bayes prior scale for one candidate: maximises f_pi(y | sigma2_hat,
/// lambda) over lambda in [1e-16, 1e16] with sigma2_hat = y'Py/n held fixed.
/// The search runs on log(lambda).
inline LambdaEstimate estimate_lambda(const WhitenedData& w, const CandidateModel& model, PriorScale::Kind kind) {
  const MarginalProfile prof = marginal_profile(w, model, kind);
  LambdaEstimate out;
  if (model.empty()) {
    // No coefficients, so lambda never enters the likelihood.
    out.neg2_log_marginal = prof(1.0);
    return out;
  }
  auto objective = [&](double log_lambda) { return prof(std::exp(log_lambda)); };
  const auto found = grid_then_golden(objective, std::log(kLambdaMin), std::log(kLambdaMax));
  if (!found.ok)
    throw NumericalError(ErrorKind::lambda_estimation_failed, "candidate " + model.to_string());
  out.lambda = std::clamp(std::exp(found.argmin), kLambdaMin, kLambdaMax);
  out.at_boundary = found.at_boundary;
  out.neg2_log_marginal = found.value;
  return out;
}

/// Profiled full-model Gaussian likelihood in phi, up to constants:
/// n log(y'P(phi)y) + log|V(phi)|.
inline double phi_profile_objective(const Dataset& data, double phi) {
  const WhitenedData w = whiten(data.y, data.x_full, data.cov.with_phi(phi));
  std::vector<int> all(data.p_omega());
  for (int k = 0; k < data.p_omega(); ++k) all[k] = k;
  const CandidateModel full(std::move(all));
  const auto solved = detail::qr_solve(w.x, w.y, full);
  return data.n() * std::log(solved.ypy) + w.logdet_v;
}

struct PhiEstimate {
  double phi = 0.0;
  bool at_boundary = false;
  double objective = 0.0;
};

/// ML estimate of the covariance parameter on the full model. Returns nullopt
/// for the identity family, which has nothing to estimate. AR(1) is searched
/// on [-0.99, 0.99]; NERM on [0, 1e4] through t = log(1 + phi).
inline std::optional<PhiEstimate> estimate_phi_full_model(const Dataset& data) {
  if (!data.cov.needs_phi()) return std::nullopt;
  if (data.p_omega() >= data.n() - 2)
    throw NumericalError(ErrorKind::invalid_argument, "phi estimation needs p_omega < n - 2");
  const bool nerm = data.cov.kind == CovarianceSpec::Kind::nerm;
  auto to_phi = [nerm](double t) { return nerm ? std::expm1(t) : t; };
  auto objective = [&](double t) { return phi_profile_objective(data, to_phi(t)); };
  // Surface a rank-deficient full model as an error rather than a non-finite grid.
  objective(0.0);
  const double lo = nerm ? 0.0 : -kAr1PhiBound;
  const double hi = nerm ? std::log1p(kNermPhiMax) : kAr1PhiBound;
  const auto found = grid_then_golden(objective, lo, hi);
  if (!found.ok) throw NumericalError(ErrorKind::covariance_not_pd, "phi profile non-finite on the whole range");
  return PhiEstimate{to_phi(found.argmin), found.at_boundary, found.value};
}

}  // namespace bmlselect
