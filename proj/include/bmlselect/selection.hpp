#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bmlselect/covariance.hpp"
#include "bmlselect/criteria.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/estimation.hpp"
#include "bmlselect/model_core.hpp"

namespace bmlselect {

inline constexpr int kMaxEnumeratedColumns = 20;

/// The power set of {1..p_omega}, ordered by size then lexicographically.
inline std::vector<CandidateModel> enumerate_candidates(int p_omega, bool include_null = true) {
  if (p_omega < 0) throw NumericalError(ErrorKind::invalid_argument, "p_omega must be non-negative");
  if (p_omega > kMaxEnumeratedColumns)
    throw NumericalError(ErrorKind::candidate_explosion,
                         "p_omega = " + std::to_string(p_omega) + " exceeds " +
                             std::to_string(kMaxEnumeratedColumns) + "; restrict the candidate columns");
  const std::uint32_t total = std::uint32_t{1} << p_omega;
  std::vector<CandidateModel> out;
  out.reserve(total);
  for (std::uint32_t mask = include_null ? 0 : 1; mask < total; ++mask) {
    std::vector<int> idx;
    for (int k = 0; k < p_omega; ++k)
      if (mask & (std::uint32_t{1} << k)) idx.push_back(k);
    out.emplace_back(std::move(idx));
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct SelectionOptions {
  std::vector<Criterion> criteria{kAllCriteria.begin(), kAllCriteria.end()};
  /// Used by prior-based criteria. Without a fixed lambda it is estimated per candidate.
  PriorScale prior = PriorScale::ridge();
  bool include_null = true;
  /// Overrides the power set when set.
  std::optional<std::vector<CandidateModel>> candidates;
};

struct CandidateEvaluation {
  CandidateModel model;
  std::optional<LambdaEstimate> lambda;
  std::optional<WhitenedFit> fit;
  std::vector<std::optional<double>> scores;  // aligned with SelectionRun::criteria
  std::vector<std::string> reasons;           // exclusion reason per criterion, empty when scored
};

struct SelectionReport {
  Criterion criterion = Criterion::ic_pi1;
  std::vector<std::pair<CandidateModel, double>> ranked;  // ascending (score, p_j, indices)
  CandidateModel selected;
  std::vector<std::pair<CandidateModel, std::string>> excluded;
};

struct SelectionRun {
  std::optional<PhiEstimate> phi;
  CovarianceSpec cov;  // with phi resolved
  WhitenedData whitened;
  std::vector<Criterion> criteria;
  std::vector<CandidateEvaluation> candidates;
  std::vector<SelectionReport> reports;  // aligned with criteria

  const SelectionReport& report(Criterion c) const {
    for (std::size_t k = 0; k < criteria.size(); ++k)
      if (criteria[k] == c) return reports[k];
    throw NumericalError(ErrorKind::invalid_argument, std::string(to_string(c)) + " was not requested");
  }
};

/// Scores every candidate under every requested criterion. phi is estimated
/// once on the full model when unknown and shared; lambda is estimated per
/// candidate when not fixed. Candidates that cannot be scored are excluded
/// with a reason rather than failing the run.
inline SelectionRun evaluate_candidates(const Dataset& data, const SelectionOptions& options) {
  validate(data);
  if (options.criteria.empty()) throw NumericalError(ErrorKind::invalid_argument, "no criteria requested");
  SelectionRun run;
  run.criteria = options.criteria;
  run.cov = data.cov;
  if (!data.cov.phi_known()) {
    run.phi = estimate_phi_full_model(data);
    run.cov = data.cov.with_phi(run.phi->phi);
  }
  run.whitened = whiten(data.y, data.x_full, run.cov);

  const bool need_prior = std::any_of(run.criteria.begin(), run.criteria.end(), requires_prior);
  const auto candidates =
      options.candidates ? *options.candidates : enumerate_candidates(data.p_omega(), options.include_null);
  const std::size_t n_crit = run.criteria.size();

  run.candidates.reserve(candidates.size());
  for (const auto& model : candidates) {
    model.check_bounds(data.p_omega());
    CandidateEvaluation eval;
    eval.model = model;
    eval.scores.assign(n_crit, std::nullopt);
    eval.reasons.assign(n_crit, std::string{});
    std::optional<PriorScale> prior;
    try {
      if (need_prior) {
        prior = options.prior;
        if (!prior->lambda) {
          eval.lambda = estimate_lambda(run.whitened, model, prior->kind);
          prior->lambda = eval.lambda->lambda;
        }
      }
      eval.fit = gls_fit(run.whitened, model, prior);
    } catch (const NumericalError& e) {
      for (auto& r : eval.reasons) r = e.what();
      run.candidates.push_back(std::move(eval));
      continue;
    }
    for (std::size_t k = 0; k < n_crit; ++k) {
      try {
        eval.scores[k] = score(run.criteria[k], *eval.fit, run.whitened, model, prior);
      } catch (const NumericalError& e) {
        eval.reasons[k] = e.what();
      }
    }
    run.candidates.push_back(std::move(eval));
  }

  run.reports.resize(n_crit);
  for (std::size_t k = 0; k < n_crit; ++k) {
    SelectionReport& rep = run.reports[k];
    rep.criterion = run.criteria[k];
    for (const auto& eval : run.candidates) {
      if (eval.scores[k])
        rep.ranked.emplace_back(eval.model, *eval.scores[k]);
      else
        rep.excluded.emplace_back(eval.model, eval.reasons[k]);
    }
    std::stable_sort(rep.ranked.begin(), rep.ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second < b.second;
      return a.first < b.first;
    });
    if (rep.ranked.empty())
      throw NumericalError(ErrorKind::no_admissible_candidate, std::string(to_string(rep.criterion)));
    rep.selected = rep.ranked.front().first;
  }
  return run;
}

inline SelectionReport select(const Dataset& data, Criterion criterion, SelectionOptions options = {}) {
  options.criteria = {criterion};
  return evaluate_candidates(data, options).reports.front();
}

/// Known data-generating mean X_* beta_* for prediction-error evaluation.
struct Truth {
  CandidateModel model;
  Eigen::VectorXd beta;  // length model.size()

  Eigen::VectorXd mean(const Eigen::MatrixXd& x_full) const {
    if (model.empty()) return Eigen::VectorXd::Zero(x_full.rows());
    return x_full(Eigen::all, model.indices()) * beta;
  }
};

/// ||X_j beta_hat_j - X_* beta_*||^2 / n with beta_hat_j the GLS estimator
/// under the whitening already applied to `w`.
inline double prediction_error(const CandidateModel& selected, const WhitenedData& w, const Eigen::MatrixXd& x_full,
                               const Eigen::VectorXd& true_mean) {
  if (true_mean.size() != x_full.rows() || x_full.rows() != w.n())
    throw NumericalError(ErrorKind::invalid_argument, "truth dimensions do not conform");
  const double n = static_cast<double>(w.n());
  if (selected.empty()) return true_mean.squaredNorm() / n;
  const auto solved = detail::qr_solve(w.columns(selected), w.y, selected);
  return (x_full(Eigen::all, selected.indices()) * solved.beta - true_mean).squaredNorm() / n;
}

/// Same, whitening with V(phi_hat); phi_hat is ignored for the identity family.
inline double prediction_error(const CandidateModel& selected, const Dataset& data, const Truth& truth,
                               std::optional<double> phi_hat) {
  CovarianceSpec cov = data.cov;
  if (cov.needs_phi()) {
    if (phi_hat) cov.phi = *phi_hat;
    if (!cov.phi) throw NumericalError(ErrorKind::invalid_argument, "phi_hat required for this covariance");
  }
  return prediction_error(selected, whiten(data.y, data.x_full, cov), data.x_full, truth.mean(data.x_full));
}

}  // namespace bmlselect
