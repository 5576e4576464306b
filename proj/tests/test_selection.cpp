#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "bmlselect/selection.hpp"
#include "bmlselect/simulation.hpp"
#include "oracle.hpp"

using namespace bmlselect;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

bool is_superset(const CandidateModel& m, const std::vector<int>& required) {
  for (int r : required)
    if (std::find(m.indices().begin(), m.indices().end(), r) == m.indices().end()) return false;
  return true;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const NumericalError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no NumericalError thrown";
  return ErrorKind::invalid_argument;
}

}  // namespace

TEST(Enumerate, TwoColumnOrder) {
  const auto all = enumerate_candidates(2);
  ASSERT_EQ(all.size(), 4u);
  EXPECT_EQ(all[0].to_string(), "{}");
  EXPECT_EQ(all[1].to_string(), "{1}");
  EXPECT_EQ(all[2].to_string(), "{2}");
  EXPECT_EQ(all[3].to_string(), "{1,2}");
  const auto no_null = enumerate_candidates(2, false);
  ASSERT_EQ(no_null.size(), 3u);
  EXPECT_EQ(no_null.front().to_string(), "{1}");
}

TEST(Enumerate, SevenColumnsGiveAllSubsets) {
  const auto all = enumerate_candidates(7);
  EXPECT_EQ(all.size(), 128u);
  for (std::size_t k = 1; k < all.size(); ++k) EXPECT_TRUE(all[k - 1] < all[k]);
  EXPECT_EQ(enumerate_candidates(7, false).size(), 127u);
}

TEST(Enumerate, TooManyColumns) {
  EXPECT_EQ(kind_of([] { enumerate_candidates(21); }), ErrorKind::candidate_explosion);
  EXPECT_EQ(kind_of([] { enumerate_candidates(-1); }), ErrorKind::invalid_argument);
}

TEST(Select, NearNoiselessDataRecoverTheActiveColumns) {
  std::mt19937_64 rng(71);
  Dataset d{VectorXd(), oracle::random_normal(30, 4, rng), CovarianceSpec::identity()};
  d.y = d.x_full.col(0) + d.x_full.col(1) + 1e-6 * oracle::random_normal(30, 1, rng);
  const auto run = evaluate_candidates(d, SelectionOptions{});
  for (const auto& rep : run.reports) EXPECT_TRUE(is_superset(rep.selected, {0, 1})) << to_string(rep.criterion);
  for (Criterion c : {Criterion::bic, Criterion::ic_pi1, Criterion::ic_r})
    EXPECT_EQ(run.report(c).selected.to_string(), "{1,2}") << to_string(c);
}

TEST(Select, RankedListIsSortedAndComplete) {
  std::mt19937_64 rng(72);
  Dataset d{VectorXd(), oracle::random_normal(25, 3, rng), CovarianceSpec::ar1(0.3)};
  d.y = d.x_full.col(1) + oracle::random_normal(25, 1, rng);
  const auto run = evaluate_candidates(d, SelectionOptions{});
  for (const auto& rep : run.reports) {
    EXPECT_EQ(rep.ranked.size() + rep.excluded.size(), 8u);
    for (std::size_t k = 1; k < rep.ranked.size(); ++k) EXPECT_LE(rep.ranked[k - 1].second, rep.ranked[k].second);
    EXPECT_EQ(rep.selected, rep.ranked.front().first);
  }
}

TEST(Select, SingleCandidateClass) {
  std::mt19937_64 rng(73);
  Dataset d{VectorXd(), oracle::random_normal(20, 3, rng), CovarianceSpec::identity()};
  d.y = oracle::random_normal(20, 1, rng);
  SelectionOptions opts;
  opts.candidates = std::vector<CandidateModel>{CandidateModel({1})};
  const auto run = evaluate_candidates(d, opts);
  for (const auto& rep : run.reports) {
    ASSERT_EQ(rep.ranked.size(), 1u);
    EXPECT_EQ(rep.selected.to_string(), "{2}");
  }
}

TEST(Select, EstimatesPhiOnceWhenUnknown) {
  std::mt19937_64 rng(74);
  Dataset d{VectorXd(), oracle::random_normal(40, 2, rng), CovarianceSpec::ar1()};
  d.y = d.x_full.col(0) + oracle::random_normal(40, 1, rng);
  const auto run = evaluate_candidates(d, SelectionOptions{});
  ASSERT_TRUE(run.phi.has_value());
  ASSERT_TRUE(run.cov.phi.has_value());
  EXPECT_EQ(*run.cov.phi, run.phi->phi);
}

TEST(Select, DuplicateColumnCandidatesAreExcluded) {
  std::mt19937_64 rng(75);
  MatrixXd x = oracle::random_normal(20, 3, rng);
  x.col(2) = x.col(0);
  Dataset d{x.col(0) + oracle::random_normal(20, 1, rng), x, CovarianceSpec::identity()};
  const auto run = evaluate_candidates(d, SelectionOptions{});
  for (const auto& rep : run.reports) {
    ASSERT_EQ(rep.excluded.size(), 2u) << to_string(rep.criterion);
    EXPECT_EQ(rep.excluded[0].first.to_string(), "{1,3}");
    EXPECT_EQ(rep.excluded[1].first.to_string(), "{1,2,3}");
    EXPECT_NE(rep.excluded[0].second.find("{1,3}"), std::string::npos);
    EXPECT_EQ(rep.ranked.size(), 6u);
  }
}

TEST(Select, NoAdmissibleCandidate) {
  std::mt19937_64 rng(76);
  Dataset d{oracle::random_normal(5, 1, rng), oracle::random_normal(5, 3, rng), CovarianceSpec::identity()};
  SelectionOptions opts;
  opts.criteria = {Criterion::ic_pi1};
  opts.candidates = std::vector<CandidateModel>{CandidateModel({0, 1, 2})};
  EXPECT_EQ(kind_of([&] { evaluate_candidates(d, opts); }), ErrorKind::no_admissible_candidate);
}

TEST(Select, FixedLambdaIsUsedForEveryCandidate) {
  std::mt19937_64 rng(77);
  Dataset d{VectorXd(), oracle::random_normal(20, 2, rng), CovarianceSpec::identity()};
  d.y = d.x_full.col(0) + oracle::random_normal(20, 1, rng);
  SelectionOptions opts;
  opts.criteria = {Criterion::ml};
  opts.prior = PriorScale::zellner(2.5);
  const auto run = evaluate_candidates(d, opts);
  for (const auto& eval : run.candidates) {
    EXPECT_FALSE(eval.lambda.has_value());
    ASSERT_TRUE(eval.fit->lambda.has_value());
    EXPECT_EQ(*eval.fit->lambda, 2.5);
  }
}

TEST(Select, IndexOutOfRangeCandidate) {
  std::mt19937_64 rng(78);
  Dataset d{oracle::random_normal(10, 1, rng), oracle::random_normal(10, 2, rng), CovarianceSpec::identity()};
  SelectionOptions opts;
  opts.candidates = std::vector<CandidateModel>{CandidateModel({2})};
  EXPECT_THROW(evaluate_candidates(d, opts), NumericalError);
}

// Consistency of the marginal-likelihood criterion at a large sample size.
TEST(Select, MarginalCriterionIsConsistentAtLargeN) {
  ExperimentSpec spec;
  spec.n_grid = {400};
  spec.snr_grid = {5.0};
  spec.replications = 200;
  spec.criteria = {Criterion::ic_pi1};
  const auto result = run_experiment(spec);
  ASSERT_EQ(result.size(), 1u);
  EXPECT_GE(result[0].summaries[0].true_model_count, 198);
}

TEST(PredictionError, ZeroWhenTheFitIsExact) {
  std::mt19937_64 rng(79);
  const MatrixXd x = oracle::random_normal(15, 3, rng);
  const Truth truth{CandidateModel({0, 2}), Eigen::Vector2d(1.5, -2.0)};
  const VectorXd y = truth.mean(x);
  const auto w = whiten(y, x, CovarianceSpec::identity());
  EXPECT_NEAR(prediction_error(CandidateModel({0, 2}), w, x, truth.mean(x)), 0.0, 1e-24);
  EXPECT_NEAR(prediction_error(CandidateModel({0, 1, 2}), w, x, truth.mean(x)), 0.0, 1e-24);
}

TEST(PredictionError, NullModelGivesMeanSquaredSignal) {
  std::mt19937_64 rng(80);
  const MatrixXd x = oracle::random_normal(15, 3, rng);
  const Truth truth{CandidateModel({0, 1}), Eigen::Vector2d(1.0, 1.0)};
  const VectorXd y = truth.mean(x) + oracle::random_normal(15, 1, rng);
  const auto w = whiten(y, x, CovarianceSpec::identity());
  EXPECT_DOUBLE_EQ(prediction_error(CandidateModel(), w, x, truth.mean(x)), truth.mean(x).squaredNorm() / 15);
}

TEST(PredictionError, MatchesDenseGlsUnderAr1) {
  std::mt19937_64 rng(81);
  const int n = 25;
  const MatrixXd x = oracle::random_normal(n, 4, rng);
  const Truth truth{CandidateModel({0, 1}), Eigen::Vector2d(1.0, -1.0)};
  const MatrixXd v = oracle::ar1_v(n, 0.6);
  const VectorXd y = truth.mean(x) + v.llt().matrixL() * oracle::random_normal(n, 1, rng);
  Dataset d{y, x, CovarianceSpec::ar1()};
  const CandidateModel sel({0, 1, 3});
  const MatrixXd xj = x(Eigen::all, sel.indices());
  const MatrixXd vi = oracle::inverse(oracle::ar1_v(n, 0.55));
  const VectorXd beta = oracle::inverse(xj.transpose() * vi * xj) * xj.transpose() * vi * y;
  const double expected = (xj * beta - truth.mean(x)).squaredNorm() / n;
  EXPECT_NEAR(prediction_error(sel, d, truth, 0.55), expected, 1e-12 * std::max(1.0, expected));
  EXPECT_THROW(prediction_error(sel, d, truth, std::nullopt), NumericalError);
}
