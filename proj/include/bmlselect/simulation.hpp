#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "bmlselect/covariance.hpp"
#include "bmlselect/criteria.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/model_core.hpp"
#include "bmlselect/selection.hpp"

namespace bmlselect {

enum class ModelKind { constant_variance, ar1, nerm };
enum class BetaPattern { four_ones, two_ones };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::constant_variance: return "constant_variance";
    case ModelKind::ar1: return "ar1";
    case ModelKind::nerm: return "nerm";
  }
  return "constant_variance";
}

inline const char* to_string(BetaPattern pattern) {
  return pattern == BetaPattern::four_ones ? "four_ones" : "two_ones";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "constant_variance" || s == "constant" || s == "identity") return ModelKind::constant_variance;
  if (s == "ar1") return ModelKind::ar1;
  if (s == "nerm") return ModelKind::nerm;
  return std::nullopt;
}

inline std::optional<BetaPattern> parse_beta_pattern(std::string_view s) {
  if (s == "four_ones") return BetaPattern::four_ones;
  if (s == "two_ones") return BetaPattern::two_ones;
  return std::nullopt;
}

inline constexpr int kSimulatedColumns = 7;

/// (1,1,1,1,0,0,0) or (1,1,0,0,0,0,0).
inline Eigen::VectorXd beta_full(BetaPattern pattern) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(kSimulatedColumns);
  beta.head(pattern == BetaPattern::four_ones ? 4 : 2).setOnes();
  return beta;
}

/// Error variance giving the requested signal-to-noise ratio
/// {var(x'beta) / var(eps)}^{1/2} for iid standard normal x and a
/// unit-diagonal error correlation: sigma^2 = beta'beta / SNR^2.
inline double noise_variance(BetaPattern pattern, double snr) {
  return beta_full(pattern).squaredNorm() / (snr * snr);
}

/// One point of the experiment grid.
struct CellSpec {
  ModelKind model = ModelKind::constant_variance;
  int n = 20;
  double snr = 1.0;
  BetaPattern pattern = BetaPattern::four_ones;
  double phi_true = 0.5;     // ar1 / nerm only
  int nerm_group_size = 5;   // nerm only; the last cluster takes the remainder

  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

struct ExperimentSpec {
  ModelKind model_kind = ModelKind::constant_variance;
  double phi_true = 0.5;
  int nerm_group_size = 5;
  /// Empty selects the default grid for the model: {20, 40, 80} with
  /// constant variance, {40, 60, 80} otherwise.
  std::vector<int> n_grid;
  std::vector<double> snr_grid{1.0, 3.0, 5.0};
  BetaPattern beta_pattern = BetaPattern::four_ones;
  int replications = 1000;
  std::vector<Criterion> criteria{kAllCriteria.begin(), kAllCriteria.end()};
  PriorScale::Kind prior = PriorScale::Kind::ridge;
  bool include_null = true;
  std::uint64_t master_seed = 20160101;
  /// 0 means hardware concurrency. BMLSELECT_THREADS caps either way.
  int threads = 0;

  std::vector<int> resolved_n_grid() const {
    if (!n_grid.empty()) return n_grid;
    if (model_kind == ModelKind::constant_variance) return {20, 40, 80};
    return {40, 60, 80};
  }

  /// Cells in n-major, snr-minor order; the position is the cell index that
  /// seeds its random streams.
  std::vector<CellSpec> cells() const {
    std::vector<CellSpec> out;
    for (int n : resolved_n_grid())
      for (double snr : snr_grid) out.push_back({model_kind, n, snr, beta_pattern, phi_true, nerm_group_size});
    return out;
  }

  void validate() const {
    if (replications < 1) throw InputError("replications must be >= 1");
    if (criteria.empty()) throw InputError("at least one criterion is required");
    if (snr_grid.empty()) throw InputError("snr grid is empty");
    for (double s : snr_grid)
      if (!(s > 0.0) || !std::isfinite(s)) throw InputError("snr values must be positive");
    for (int n : resolved_n_grid())
      if (n < kSimulatedColumns + 3) throw InputError("n values must be at least p_omega + 3 = 10");
    if (model_kind == ModelKind::ar1 && !(std::abs(phi_true) < 1.0)) throw InputError("ar1 phi must satisfy |phi| < 1");
    if (model_kind == ModelKind::nerm && !(phi_true >= 0.0)) throw InputError("nerm phi must be >= 0");
    if (model_kind == ModelKind::nerm && nerm_group_size < 1) throw InputError("nerm group size must be >= 1");
  }
};

/// SplitMix64 finaliser; used to derive independent per-replication seeds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Stream for replication `rep` of cell `cell_index`: a 64-bit Mersenne
/// Twister seeded by hashing (master_seed, cell_index, rep). Streams depend
/// only on these three numbers, never on scheduling.
inline std::mt19937_64 replication_engine(std::uint64_t master_seed, std::uint64_t cell_index, std::uint64_t rep) {
  return std::mt19937_64(mix64(mix64(mix64(master_seed) ^ cell_index) ^ rep));
}

inline std::vector<int> nerm_groups(int n, int group_size) {
  std::vector<int> groups(n / group_size, group_size);
  if (n % group_size) {
    if (groups.empty())
      groups.push_back(n % group_size);
    else
      groups.back() += n % group_size;
  }
  return groups;
}

struct Replicate {
  Dataset dataset;  // covariance parameter left unknown for ar1 / nerm
  Truth truth;
};

/// Draws X (n x 7, iid N(0,1), row-major order) then the error vector.
inline Replicate generate_dataset(const CellSpec& cell, std::mt19937_64& engine) {
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = cell.n;
  Replicate out;
  out.dataset.x_full.resize(n, kSimulatedColumns);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < kSimulatedColumns; ++k) out.dataset.x_full(i, k) = z(engine);

  const double sigma = std::sqrt(noise_variance(cell.pattern, cell.snr));
  Eigen::VectorXd eps(n);
  switch (cell.model) {
    case ModelKind::constant_variance:
      for (int i = 0; i < n; ++i) eps(i) = sigma * z(engine);
      out.dataset.cov = CovarianceSpec::identity();
      break;
    case ModelKind::ar1: {
      const double phi = cell.phi_true;
      const double innov = sigma * std::sqrt(1.0 - phi * phi);
      eps(0) = sigma * z(engine);
      for (int i = 1; i < n; ++i) eps(i) = phi * eps(i - 1) + innov * z(engine);
      out.dataset.cov = CovarianceSpec::ar1();
      break;
    }
    case ModelKind::nerm: {
      const auto groups = nerm_groups(n, cell.nerm_group_size);
      const double tau = sigma * std::sqrt(cell.phi_true);
      int row = 0;
      for (int g : groups) {
        const double effect = tau * z(engine);
        for (int k = 0; k < g; ++k, ++row) eps(row) = effect + sigma * z(engine);
      }
      out.dataset.cov = CovarianceSpec::nerm(groups);
      break;
    }
  }

  const Eigen::VectorXd beta = beta_full(cell.pattern);
  std::vector<int> active;
  for (int k = 0; k < kSimulatedColumns; ++k)
    if (beta(k) != 0.0) active.push_back(k);
  out.truth.model = CandidateModel(active);
  out.truth.beta = beta(active);
  out.dataset.y = out.truth.mean(out.dataset.x_full) + eps;
  return out;
}

inline Replicate generate_dataset(const CellSpec& cell, std::uint64_t master_seed, std::uint64_t cell_index,
                                  std::uint64_t rep) {
  auto engine = replication_engine(master_seed, cell_index, rep);
  return generate_dataset(cell, engine);
}

struct ReplicationOutcome {
  std::optional<double> phi_hat;
  std::vector<CandidateModel> selected;  // aligned with criteria
  std::vector<double> prediction_error;
};

inline ReplicationOutcome run_replication(const CellSpec& cell, const ExperimentSpec& spec, std::uint64_t cell_index,
                                          std::uint64_t rep) {
  const Replicate data = generate_dataset(cell, spec.master_seed, cell_index, rep);
  SelectionOptions options;
  options.criteria = spec.criteria;
  options.prior = PriorScale{spec.prior, std::nullopt};
  options.include_null = spec.include_null;
  const SelectionRun run = evaluate_candidates(data.dataset, options);

  ReplicationOutcome out;
  if (run.phi) out.phi_hat = run.phi->phi;
  const Eigen::VectorXd true_mean = data.truth.mean(data.dataset.x_full);
  for (const auto& report : run.reports) {
    out.selected.push_back(report.selected);
    out.prediction_error.push_back(prediction_error(report.selected, run.whitened, data.dataset.x_full, true_mean));
  }
  return out;
}

/// Worker count: the request (0 = hardware concurrency) capped by
/// BMLSELECT_THREADS when that is a positive integer.
inline int resolve_worker_count(int requested) {
  int workers = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("BMLSELECT_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) workers = std::min<long>(workers, cap);
  }
  return std::max(1, workers);
}

/// Runs body(i) for i in [0, count) on up to `workers` threads. Results must
/// be written to per-index slots; the first failure by index is rethrown.
template <class Body>
void parallel_for(std::size_t count, int workers, Body&& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct CriterionSummary {
  Criterion criterion = Criterion::ic_pi1;
  int true_model_count = 0;
  double mean_prediction_error = 0.0;
  double standard_error = 0.0;  // Monte Carlo standard error of the mean

  friend bool operator==(const CriterionSummary&, const CriterionSummary&) = default;
};

struct ExperimentResult {
  CellSpec cell;
  int replications = 0;
  std::vector<CriterionSummary> summaries;

  const CriterionSummary& summary(Criterion c) const {
    for (const auto& s : summaries)
      if (s.criterion == c) return s;
    throw NumericalError(ErrorKind::invalid_argument, std::string(to_string(c)) + " not in result");
  }

  friend bool operator==(const ExperimentResult&, const ExperimentResult&) = default;
};

/// Order-fixed reduction of per-replication outcomes.
inline ExperimentResult summarise(const CellSpec& cell, const std::vector<Criterion>& criteria,
                                  const std::vector<ReplicationOutcome>& outcomes, const CandidateModel& truth) {
  ExperimentResult result;
  result.cell = cell;
  result.replications = static_cast<int>(outcomes.size());
  const double reps = static_cast<double>(outcomes.size());
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    CriterionSummary s;
    s.criterion = criteria[k];
    double sum = 0.0;
    for (const auto& o : outcomes) {
      sum += o.prediction_error[k];
      if (o.selected[k] == truth) ++s.true_model_count;
    }
    s.mean_prediction_error = sum / reps;
    if (outcomes.size() > 1) {
      double ss = 0.0;
      for (const auto& o : outcomes) ss += (o.prediction_error[k] - s.mean_prediction_error) *
                                           (o.prediction_error[k] - s.mean_prediction_error);
      s.standard_error = std::sqrt(ss / (reps - 1.0) / reps);
    }
    result.summaries.push_back(s);
  }
  return result;
}

inline CandidateModel true_model(BetaPattern pattern) {
  return CandidateModel(pattern == BetaPattern::four_ones ? std::vector<int>{0, 1, 2, 3} : std::vector<int>{0, 1});
}

/// One cell, replications spread over worker threads.
inline ExperimentResult run_cell(const ExperimentSpec& spec, const CellSpec& cell, std::uint64_t cell_index) {
  std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(spec.replications));
  parallel_for(outcomes.size(), resolve_worker_count(spec.threads), [&](std::size_t rep) {
    try {
      outcomes[rep] = run_replication(cell, spec, cell_index, rep);
    } catch (const NumericalError& e) {
      throw NumericalError(e.kind(), "cell (n=" + std::to_string(cell.n) + ", snr=" + std::to_string(cell.snr) +
                                         ") replication " + std::to_string(rep) + ": " + e.what());
    }
  });
  return summarise(cell, spec.criteria, outcomes, true_model(cell.pattern));
}

inline std::vector<ExperimentResult> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const auto cells = spec.cells();
  std::vector<ExperimentResult> results;
  results.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) results.push_back(run_cell(spec, cells[c], c));
  return results;
}

}  // namespace bmlselect
