#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "CLI11.hpp"
#include "bmlselect/covariance.hpp"
#include "bmlselect/criteria.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/io.hpp"
#include "bmlselect/selection.hpp"
#include "bmlselect/simulation.hpp"

namespace bmlselect::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr std::uint64_t kDefaultSeed = 20160101;

struct RunConfig {
  std::string command;
  std::string data_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> criteria{"all"};
  std::string covariance = "identity";
  std::optional<double> phi;
  std::string groups;
  std::string prior = "ridge";
  std::optional<double> lambda;
  bool estimate_lambda = false;
  int replications = 1000;
  std::string n_grid;
  std::string snr_grid = "1,3,5";
  std::string beta_pattern = "four_ones";
  std::string model = "constant_variance";
  int group_size = 5;
  bool include_null = true;
  int emit_ranked_limit = 0;
  std::string candidate;
  int threads = 0;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto& f : io::split_fields(s))
    if (!f.empty()) out.push_back(f);
  return out;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const auto& f : split_list(s)) {
    double v = 0;
    if (!io::parse_double(f, v) || v != static_cast<int>(v))
      throw InputError("invalid " + what + " value '" + f + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& f : split_list(s)) {
    double v = 0;
    if (!io::parse_double(f, v)) throw InputError("invalid " + what + " value '" + f + "'");
    out.push_back(v);
  }
  return out;
}

inline std::vector<Criterion> parse_criteria(const std::vector<std::string>& names) {
  std::vector<Criterion> out;
  for (const auto& raw : names) {
    for (const auto& name : split_list(raw)) {
      if (name == "all") {
        out.assign(kAllCriteria.begin(), kAllCriteria.end());
        return out;
      }
      const auto c = parse_criterion(name);
      if (!c) throw InputError("unknown criterion '" + name + "'");
      if (std::find(out.begin(), out.end(), *c) == out.end()) out.push_back(*c);
    }
  }
  if (out.empty()) throw InputError("no criterion requested");
  return out;
}

inline std::string join(const std::vector<Criterion>& cs) {
  std::string s;
  for (auto c : cs) s += (s.empty() ? "" : ",") + std::string(to_string(c));
  return s;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (const auto& x : xs) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_same_v<T, std::string>)
      s += x;
    else if constexpr (std::is_floating_point_v<T>)
      s += io::format_double(x);
    else
      s += std::to_string(x);
  }
  return s;
}

inline PriorScale parse_prior(const RunConfig& cfg) {
  PriorScale prior;
  if (cfg.prior == "ridge")
    prior.kind = PriorScale::Kind::ridge;
  else if (cfg.prior == "zellner")
    prior.kind = PriorScale::Kind::zellner;
  else
    throw InputError("unknown prior '" + cfg.prior + "'");
  if (cfg.lambda && !cfg.estimate_lambda) {
    if (!(*cfg.lambda > 0.0)) throw InputError("--lambda must be positive");
    prior.lambda = *cfg.lambda;
  }
  return prior;
}

inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data_path.empty()) throw InputError("--data is required");
  std::ifstream in(cfg.data_path);
  if (!in) throw InputError("cannot open data file '" + cfg.data_path + "'");
  io::DataTable table;
  try {
    table = io::read_data_csv(in);
  } catch (const InputError& e) {
    throw InputError(cfg.data_path + ": " + e.what());
  }
  Dataset data;
  data.y = std::move(table.y);
  data.x_full = std::move(table.x);
  if (cfg.covariance == "identity") {
    data.cov = CovarianceSpec::identity();
  } else if (cfg.covariance == "ar1") {
    data.cov = CovarianceSpec::ar1(cfg.phi);
  } else if (cfg.covariance == "nerm") {
    const auto groups = parse_int_list(cfg.groups, "group size");
    if (groups.empty()) throw InputError("--covariance nerm needs --groups (cluster sizes summing to n)");
    data.cov = CovarianceSpec::nerm(groups, cfg.phi);
  } else {
    throw InputError("unknown covariance '" + cfg.covariance + "'");
  }
  try {
    validate(data);
  } catch (const NumericalError& e) {
    throw InputError(e.what());
  }
  return data;
}

/// Quotes a CSV field when it contains a separator or quote.
inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

/// Destination stream: the --out file, or `fallback` when --out is empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw InputError("cannot open output file '" + path + "'");
      stream_ = file_.get();
    }
  }
  std::ostream& get() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

inline io::ConfigEcho selection_echo(const RunConfig& cfg, const Dataset& data, const SelectionRun& run,
                                     const PriorScale& prior) {
  io::ConfigEcho echo{{"command", cfg.command},
                      {"data", cfg.data_path},
                      {"n", std::to_string(data.n())},
                      {"p_omega", std::to_string(data.p_omega())},
                      {"covariance", to_string(data.cov.kind)}};
  if (data.cov.kind == CovarianceSpec::Kind::nerm) echo.emplace_back("groups", join(data.cov.group_sizes));
  if (data.cov.needs_phi()) {
    echo.emplace_back("phi", io::format_double(*run.cov.phi));
    echo.emplace_back("phi_source", run.phi ? "estimated_full_model" : "fixed");
    if (run.phi && run.phi->at_boundary) echo.emplace_back("phi_at_boundary", "true");
  }
  echo.emplace_back("prior", to_string(prior.kind));
  echo.emplace_back("lambda", prior.lambda ? io::format_double(*prior.lambda) : "estimated_per_candidate");
  echo.emplace_back("include_null", cfg.include_null ? "true" : "false");
  echo.emplace_back("criteria", join(run.criteria));
  return echo;
}

inline int cmd_select(const RunConfig& cfg, std::ostream& out) {
  const Dataset data = load_dataset(cfg);
  SelectionOptions options;
  options.criteria = parse_criteria(cfg.criteria);
  options.prior = parse_prior(cfg);
  options.include_null = cfg.include_null;
  const SelectionRun run = evaluate_candidates(data, options);

  // Rows follow the ranking of the first requested criterion; candidates it
  // excludes come last in enumeration order.
  std::vector<std::size_t> order;
  const auto& lead = run.reports.front();
  for (const auto& [model, value] : lead.ranked)
    for (std::size_t i = 0; i < run.candidates.size(); ++i)
      if (run.candidates[i].model == model) order.push_back(i);
  for (std::size_t i = 0; i < run.candidates.size(); ++i)
    if (!run.candidates[i].scores.front()) order.push_back(i);
  const std::size_t limit =
      cfg.emit_ranked_limit > 0 ? std::min<std::size_t>(order.size(), cfg.emit_ranked_limit) : order.size();

  Sink sink(cfg.out_path, out);
  std::ostream& csv = sink.get();
  const bool need_prior = std::any_of(run.criteria.begin(), run.criteria.end(), requires_prior);
  io::write_config_echo(csv, selection_echo(cfg, data, run, options.prior));
  csv << "rank,candidate,p,lambda";
  for (auto c : run.criteria) csv << ',' << to_string(c);
  csv << ",excluded\n";
  for (std::size_t r = 0; r < limit; ++r) {
    const auto& eval = run.candidates[order[r]];
    csv << (eval.scores.front() ? std::to_string(r + 1) : "NA") << ',' << csv_text(eval.model.to_string()) << ','
        << eval.model.size() << ',';
    if (!need_prior)
      csv << "NA";
    else if (eval.lambda)
      csv << io::format_double(eval.lambda->lambda);
    else if (options.prior.lambda)
      csv << io::format_double(*options.prior.lambda);
    else
      csv << "NA";
    std::string reasons;
    for (std::size_t k = 0; k < run.criteria.size(); ++k) {
      csv << ',' << (eval.scores[k] ? io::format_double(*eval.scores[k]) : "NA");
      if (!eval.reasons[k].empty()) {
        if (!reasons.empty()) reasons += " | ";
        reasons += std::string(to_string(run.criteria[k])) + ": " + eval.reasons[k];
      }
    }
    csv << ',' << csv_text(reasons) << '\n';
  }

  if (!cfg.out_path.empty()) out << "ranked models written to " << cfg.out_path << '\n';
  for (const auto& rep : run.reports)
    out << "selected " << to_string(rep.criterion) << " " << rep.selected.to_string() << '\n';
  return kExitOk;
}

inline int cmd_criteria(const RunConfig& cfg, std::ostream& out) {
  const Dataset data = load_dataset(cfg);
  CandidateModel model;
  if (cfg.candidate.empty()) {
    std::vector<int> all(data.p_omega());
    for (int k = 0; k < data.p_omega(); ++k) all[k] = k + 1;
    model = CandidateModel::from_one_based(all);
  } else if (cfg.candidate != "none" && cfg.candidate != "{}") {
    model = CandidateModel::from_one_based(parse_int_list(cfg.candidate, "candidate column"));
  }
  try {
    model.check_bounds(data.p_omega());
  } catch (const NumericalError& e) {
    throw InputError(e.what());
  }
  const auto criteria = parse_criteria(cfg.criteria);
  PriorScale prior = parse_prior(cfg);

  std::optional<PhiEstimate> phi;
  CovarianceSpec cov = data.cov;
  if (!cov.phi_known()) {
    phi = estimate_phi_full_model(data);
    cov = cov.with_phi(phi->phi);
  }
  const WhitenedData w = whiten(data.y, data.x_full, cov);
  std::optional<LambdaEstimate> lambda;
  if (std::any_of(criteria.begin(), criteria.end(), requires_prior) && !prior.lambda) {
    lambda = estimate_lambda(w, model, prior.kind);
    prior.lambda = lambda->lambda;
  }
  const WhitenedFit plain = gls_fit(w, model);
  std::optional<WhitenedFit> with_prior;
  if (prior.lambda) with_prior = gls_fit(w, model, prior);

  Sink sink(cfg.out_path, out);
  std::ostream& csv = sink.get();
  io::ConfigEcho echo{{"command", "criteria"},
                      {"data", cfg.data_path},
                      {"candidate", model.to_string()},
                      {"covariance", to_string(cov.kind)}};
  if (cov.needs_phi()) echo.emplace_back("phi", io::format_double(*cov.phi));
  if (prior.lambda) {
    echo.emplace_back("prior", to_string(prior.kind));
    echo.emplace_back("lambda", io::format_double(*prior.lambda));
  }
  io::write_config_echo(csv, echo);
  csv << "criterion,value,note\n";
  for (Criterion c : criteria) {
    const bool pr = requires_prior(c);
    try {
      const double v = score(c, pr ? *with_prior : plain, w, model, pr ? std::optional<PriorScale>(prior) : std::nullopt);
      csv << to_string(c) << ',' << io::format_double(v) << ",\n";
    } catch (const NumericalError& e) {
      csv << to_string(c) << ",NA," << csv_text(e.what()) << '\n';
    }
  }
  return kExitOk;
}

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
  ExperimentSpec spec;
  const auto kind = parse_model_kind(cfg.model);
  if (!kind) throw InputError("unknown model '" + cfg.model + "'");
  spec.model_kind = *kind;
  if (cfg.phi) spec.phi_true = *cfg.phi;
  spec.nerm_group_size = cfg.group_size;
  spec.n_grid = detail::parse_int_list(cfg.n_grid, "n grid");
  spec.snr_grid = detail::parse_double_list(cfg.snr_grid, "snr grid");
  const auto pattern = parse_beta_pattern(cfg.beta_pattern);
  if (!pattern) throw InputError("unknown beta pattern '" + cfg.beta_pattern + "'");
  spec.beta_pattern = *pattern;
  spec.replications = cfg.replications;
  spec.criteria = parse_criteria(cfg.criteria);
  const PriorScale prior = parse_prior(cfg);
  if (prior.lambda) throw InputError("simulate always estimates lambda per candidate; drop --lambda");
  spec.prior = prior.kind;
  spec.include_null = cfg.include_null;
  spec.master_seed = cfg.seed.value_or(kDefaultSeed);
  spec.threads = cfg.threads;
  spec.validate();

  // Worker count is deliberately absent: it never changes the output.
  io::ConfigEcho echo{{"command", "simulate"},
                      {"model", to_string(spec.model_kind)},
                      {"n_grid", join(spec.resolved_n_grid())},
                      {"snr_grid", join(spec.snr_grid)},
                      {"beta_pattern", to_string(spec.beta_pattern)},
                      {"replications", std::to_string(spec.replications)},
                      {"criteria", join(spec.criteria)},
                      {"prior", to_string(spec.prior)},
                      {"include_null", spec.include_null ? "true" : "false"},
                      {"seed", std::to_string(spec.master_seed)}};
  if (spec.model_kind != ModelKind::constant_variance) echo.emplace_back("phi", io::format_double(spec.phi_true));
  if (spec.model_kind == ModelKind::nerm) echo.emplace_back("group_size", std::to_string(spec.nerm_group_size));

  const auto results = run_experiment(spec);
  Sink sink(cfg.out_path, out);
  io::write_results_csv(sink.get(), results, echo);
  return kExitOk;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Exit status: 0 on
/// success, 2 for malformed input or arguments, 3 for numerical failures.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Variable selection with marginal-likelihood information criteria", "bmlselect"};
  app.set_config("--config", "", "Flat key = value file; command-line flags override it");
  app.require_subcommand(1);

  // Comma lists arrive as one token on the command line but as an array from
  // the config file; accept both and keep the comma form.
  auto list_option = [&app](const std::string& name, std::string& target, const std::string& help) {
    return app
        .add_option_function<std::vector<std::string>>(
            name, [&target](const std::vector<std::string>& parts) { target = detail::join(parts); }, help)
        ->delimiter(',');
  };

  app.add_option("--data", cfg.data_path, "Headered CSV: response first, then predictors");
  app.add_option("--out", cfg.out_path, "Output CSV path (stdout when omitted)");
  app.add_option("--seed", cfg.seed, "Master seed for simulate");
  app.add_option("--criterion", cfg.criteria, "Criterion name, repeatable, or 'all'")->take_all();
  app.add_option("--covariance", cfg.covariance, "identity | ar1 | nerm");
  app.add_option("--phi", cfg.phi, "Covariance parameter; estimated on the full model when omitted (select)");
  list_option("--groups", cfg.groups, "NERM cluster sizes, comma separated");
  app.add_option("--prior", cfg.prior, "ridge | zellner");
  auto* lambda_opt = app.add_option("--lambda", cfg.lambda, "Fixed prior scale lambda");
  app.add_flag("--estimate-lambda", cfg.estimate_lambda, "Estimate lambda per candidate (default)")->excludes(lambda_opt);
  app.add_option("--replications", cfg.replications, "Monte Carlo replications per cell");
  list_option("--n-grid", cfg.n_grid, "Sample sizes, comma separated");
  list_option("--snr-grid", cfg.snr_grid, "Signal-to-noise ratios, comma separated");
  app.add_option("--beta-pattern", cfg.beta_pattern, "four_ones | two_ones");
  app.add_option("--model", cfg.model, "Simulation model: constant_variance | ar1 | nerm");
  app.add_option("--group-size", cfg.group_size, "Simulated NERM cluster size");
  app.add_option("--include-null", cfg.include_null, "Include the empty model (true/false)");
  app.add_option("--emit-ranked-limit", cfg.emit_ranked_limit, "Write at most this many ranked rows (0 = all)");
  list_option("--candidate", cfg.candidate, "1-based columns for 'criteria', e.g. 1,2,4");
  app.add_option("--threads", cfg.threads, "Worker threads for simulate (0 = all cores)");

  auto* select = app.add_subcommand("select", "Rank every subset of the predictors")->fallthrough();
  auto* criteria = app.add_subcommand("criteria", "Score one candidate model")->fallthrough();
  auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo experiment grid")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (select->parsed()) {
      cfg.command = "select";
      return detail::cmd_select(cfg, out);
    }
    if (criteria->parsed()) {
      cfg.command = "criteria";
      return detail::cmd_criteria(cfg, out);
    }
    cfg.command = "simulate";
    (void)simulate;
    return detail::cmd_simulate(cfg, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace bmlselect::cli
