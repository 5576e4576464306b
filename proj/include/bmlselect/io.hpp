#pragma once

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bmlselect/criteria.hpp"
#include "bmlselect/error.hpp"
#include "bmlselect/simulation.hpp"

namespace bmlselect::io {

/// 17 significant digits: enough for an exact round trip of any double.
inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return os.str();
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Parses a full token as a double; no trailing characters allowed.
inline bool parse_double(const std::string& token, double& value) {
  if (token.empty()) return false;
  errno = 0;
  char* end = nullptr;
  value = std::strtod(token.c_str(), &end);
  return end == token.c_str() + token.size() && errno != ERANGE;
}

/// Response plus predictors read from a headered CSV: first column is y,
/// remaining columns are the candidate explanatory variables.
struct DataTable {
  std::vector<std::string> header;
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
};

/// Blank lines and lines starting with '#' are skipped. Errors name the
/// 1-based line and column.
inline DataTable read_data_csv(std::istream& in) {
  DataTable table;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split_fields(t);
    if (!have_header) {
      if (fields.size() < 2)
        throw InputError("line " + std::to_string(line_no) + ": need a response and at least one predictor column");
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], row[c]) || !std::isfinite(row[c]))
        throw InputError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                         ": not a finite number: '" + fields[c] + "'");
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError("empty data file");
  if (rows.empty()) throw InputError("data file has a header but no rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(table.header.size()) - 1;
  table.y.resize(n);
  table.x.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    table.y(i) = rows[i][0];
    for (Eigen::Index k = 0; k < p; ++k) table.x(i, k) = rows[i][k + 1];
  }
  return table;
}

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline void write_config_echo(std::ostream& out, const ConfigEcho& echo) {
  for (const auto& [key, value] : echo) out << "# " << key << " = " << value << '\n';
}

inline constexpr std::string_view kResultsHeader =
    "model,n,snr,beta_pattern,phi_true,criterion,replications,true_model_count,mean_prediction_error,standard_error";

/// One row per (cell, criterion), preceded by the resolved configuration as
/// '#' comment lines.
inline void write_results_csv(std::ostream& out, const std::vector<ExperimentResult>& results,
                              const ConfigEcho& echo = {}) {
  write_config_echo(out, echo);
  out << kResultsHeader << '\n';
  for (const auto& r : results) {
    for (const auto& s : r.summaries) {
      out << to_string(r.cell.model) << ',' << r.cell.n << ',' << format_double(r.cell.snr) << ','
          << to_string(r.cell.pattern) << ',' << format_double(r.cell.phi_true) << ',' << to_string(s.criterion)
          << ',' << r.replications << ',' << s.true_model_count << ',' << format_double(s.mean_prediction_error)
          << ',' << format_double(s.standard_error) << '\n';
    }
  }
}

/// Inverse of write_results_csv. Consecutive rows sharing a cell form one
/// ExperimentResult. nerm_group_size is not serialised and keeps its default.
inline std::vector<ExperimentResult> read_results_csv(std::istream& in) {
  std::vector<ExperimentResult> out;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  auto fail = [&](const std::string& what) { throw InputError("line " + std::to_string(line_no) + ": " + what); };
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (!have_header) {
      if (t != kResultsHeader) fail("unexpected results header");
      have_header = true;
      continue;
    }
    const auto f = split_fields(t);
    if (f.size() != 10) fail("expected 10 fields");
    CellSpec cell;
    CriterionSummary s;
    double n = 0, reps = 0, count = 0;
    const auto model = parse_model_kind(f[0]);
    const auto pattern = parse_beta_pattern(f[3]);
    const auto crit = parse_criterion(f[5]);
    if (!model || !pattern || !crit) fail("unknown model, beta pattern or criterion");
    if (!parse_double(f[1], n) || !parse_double(f[2], cell.snr) || !parse_double(f[4], cell.phi_true) ||
        !parse_double(f[6], reps) || !parse_double(f[7], count) || !parse_double(f[8], s.mean_prediction_error) ||
        !parse_double(f[9], s.standard_error))
      fail("malformed number");
    cell.model = *model;
    cell.pattern = *pattern;
    cell.n = static_cast<int>(n);
    s.criterion = *crit;
    s.true_model_count = static_cast<int>(count);
    if (out.empty() || !(out.back().cell == cell) || out.back().replications != static_cast<int>(reps)) {
      out.push_back({cell, static_cast<int>(reps), {}});
    }
    out.back().summaries.push_back(s);
  }
  if (!have_header) throw InputError("results file has no header");
  return out;
}

}  // namespace bmlselect::io
