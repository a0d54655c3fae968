#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mmal::harness {

/// One (strategy, fusion, budget, seed, subject) result; metrics are the mean
/// over the personalization repeats and lie in [0, 100].
struct ReportRow {
  std::string strategy;
  std::string fusion;
  std::size_t budget = 0;
  std::size_t seed = 0;
  std::string subject;
  double acc_before = 0.0;
  double acc_after = 0.0;
  double f1_before = 0.0;
  double f1_after = 0.0;
  /// Windows examined during personalization.
  double scanned = 0.0;
  double budget_used = 0.0;
  /// Mean windows examined per training episode.
  double train_scanned = 0.0;
  /// Repeats whose evaluation set was non-empty.
  std::size_t repeats = 0;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct AggregateRow {
  std::string strategy;
  std::string fusion;
  /// Empty: averaged over every budget.
  std::optional<std::size_t> budget;
  std::size_t rows = 0;
  double acc_before = 0.0;
  double acc_after = 0.0;
  double f1_before = 0.0;
  double f1_after = 0.0;
  double scanned = 0.0;
  double budget_used = 0.0;
  double train_scanned = 0.0;
};

/// Means per (strategy, fusion) over all budgets, followed by one entry per
/// (strategy, fusion, budget). Groups keep first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<ReportRow>& rows);

/// RFC-4180 CSV (CRLF line ends, quoted where needed, header first).
void write_rows_csv(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_rows_csv(std::istream& in);
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Scanned windows per strategy and budget.
nlohmann::json fig2_series(const std::vector<ReportRow>& rows);
/// Budget-vs-metric curves per fusion and strategy.
nlohmann::json fig3_series(const std::vector<ReportRow>& rows);
/// Per-subject before/after values per strategy, fusion and budget.
nlohmann::json fig4_series(const std::vector<ReportRow>& rows);

/// rows.csv, aggregate.csv, fig2.json, fig3.json and fig4.json in `dir`.
void write_report(const std::filesystem::path& dir, const std::vector<ReportRow>& rows);

/// Parses one RFC-4180 record; returns false at end of input.
bool read_csv_record(std::istream& in, std::vector<std::string>& fields);

}  // namespace mmal::harness
