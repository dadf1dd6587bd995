#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace adfilt::report {

/// One condition x repeat measurement. Fields that do not apply to a
/// condition stay NaN and serialize as empty CSV cells.
struct ReportRow {
  std::string scenario;
  std::string dataset;
  std::string model;
  std::string condition;
  int repeat = 0;
  double bca = NAN;
  double asr = NAN;
  double rmse = NAN;
  double alpha = NAN;
  std::uint64_t seed = 0;
};

struct AlphaTraceRow {
  int repeat = 0;
  int fold = 0;
  int step = 0;
  double alpha = 0.0;
  double validation_bca = 0.0;
  bool accepted = false;
};

struct ConditionSummary {
  std::string condition;
  int count = 0;
  double bca_mean = NAN, bca_std = NAN;
  double asr_mean = NAN, asr_std = NAN;
  double rmse_mean = NAN, rmse_std = NAN;
};

/// Raw per-repeat results plus provenance; aggregates are derived, never
/// stored.
struct AttackReport {
  std::string scenario;
  std::string dataset;
  std::string model;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::vector<ReportRow> rows;
  std::vector<AlphaTraceRow> alpha_trace;
  std::vector<std::string> errors;  // repeats that aborted, with reasons

  std::vector<ConditionSummary> summarize() const;
};

/// Atomic JSON round-trip.
void save_report(const std::filesystem::path& path, const AttackReport& report);
AttackReport load_report(const std::filesystem::path& path);

/// Flat CSV with the stable column order
/// scenario,dataset,model,condition,repeat,bca,asr,rmse,alpha,seed.
/// Rows are sorted by all columns so merged output never depends on input
/// file order.
void write_csv(std::ostream& out, const std::vector<AttackReport>& reports);
void write_csv(const std::filesystem::path& path, const std::vector<AttackReport>& reports);

/// Plain-text mean +/- std table per (scenario, dataset, model, condition).
std::string render_table(const std::vector<AttackReport>& reports);

}  // namespace adfilt::report
