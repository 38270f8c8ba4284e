#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "gibbslab/bounds.hpp"
#include "gibbslab/config.hpp"

namespace gibbslab {

/// Named values render as a nested object in JSON and "k=v;k=v" in CSV.
using Cell = std::variant<std::string, double, std::int64_t, std::uint64_t, NamedValues>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

/// Doubles are written with 17 significant digits so output is exact and
/// reproducible.
void write_csv(const Table& table, std::ostream& out);
/// Array of objects keyed by column name.
void write_json(const Table& table, std::ostream& out);
/// Fixed-width text table for terminals.
void write_summary(const Table& table, std::ostream& out);
/// Writes to `path` in the given format; io errors name the path.
void write_table(const Table& table, const std::string& path, OutputFormat format);

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

struct RunReport {
  Table table;
  /// kExitOk or kExitValidationFailure.
  int exit_code = kExitOk;
  std::vector<std::string> failures;
};

/// Runs every grid point for the configured mode. Writes the table to
/// config.output_path when set and prints a summary to `summary`.
RunReport run_experiment(const ExperimentConfig& config, std::ostream& summary);

}  // namespace gibbslab
