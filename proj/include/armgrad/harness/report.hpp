#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "armgrad/checkpoint.hpp"
#include "armgrad/harness/config.hpp"

namespace armgrad::harness {

/// %.17g; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double x);

/// Empty cell, integer, double or string.
using Cell = std::variant<std::monostate, long long, double, std::string>;

/// A CSV table with a fixed header. Rows must match the header width.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<Cell> row);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<Cell>& row(std::size_t i) const { return rows_[i]; }
  std::size_t column(const std::string& name) const;

  /// Header plus rows, '\n' line endings, no quoting (cells never hold
  /// commas).
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// Everything an experiment writes: the main CSV, per-row wall time (kept
/// out of the CSV so reruns are byte-identical), a summary for the
/// manifest and an optional checkpoint.
struct RunArtifacts {
  CsvTable table{{}};
  std::vector<double> wall_time_ms;
  nlohmann::json summary = nlohmann::json::object();
  std::optional<sbn::Checkpoint> checkpoint;
};

/// Version string of the build, e.g. "0.1.0+g1a2b3c4".
std::string version_string();

struct OutputPaths {
  std::string csv;
  std::string manifest;    // <stem>.manifest.json
  std::string timing;      // <stem>.timing.csv
  std::string checkpoint;  // <stem>.checkpoint.json
};

/// Derives sibling paths from the CSV path (default "<experiment>.csv").
OutputPaths output_paths(const ExperimentConfig& config);

/// Writes the CSV, timing sidecar, manifest and checkpoint (if any).
/// Parent directories are created. Throws DataError on I/O failure.
OutputPaths write_artifacts(const ExperimentConfig& config, const RunArtifacts& artifacts);

}  // namespace armgrad::harness
