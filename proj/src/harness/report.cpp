#include "armgrad/harness/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#ifndef ARMGRAD_VERSION
#define ARMGRAD_VERSION "0.1.0"
#endif

namespace armgrad::harness {

namespace fs = std::filesystem;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != header_.size()) {
    throw DimensionError("CSV row has " + std::to_string(row.size()) + " cells, header has " +
                         std::to_string(header_.size()));
  }
  rows_.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw InvalidArgument("no CSV column '" + name + "'");
}

std::string CsvTable::str() const {
  std::string out;
  auto append_line = [&out](const auto& cells, auto&& render) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += render(cells[i]);
    }
    out += '\n';
  };
  append_line(header_, [](const std::string& s) { return s; });
  for (const auto& row : rows_) {
    append_line(row, [](const Cell& c) -> std::string {
      if (std::holds_alternative<long long>(c)) return std::to_string(std::get<long long>(c));
      if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
      if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
      return "";
    });
  }
  return out;
}

std::string version_string() { return ARMGRAD_VERSION; }

OutputPaths output_paths(const ExperimentConfig& config) {
  fs::path csv = config.output.empty() ? fs::path(to_string(config.experiment) + ".csv") : fs::path(config.output);
  fs::path stem = csv;
  if (stem.extension() == ".csv") stem.replace_extension();
  auto sibling = [&stem](const char* suffix) { return stem.string() + suffix; };
  return {csv.string(), sibling(".manifest.json"), sibling(".timing.csv"), sibling(".checkpoint.json")};
}

namespace {

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    if (ec) throw DataError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace

OutputPaths write_artifacts(const ExperimentConfig& config, const RunArtifacts& artifacts) {
  const auto paths = output_paths(config);
  write_file(paths.csv, artifacts.table.str());

  CsvTable timing({"row", "wall_time_ms"});
  for (std::size_t i = 0; i < artifacts.wall_time_ms.size(); ++i) {
    timing.add_row({static_cast<long long>(i), artifacts.wall_time_ms[i]});
  }
  write_file(paths.timing, timing.str());

  nlohmann::json manifest;
  manifest["version"] = version_string();
  manifest["experiment"] = to_string(config.experiment);
  manifest["seed"] = config.seed;
  manifest["config"] = to_json(config);
  manifest["csv"] = fs::path(paths.csv).filename().string();
  manifest["columns"] = artifacts.table.header();
  manifest["rows"] = artifacts.table.rows();
  manifest["summary"] = artifacts.summary;
  if (artifacts.checkpoint) {
    manifest["checkpoint"] = fs::path(paths.checkpoint).filename().string();
    write_file(paths.checkpoint, sbn::checkpoint_to_string(*artifacts.checkpoint));
  }
  write_file(paths.manifest, manifest.dump(2) + "\n");
  return paths;
}

}  // namespace armgrad::harness
