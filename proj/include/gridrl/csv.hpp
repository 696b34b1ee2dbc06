#pragma once

/**
 * CSV and small-file emission with reproducibility in mind: every table
 * starts with a `# seed=<u64>` comment and a header row, numbers print with
 * %.12g, and writes go through one helper that returns the byte count and
 * FNV-1a checksum of exactly what landed on disk.
 */

#include <cstdio>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gridrl/core.hpp"

namespace gridrl {

/** %.12g rendering used for every numeric cell. */
inline std::string format_number(double v) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.12g", v);
  return buffer;
}

/** In-memory CSV table: fixed column set, rows of preformatted cells. */
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    if (columns_.empty()) throw ConfigError("CsvWriter: at least one column required");
  }

  void add_row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size())
      throw ConfigError("CsvWriter: row has " + std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(columns_.size()));
    rows_.push_back(std::move(cells));
  }

  /** Convenience for all-numeric rows. */
  void add_row(const Vec& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (const double v : values) cells.push_back(format_number(v));
    add_row(std::move(cells));
  }

  [[nodiscard]] std::size_t row_count() const { return rows_.size(); }

  /** Rendered file content: seed comment, header, then the rows. */
  [[nodiscard]] std::string render(std::uint64_t seed) const {
    std::string out = "# seed=" + std::to_string(seed) + "\n";
    out += join(columns_);
    for (const auto& row : rows_) out += join(row);
    return out;
  }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += ',';
      line += cells[i];
    }
    line += '\n';
    return line;
  }

  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

/** Byte count and checksum of one written file, as listed in run manifests. */
struct WrittenFile {
  std::string path;
  std::size_t bytes = 0;
  std::uint64_t checksum = 0;
};

/** Write `content` to `path` (binary, no translation); errors are IoError. */
inline WrittenFile write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("short write to '" + path + "'");
  return WrittenFile{path, content.size(), fnv1a64(content.data(), content.size())};
}

}  // namespace gridrl
