#pragma once

#include <string>
#include <vector>

namespace smooth {

/// Shortest round-trip decimal form ('.' separator), stable across runs.
std::string format_double(double v);

/// "55.92±0.22" console form; two decimals on both sides.
std::string format_mean_std(double mean, double std_dev);

/// RFC-4180 style field quoting (only when the field needs it).
std::string csv_escape(const std::string& field);

/// In-memory CSV with mandatory header and LF line endings, written
/// atomically (temp file + rename).
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<std::string> row);
  std::string to_string() const;
  void write(const std::string& path) const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Atomic text file write: temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace smooth
