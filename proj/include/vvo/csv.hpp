#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace vvo {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name; throws std::out_of_range if absent.
  std::size_t column(const std::string& name) const;
};

/// Plain comma-separated reader: no quoting, first line is the header.
CsvTable read_csv(const std::filesystem::path& path);

/// Writes one row per call with a fixed header; numbers use max round-trip precision.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::ostringstream line;
    line.precision(17);
    bool first = true;
    ((line << (first ? "" : ",") << fields, first = false), ...);
    out_ << line.str() << '\n';
    out_.flush();
  }

  void row(const std::vector<std::string>& fields);

 private:
  std::ofstream out_;
};

}  // namespace vvo
