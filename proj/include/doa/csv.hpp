#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace doa {

/// Header plus string cells; enough for the flat data files this project writes.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  static CsvTable read(const std::filesystem::path& path);
  bool has_column(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  std::vector<std::string> text_column(const std::string& name) const;
};

}  // namespace doa
