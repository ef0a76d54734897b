#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace feedsim {

/// A small comma-separated table: one header row, then data rows. No quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(std::string_view name) const;
};

/// Throws IoError if the file cannot be read and ConfigError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

/// Strict numeric parse; throws ConfigError naming `context` on failure.
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace feedsim
