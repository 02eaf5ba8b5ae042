#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mfscale {

// Shortest round-trip text for a double.
std::string format_double(double x);
// Fixed "%.*g" formatting.
std::string format_double(double x, int digits);

std::vector<std::string> split_csv_line(std::string_view line);
std::string join_csv(const std::vector<std::string>& fields);

double parse_double(std::string_view s, long line);
long long parse_int(std::string_view s, long line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> row_lines;  // 1-based source line of each row

  // column index by name; throws ParseError naming the header line
  std::size_t column(std::string_view name) const;
};

// Lines starting with '#' are skipped. Throws ParseError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::string_view text);

// Writes via <path>.tmp then rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace mfscale
