#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taskseq::csv {

struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

/// Reads a CSV file whose first non-empty line must equal `header` (fields
/// compared after trimming). Blank lines are skipped; double-quoted fields
/// with "" escapes are supported. Throws MissingFile / MalformedRow.
std::vector<Row> read(const std::filesystem::path& path, const std::vector<std::string>& header);

std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string format_double(double value);

std::optional<long long> parse_int(std::string_view text);
std::optional<double> parse_double(std::string_view text);

}  // namespace taskseq::csv
