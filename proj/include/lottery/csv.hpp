#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace lottery {

// RFC 4180-style reader: comma delimiter, optional double-quoted fields,
// CRLF or LF line endings. Blank lines are skipped.
std::vector<std::vector<std::string>> read_csv(std::istream& in);

// Shortest decimal text that parses back to exactly `value`.
std::string format_real(double value);

// Quotes a field when it contains a delimiter, quote or newline.
std::string csv_field(std::string_view text);

// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace lottery
