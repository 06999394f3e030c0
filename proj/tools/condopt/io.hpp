// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace condopt::cli {

/// Unreadable input or unwritable output.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path);

/// Writes via a temporary file in the same directory and renames it over
/// `path`, so readers never see a partial file.
void write_atomic(const std::string& path, std::string_view content);

/// Locale-independent number parse of a whole field. Returns false on junk.
bool parse_double(std::string_view text, double& out);

std::vector<std::string> split(std::string_view text, char sep);
std::string trim(std::string_view text);

/// Header-first CSV reader. Rows are handed to `on_row` one at a time with
/// their 1-based line number; fields are not unquoted.
void read_csv(const std::string& path, std::vector<std::string>& header,
              const std::function<void(std::size_t line, const std::vector<std::string>& fields)>& on_row);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace condopt::cli
