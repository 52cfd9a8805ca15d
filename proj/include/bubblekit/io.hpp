#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bubblekit {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Strict parse of a whole field; throws ConfigError on junk.
double parse_double(std::string_view text);

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

/// Split one CSV line on commas (no quoting: every field written here is numeric or a
/// bare identifier).
std::vector<std::string> split_csv_line(std::string_view line);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace bubblekit
