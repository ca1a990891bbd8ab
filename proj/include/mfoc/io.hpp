#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mfoc {

/// Shortest round-trip decimal representation (locale independent).
std::string format_double(double value);
double parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

/// Write `content` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace mfoc
