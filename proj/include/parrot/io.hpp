#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace parrot::io {

std::string read_file(const std::filesystem::path& path);

/// Writes `contents` to `path`, creating parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Quotes a CSV field when it contains a comma, quote, or newline.
std::string csv_field(std::string_view value);

/// Shortest round-trippable decimal form of a double.
std::string format_real(double value);

}  // namespace parrot::io
