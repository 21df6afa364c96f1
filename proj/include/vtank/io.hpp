#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace vtank {

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view data);

/// Appends one line (a trailing '\n' is added) under an advisory file lock.
void append_line(const std::filesystem::path& path, std::string_view line);

/// Shortest round-trip decimal text for a double; always carries a '.'
/// or an exponent so the value reads back as floating point.
std::string format_double(double v);

}  // namespace vtank
