#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sentcx::io {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

// Writes through a sibling temporary file and renames it into place, so the
// final path either holds the previous content or the complete new content.
void write_file_atomic(const fs::path& path, std::string_view bytes);

// Splits on '\n', dropping one trailing '\r' per line. A final empty segment
// after a trailing newline is not returned.
std::vector<std::string_view> split_lines(std::string_view text);

std::vector<std::string_view> split(std::string_view text, char sep);

}  // namespace sentcx::io
