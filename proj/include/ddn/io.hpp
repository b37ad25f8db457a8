#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ddn {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Regular files in `dir` whose extension equals `extension` (case
/// insensitive, including the dot), sorted by filename.
std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                              std::string_view extension);

/// Writes to a sibling temporary file and renames it over `path`, so a
/// failed write never leaves a partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace ddn
