#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace keytap {

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

}  // namespace keytap
