#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace scorehub {

// Lowercase hex SHA-256 digests.
std::string sha256_hex(std::string_view data);
// Throws kIoError when the file cannot be read.
std::string sha256_file(const std::filesystem::path& file);

}  // namespace scorehub
