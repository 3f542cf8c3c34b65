#pragma once

#include <string>
#include <string_view>

namespace stnet {

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::string& path, std::string_view bytes);
std::string read_file(const std::string& path);

}  // namespace stnet
