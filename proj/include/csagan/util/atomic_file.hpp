#pragma once

#include <filesystem>
#include <string_view>

namespace csagan {

// Writes bytes to "<path>.tmp.<pid>" and renames over path, so readers see
// either the old file or the complete new one.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace csagan
