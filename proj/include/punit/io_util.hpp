#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace punit {

// Reads the whole file; throws an io error if it cannot be opened.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

// Writes to a temporary sibling and renames over the target, so a failed
// write never leaves a half-written file behind.
void write_file_atomic(const std::string& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::string& path, const std::string& text);

} // namespace punit
