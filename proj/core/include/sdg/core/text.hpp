#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sdg::text {

std::string trim(std::string_view s);

// ASCII lowercase + collapse whitespace runs to a single space + trim.
std::string normalize_for_dedup(std::string_view s);

std::string to_lower_ascii(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Replaces every `{name}` occurrence. Unknown placeholders are left as-is.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values);

// Hex-encoded SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string base64_encode(std::string_view data);

// 64-bit FNV-1a; used for cheap deterministic seeding, never for integrity.
std::uint64_t fnv1a64(std::string_view data) noexcept;

std::string read_file(const std::filesystem::path& path);
// Writes via temp file + rename so readers never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace sdg::text
