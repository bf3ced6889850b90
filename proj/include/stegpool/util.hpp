#ifndef STEGPOOL_UTIL_HPP
#define STEGPOOL_UTIL_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stegpool {

// Shortest round-trip decimal form of v (to_chars); stable across runs.
std::string fmt_double(double v);

double parse_double(std::string_view s, bool& ok);
long long parse_int(std::string_view s, bool& ok);

std::vector<std::string_view> split_csv_line(std::string_view line);

// Writes content to path via temp file + rename, so readers never see a
// partial file and failures leave nothing behind.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

}  // namespace stegpool

#endif
