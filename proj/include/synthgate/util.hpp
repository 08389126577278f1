#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace synthgate {

std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);
// write to <path>.tmp then rename, so partial outputs never appear
void atomic_write_file(const std::string& path, std::string_view content);

// shortest round-trip decimal; integral values print without a fraction
std::string format_double(double v);

std::vector<std::string> split(std::string_view s, char sep);
std::string trim(std::string_view s);

enum class LogLevel { quiet = 0, info = 1, debug = 2 };
// parsed once from SYNTHGATE_LOG (quiet|info|debug); defaults to info
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace synthgate
