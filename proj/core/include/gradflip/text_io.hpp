#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gradflip {

// 17 significant digits: enough for an exact double round trip.
std::string format_real(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view contents);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace gradflip
