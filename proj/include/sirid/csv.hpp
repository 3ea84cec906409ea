#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sirid::csv {

/// Shortest representation that reads back to the same double.
std::string format(double value);

std::vector<std::string> split_line(std::string_view line);

}  // namespace sirid::csv
