#pragma once

#include <string>
#include <vector>

namespace prefopt::cli {

// Exit codes: 0 success; 1 criterion/run failure; 2 schema or missing input;
// 3 training divergence; 4 enumeration budget exceeded.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args without the program name

}  // namespace prefopt::cli
