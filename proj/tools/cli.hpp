#pragma once

#include <string>
#include <vector>

namespace brim::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
int parse_and_run(int argc, const char* const* argv);
int parse_and_run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace brim::cli
