#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dwgc::cli {

enum ExitCode : int {
    kOk = 0,
    kRuntimeFailure = 1,
    kUsageError = 2,
};

/// Entry point shared by the executable and the tests. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

/// Comma separated list of positive integers, e.g. "10,20,30,100".
std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what);

}  // namespace dwgc::cli
