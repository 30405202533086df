#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace splitdist {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int data_error = 2;
inline constexpr int convergence = 3;
inline constexpr int usage = 64;
inline constexpr int schema = 65;
}  // namespace exit_code

/// Entry point of the splitdist command line tool. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace splitdist
