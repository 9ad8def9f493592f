#ifndef MTCRF_CLI_HPP
#define MTCRF_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace mtcrf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command; args[0] is the program name. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mtcrf

#endif  // MTCRF_CLI_HPP
