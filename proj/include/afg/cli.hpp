#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace afg::cli {

// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kDataError = 2;
inline constexpr int kTrainingFailure = 3;

// Runs the `afg` command line. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace afg::cli
