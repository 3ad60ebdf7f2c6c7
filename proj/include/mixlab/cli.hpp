#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mixlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Runs one `mixlab` invocation. `args` excludes the program name.
/// Results go to `out`, diagnostics (including the resolved seed) to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace mixlab::cli
