#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace drivelm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Runs one subcommand; `args` excludes the program name. Summaries go to
/// `out`, structured errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drivelm
